use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::field::{rectangle_gradient, rectangle_sample, Field, FieldSample};
use super::{ElectrodeField, ElectrodeGeometry, VoltageSet};
use crate::error::{Error, Result};
use crate::units::Species;

/// Target curvature given as an axial frequency plus radial anisotropy.
///
/// The radially symmetric Penning potential has `H_zz = m ωz² / q` and
/// `H_xx = H_yy = −H_zz / 2`. A non-zero `asymmetry` ε splits the radial
/// curvatures as `−H_zz (1 ± ε) / 2`, with principal axes rotated by `angle`
/// about `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianTarget {
    pub omega_z: f64,
    pub asymmetry: f64,
    pub angle: f64,
}

impl HessianTarget {
    pub fn symmetric(omega_z: f64) -> Self {
        Self {
            omega_z,
            asymmetry: 0.0,
            angle: 0.0,
        }
    }

    pub fn matrix(&self, species: &Species) -> Matrix3<f64> {
        let k = species.mass * self.omega_z * self.omega_z / species.charge;
        let d = Matrix3::from_diagonal(&Vector3::new(
            -0.5 * k * (1.0 + self.asymmetry),
            -0.5 * k * (1.0 - self.asymmetry),
            k,
        ));
        let (s, c) = self.angle.sin_cos();
        let rot = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        rot * d * rot.transpose()
    }
}

/// Position of the potential null and the curvature there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageTarget {
    pub null: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

impl VoltageTarget {
    pub fn new(null: Vector3<f64>, hessian: Matrix3<f64>) -> Self {
        Self { null, hessian }
    }

    pub fn penning(null: Vector3<f64>, target: HessianTarget, species: &Species) -> Self {
        Self::new(null, target.matrix(species))
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Symmetric voltage bound `|V| ≤ bound`.
    pub bound: f64,
    /// Tikhonov weight on the voltage norm (V⁻² relative to the volt-scaled
    /// constraint rows). Zero selects the minimum-norm exact solution.
    pub regularization: f64,
    /// Length used to scale gradient and curvature rows to volts; defaults to
    /// the null height.
    pub length_scale: Option<f64>,
    /// Relative residual above which a bound-limited solve is infeasible.
    pub residual_tolerance: f64,
    /// Restrict the solve to these electrodes; the rest stay grounded.
    pub electrodes: Option<Vec<String>>,
    /// Half-width of a six-point stencil around the null on which the
    /// gradient should follow the target quadratic. Used as a secondary
    /// objective inside the exact constraints; suppresses the higher-order
    /// terms a bare minimum-norm solution picks up. `None` disables it.
    pub harmonic_radius: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            bound: 30.0,
            regularization: 1e-8,
            length_scale: None,
            residual_tolerance: 1e-6,
            electrodes: None,
            harmonic_radius: Some(40e-6),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VoltageSolution {
    pub voltages: VoltageSet,
    /// ‖A v − b‖ / ‖b‖ over the eight scaled constraints.
    pub residual: f64,
    pub rank: usize,
    pub rank_deficient: bool,
    pub active_bounds: usize,
    /// Field actually produced at the target null.
    pub achieved: FieldSample,
}

/// Result of [`bounded_least_squares`].
#[derive(Debug, Clone)]
pub struct BoundedSolution {
    pub x: DVector<f64>,
    /// ‖M x − d‖² + λ ‖x‖²
    pub objective: f64,
    pub residual_norm: f64,
    pub rank: usize,
    pub active: Vec<bool>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Free,
    Lower,
    Upper,
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * max).count()
}

fn pinv_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(rhs, tol).expect("svd computed with u and v")
}

/// Minimise `‖M x − d‖² + λ‖x‖²` subject to `lo ≤ x ≤ hi`.
///
/// Primal active-set iteration: free variables are solved by
/// pseudo-inverse (so rank-deficient subproblems return their minimum-norm
/// point), blocked steps pin variables to bounds, and bound variables with
/// the wrong multiplier sign are released one at a time.
pub fn bounded_least_squares(
    m: &DMatrix<f64>,
    d: &DVector<f64>,
    lo: &[f64],
    hi: &[f64],
    lambda: f64,
) -> Result<BoundedSolution> {
    let n = m.ncols();
    if lo.len() != n || hi.len() != n || d.len() != m.nrows() {
        return Err(Error::InvalidParameter("dimension mismatch in bounded least squares".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| l > h) || lambda < 0.0 {
        return Err(Error::InvalidParameter("empty box or negative regularisation".into()));
    }
    let rank = numerical_rank(m);
    let (ma, da) = if lambda > 0.0 {
        let mut ma = DMatrix::zeros(m.nrows() + n, n);
        ma.rows_mut(0, m.nrows()).copy_from(m);
        for i in 0..n {
            ma[(m.nrows() + i, i)] = lambda.sqrt();
        }
        let mut da = DVector::zeros(m.nrows() + n);
        da.rows_mut(0, m.nrows()).copy_from(d);
        (ma, da)
    } else {
        (m.clone(), d.clone())
    };

    let mut x = DVector::from_iterator(n, (0..n).map(|i| 0.0f64.clamp(lo[i], hi[i])));
    let mut state: Vec<State> = (0..n)
        .map(|i| {
            if lo[i] == hi[i] {
                State::Lower
            } else {
                State::Free
            }
        })
        .collect();
    let scale = ma.norm().max(f64::MIN_POSITIVE) * da.norm().max(1.0);
    let kkt_tol = 1e-12 * scale;
    let max_iter = 20 * n + 50;
    let mut iterations = 0;
    let mut last_freed: Option<usize> = None;

    while iterations < max_iter {
        iterations += 1;
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == State::Free).collect();
        if !free.is_empty() {
            let mut rhs = da.clone();
            for i in (0..n).filter(|&i| state[i] != State::Free) {
                rhs -= ma.column(i) * x[i];
            }
            let mf = ma.select_columns(free.iter());
            let z = pinv_solve(&mf, &rhs);
            let mut alpha = 1.0f64;
            let mut blocking = None;
            for (k, &i) in free.iter().enumerate() {
                let step = z[k] - x[i];
                if z[k] > hi[i] && step > 0.0 {
                    let a = (hi[i] - x[i]) / step;
                    if a < alpha {
                        alpha = a;
                        blocking = Some((i, State::Upper));
                    }
                } else if z[k] < lo[i] && step < 0.0 {
                    let a = (lo[i] - x[i]) / step;
                    if a < alpha {
                        alpha = a;
                        blocking = Some((i, State::Lower));
                    }
                }
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] += alpha * (z[k] - x[i]);
            }
            if let Some((i, s)) = blocking {
                x[i] = if s == State::Upper { hi[i] } else { lo[i] };
                state[i] = s;
                // also pin anything that landed on its bound
                for &j in &free {
                    if j != i && state[j] == State::Free {
                        if x[j] >= hi[j] {
                            x[j] = hi[j];
                            state[j] = State::Upper;
                        } else if x[j] <= lo[j] {
                            x[j] = lo[j];
                            state[j] = State::Lower;
                        }
                    }
                }
                if last_freed == Some(i) && alpha == 0.0 {
                    // releasing this variable made no progress; try the next one
                    match release_worst(&ma, &da, &x, &mut state, kkt_tol, Some(i), lo, hi) {
                        Some(j) => last_freed = Some(j),
                        None => break,
                    }
                }
                continue;
            }
        }
        match release_worst(&ma, &da, &x, &mut state, kkt_tol, None, lo, hi) {
            Some(j) => last_freed = Some(j),
            None => break,
        }
    }

    let r = m * &x - d;
    let residual_norm = r.norm();
    Ok(BoundedSolution {
        objective: residual_norm * residual_norm + lambda * x.norm_squared(),
        residual_norm,
        rank,
        active: state.iter().map(|s| *s != State::Free).collect(),
        x,
        iterations,
    })
}

/// Frees the bound variable whose multiplier most violates optimality.
/// Returns `None` when the KKT conditions hold.
#[allow(clippy::too_many_arguments)]
fn release_worst(
    ma: &DMatrix<f64>,
    da: &DVector<f64>,
    x: &DVector<f64>,
    state: &mut [State],
    tol: f64,
    skip: Option<usize>,
    lo: &[f64],
    hi: &[f64],
) -> Option<usize> {
    // w = -½ ∇ objective
    let w = ma.transpose() * (da - ma * x);
    let mut worst: Option<(usize, f64)> = None;
    for (i, s) in state.iter().enumerate() {
        if Some(i) == skip || lo[i] == hi[i] {
            continue;
        }
        let violation = match s {
            State::Lower => w[i],
            State::Upper => -w[i],
            State::Free => continue,
        };
        if violation > tol && worst.is_none_or(|(_, v)| violation > v) {
            worst = Some((i, violation));
        }
    }
    let (i, _) = worst?;
    state[i] = State::Free;
    Some(i)
}

const EXACT_WEIGHT: f64 = 1e4;

/// Gradient rows at `null ± r·ê_k`, target `H·(±r ê_k)`, volt-scaled.
fn stencil_rows(
    geom: &ElectrodeGeometry,
    selected: &[usize],
    target: &VoltageTarget,
    r: f64,
    l: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut m = DMatrix::zeros(18, selected.len());
    let mut d = DVector::zeros(18);
    let mut row = 0;
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut offset = Vector3::zeros();
            offset[axis] = sign * r;
            let p = target.null + offset;
            for (col, &j) in selected.iter().enumerate() {
                let g = rectangle_gradient(&geom.electrodes()[j].rect, &p);
                for k in 0..3 {
                    m[(row + k, col)] = g[k] * l;
                }
            }
            let want = target.hessian * offset;
            for k in 0..3 {
                d[row + k] = want[k] * l;
            }
            row += 3;
        }
    }
    Ok((m, d))
}

/// Removes the remaining constraint residual with the minimum-norm change
/// of the free variables, if that stays inside the box.
fn project_onto_constraints(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &mut DVector<f64>,
    active: &[bool],
    lo: &[f64],
    hi: &[f64],
) {
    let free: Vec<usize> = (0..x.len()).filter(|&i| !active[i]).collect();
    if free.is_empty() {
        return;
    }
    let r = b - a * &*x;
    let dx = pinv_solve(&a.select_columns(free.iter()), &r);
    if free
        .iter()
        .enumerate()
        .all(|(k, &i)| (lo[i]..=hi[i]).contains(&(x[i] + dx[k])))
    {
        for (k, &i) in free.iter().enumerate() {
            x[i] += dx[k];
        }
    }
}

const HESSIAN_ROWS: [(usize, usize); 5] = [(0, 0), (1, 1), (0, 1), (0, 2), (1, 2)];

/// Voltages placing the potential null at `target.null` with curvature
/// `target.hessian`.
///
/// The eight constraints are the gradient (3) and the independent Hessian
/// elements (5; `H_zz` follows from Laplace), scaled to volts by the null
/// height.
pub fn solve_voltages(
    geom: &ElectrodeGeometry,
    target: &VoltageTarget,
    opts: &SolveOptions,
) -> Result<VoltageSolution> {
    let h = &target.hessian;
    let hn = h.norm();
    if (h - h.transpose()).norm() > 1e-9 * hn || h.trace().abs() > 1e-9 * hn.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter("target hessian must be symmetric and traceless".into()));
    }
    if target.null.y <= 0.0 {
        return Err(Error::BelowPlane([target.null.x, target.null.y, target.null.z]));
    }
    let selected: Vec<usize> = match &opts.electrodes {
        Some(labels) => labels.iter().map(|l| geom.index_of(l)).collect::<Result<_>>()?,
        None => (0..geom.len()).collect(),
    };
    let l = opts.length_scale.unwrap_or(target.null.y);
    let mut a = DMatrix::zeros(8, selected.len());
    for (col, &j) in selected.iter().enumerate() {
        let s = rectangle_sample(&geom.electrodes()[j].rect, &target.null)?;
        for k in 0..3 {
            a[(k, col)] = s.gradient[k] * l;
        }
        for (k, &(r, c)) in HESSIAN_ROWS.iter().enumerate() {
            a[(3 + k, col)] = s.hessian[(r, c)] * l * l;
        }
    }
    let mut b = DVector::zeros(8);
    for (k, &(r, c)) in HESSIAN_ROWS.iter().enumerate() {
        b[3 + k] = h[(r, c)] * l * l;
    }
    let lo = vec![-opts.bound; selected.len()];
    let hi = vec![opts.bound; selected.len()];
    let sol = match opts.harmonic_radius {
        None => bounded_least_squares(&a, &b, &lo, &hi, opts.regularization)?,
        Some(r) => {
            if !(r > 0.0 && r < target.null.y) {
                return Err(Error::InvalidParameter("harmonic radius must lie in (0, null height)".into()));
            }
            let (s_rows, s_rhs) = stencil_rows(geom, &selected, target, r, l)?;
            let n_rows = 8 + s_rows.nrows();
            let mut m = DMatrix::zeros(n_rows, selected.len());
            let mut d = DVector::zeros(n_rows);
            m.rows_mut(0, 8).copy_from(&(&a * EXACT_WEIGHT));
            d.rows_mut(0, 8).copy_from(&(&b * EXACT_WEIGHT));
            m.rows_mut(8, s_rows.nrows()).copy_from(&s_rows);
            d.rows_mut(8, s_rows.nrows()).copy_from(&s_rhs);
            let mut sol = bounded_least_squares(&m, &d, &lo, &hi, opts.regularization)?;
            project_onto_constraints(&a, &b, &mut sol.x, &sol.active, &lo, &hi);
            sol.rank = numerical_rank(&a);
            sol.residual_norm = (&a * &sol.x - &b).norm();
            sol
        }
    };

    let bnorm = b.norm();
    let residual = if bnorm > 0.0 {
        sol.residual_norm / bnorm
    } else {
        sol.residual_norm
    };
    let mut dense = vec![0.0; geom.len()];
    for (col, &j) in selected.iter().enumerate() {
        dense[j] = sol.x[col];
    }
    let active_bounds = sol
        .active
        .iter()
        .zip(sol.x.iter())
        .filter(|(act, v)| **act && v.abs() >= opts.bound * (1.0 - 1e-12))
        .count();
    if active_bounds > 0 && residual > opts.residual_tolerance {
        return Err(Error::Infeasible {
            residual,
            voltages: dense,
        });
    }
    let achieved = ElectrodeField::from_dense(geom, &dense).sample(&target.null)?;
    Ok(VoltageSolution {
        voltages: VoltageSet::from_vec(geom, &dense),
        residual,
        rank: sol.rank,
        rank_deficient: sol.rank < 8.min(selected.len()) || selected.len() < 8,
        active_bounds,
        achieved,
    })
}
