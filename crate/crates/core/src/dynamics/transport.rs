use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::Vector3;

use super::{step_plan, IonState, Integrator, TimeField, Trap};
use crate::error::{Error, Result};
use crate::geometry::{
    find_null, rectangle_gradient, solve_voltages, ElectrodeField, ElectrodeGeometry, HessianTarget, Rect,
    SolveOptions, VoltageSet, VoltageTarget,
};
use crate::modes::TrapParams;
use crate::units::Species;

const LOGO: &str = include_str!("../../data/raster_logo.csv");

/// Fraction of the path covered as a function of normalised time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// `sin²(πτ/2)`: zero velocity at both ends.
    #[default]
    SinSquared,
    /// `10τ³ − 15τ⁴ + 6τ⁵`: zero velocity and acceleration at both ends.
    MinimumJerk,
    /// Jump to the end point immediately (within a picosecond).
    Step,
}

impl Profile {
    pub fn fraction(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        match self {
            Profile::SinSquared => (0.5 * PI * tau).sin().powi(2),
            Profile::MinimumJerk => tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau),
            Profile::Step => {
                if tau > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sin2" | "sin²" | "sin-squared" => Ok(Profile::SinSquared),
            "min-jerk" | "minimum-jerk" => Ok(Profile::MinimumJerk),
            "step" => Ok(Profile::Step),
            other => Err(Error::Parse(format!("unknown transport profile `{other}`"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::SinSquared => "sin2",
            Profile::MinimumJerk => "min-jerk",
            Profile::Step => "step",
        })
    }
}

/// How electrode voltages are filled in between knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
    /// Hold each knot's voltages until the next knot.
    Hold,
}

#[derive(Debug, Clone)]
pub struct TransportRequest {
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
    pub duration: f64,
    pub profile: Profile,
    /// Number of knots including both end points (at least 2).
    pub knots: usize,
    /// Curvature held fixed along the path.
    pub hessian: HessianTarget,
    pub solve: SolveOptions,
    /// Largest allowed distance between a knot's null and its path point.
    pub null_tolerance: f64,
}

impl TransportRequest {
    pub fn new(start: Vector3<f64>, end: Vector3<f64>, duration: f64, hessian: HessianTarget) -> Self {
        Self {
            start,
            end,
            duration,
            profile: Profile::SinSquared,
            knots: 41,
            hessian,
            solve: SolveOptions::default(),
            null_tolerance: 0.5e-6,
        }
    }
}

/// Electrode voltages at a sequence of knot times.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportWaveform {
    /// Electrode labels in geometry order.
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// One dense voltage vector per knot, ordered like `labels`.
    pub voltages: Vec<Vec<f64>>,
    /// Intended null position at each knot.
    pub path: Vec<Vector3<f64>>,
    pub interpolation: Interpolation,
}

impl TransportWaveform {
    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    pub fn knot_voltages(&self, k: usize) -> VoltageSet {
        let mut v = VoltageSet::new();
        for (l, x) in self.labels.iter().zip(&self.voltages[k]) {
            v.set(l.clone(), *x);
        }
        v
    }

    /// Voltages at time `t` (clamped to the waveform's span).
    pub fn voltages_at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.labels.len()];
        self.fill_voltages(t, &mut out);
        out
    }

    fn fill_voltages(&self, t: f64, out: &mut [f64]) {
        let (k, w) = self.bracket(t);
        let hi = (k + 1).min(self.times.len() - 1);
        for (o, (a, b)) in out.iter_mut().zip(self.voltages[k].iter().zip(&self.voltages[hi])) {
            *o = a + w * (b - a);
        }
    }

    /// Knot index and interpolation weight towards the next knot.
    fn bracket(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, 0.0);
        }
        let k = self.times.partition_point(|&x| x <= t) - 1;
        match self.interpolation {
            Interpolation::Hold => (k, 0.0),
            Interpolation::Linear => (k, (t - self.times[k]) / (self.times[k + 1] - self.times[k])),
        }
    }

    /// Checks the structural invariants: increasing times, voltages within
    /// `bound`, and each knot's null within `tolerance` of its path point.
    pub fn validate(&self, geom: &ElectrodeGeometry, bound: f64, tolerance: f64) -> Result<()> {
        if self.times.len() != self.voltages.len() || self.times.len() != self.path.len() || self.times.is_empty() {
            return Err(Error::InvalidParameter("waveform arrays have inconsistent lengths".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("knot times must be strictly increasing".into()));
        }
        for k in 0..self.times.len() {
            let v = self.knot_voltages(k);
            v.check_bounds(bound)
                .map_err(|e| Error::TransportKnot { knot: k, source: Box::new(e) })?;
            check_knot_null(geom, &v, &self.path[k], tolerance)
                .map_err(|e| Error::TransportKnot { knot: k, source: Box::new(e) })?;
        }
        Ok(())
    }

    /// Plain-text export: a comment header, then `t_s` and one column per
    /// electrode.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# interpolation: {:?}", self.interpolation)?;
        write!(w, "t_s")?;
        for l in &self.labels {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for (t, v) in self.times.iter().zip(&self.voltages) {
            write!(w, "{t:e}")?;
            for x in v {
                write!(w, ",{x:.9}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_knot_null(geom: &ElectrodeGeometry, v: &VoltageSet, want: &Vector3<f64>, tolerance: f64) -> Result<()> {
    let field = ElectrodeField::new(geom, v)?;
    let null = find_null(&field, *want)?;
    let miss = (null - want).norm();
    if miss > tolerance {
        return Err(Error::InvalidParameter(format!(
            "null misses its path point by {:.3} µm",
            miss * 1e6
        )));
    }
    Ok(())
}

/// Solves the electrode voltages at each knot of a smooth path from
/// `start` to `end`, then verifies that every knot's null lies on the path.
pub fn make_transport_waveform(
    geom: &ElectrodeGeometry,
    species: &Species,
    req: &TransportRequest,
) -> Result<TransportWaveform> {
    if req.knots < 2 {
        return Err(Error::InvalidParameter("a waveform needs at least two knots".into()));
    }
    if !(req.duration > 0.0 && req.duration.is_finite()) {
        return Err(Error::InvalidParameter("transport duration must be positive".into()));
    }
    let times: Vec<f64> = match req.profile {
        Profile::Step => vec![0.0, 1e-12_f64.min(req.duration / 2.0), req.duration],
        _ => (0..req.knots)
            .map(|k| req.duration * k as f64 / (req.knots - 1) as f64)
            .collect(),
    };
    let path: Vec<Vector3<f64>> = times
        .iter()
        .map(|t| req.start + (req.end - req.start) * req.profile.fraction(t / req.duration))
        .collect();

    let mut voltages: Vec<Vec<f64>> = Vec::with_capacity(path.len());
    for (k, p) in path.iter().enumerate() {
        // identical path points reuse the previous solve so that a
        // stationary waveform is exactly constant
        if k > 0 && *p == path[k - 1] {
            voltages.push(voltages[k - 1].clone());
            continue;
        }
        let target = VoltageTarget::penning(*p, req.hessian, species);
        let sol = solve_voltages(geom, &target, &req.solve)
            .map_err(|e| Error::TransportKnot { knot: k, source: Box::new(e) })?;
        voltages.push(sol.voltages.to_vec(geom)?);
    }
    let wf = TransportWaveform {
        labels: geom.labels().map(String::from).collect(),
        times,
        voltages,
        path,
        interpolation: Interpolation::Linear,
    };
    wf.validate(geom, req.solve.bound, req.null_tolerance)?;
    Ok(wf)
}

/// Time-dependent field of a waveform, evaluated by interpolating the
/// electrode voltages.
#[derive(Debug, Clone)]
pub struct WaveformField {
    rects: Vec<Rect>,
    waveform: TransportWaveform,
}

impl WaveformField {
    pub fn new(geom: &ElectrodeGeometry, waveform: TransportWaveform) -> Result<Self> {
        let labels: Vec<&str> = geom.labels().collect();
        if labels.len() != waveform.labels.len() || labels.iter().zip(&waveform.labels).any(|(a, b)| *a != b) {
            return Err(Error::InvalidParameter("waveform does not match the electrode geometry".into()));
        }
        Ok(Self {
            rects: geom.electrodes().iter().map(|e| e.rect).collect(),
            waveform,
        })
    }
}

impl TimeField for WaveformField {
    fn electric_field(&self, p: &Vector3<f64>, t: f64) -> Result<Vector3<f64>> {
        if p.y <= 0.0 {
            return Err(Error::BelowPlane([p.x, p.y, p.z]));
        }
        let (k, w) = self.waveform.bracket(t);
        let lo = &self.waveform.voltages[k];
        let hi = &self.waveform.voltages[(k + 1).min(self.waveform.times.len() - 1)];
        let mut g = Vector3::zeros();
        for (j, r) in self.rects.iter().enumerate() {
            let v = lo[j] + w * (hi[j] - lo[j]);
            if v != 0.0 {
                g += rectangle_gradient(r, p) * v;
            }
        }
        Ok(-g)
    }
}

/// Mode quanta an ion at rest in the first knot's null has acquired by the
/// end of the waveform, measured in the last knot's static trap.
pub fn transport_energy_gain(
    geom: &ElectrodeGeometry,
    waveform: &TransportWaveform,
    params: &TrapParams,
    dt: f64,
) -> Result<[f64; 3]> {
    let first = ElectrodeField::new(geom, &waveform.knot_voltages(0))?;
    let start = find_null(&first, waveform.path[0])?;
    let last = waveform.times.len() - 1;
    let trap = Trap::from_field(
        ElectrodeField::new(geom, &waveform.knot_voltages(last))?,
        *params,
        waveform.path[last],
    )?;
    let field = WaveformField::new(geom, waveform.clone())?;
    let (steps, dt) = step_plan(dt, waveform.duration())?;
    let integ = Integrator::new(&field, params, dt)?;
    let mut s = IonState::at_rest(start);
    s.time = waveform.times[0];
    integ.run(&mut s, steps, usize::MAX, |_| {})?;
    Ok(trap.actions(&s)?.quanta())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Cool,
    Transport,
    Dwell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterSegment {
    pub kind: SegmentKind,
    pub start: f64,
    pub duration: f64,
    pub from: Vector3<f64>,
    pub to: Vector3<f64>,
}

/// Cool at the origin, move to a waypoint, dwell for detection, move back;
/// once per waypoint, with the whole sequence repeated `repeats` times.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterSchedule {
    pub origin: Vector3<f64>,
    /// Absolute positions.
    pub waypoints: Vec<Vector3<f64>>,
    pub cool: f64,
    pub transport: f64,
    pub dwell: f64,
    pub repeats: u32,
}

impl RasterSchedule {
    /// Waypoints given as `x_um,z_um` offsets from `origin` in the x–z
    /// plane, one per line; `#` starts a comment and a non-numeric first
    /// line is taken as a header.
    pub fn parse_waypoints(text: &str, origin: Vector3<f64>) -> Result<Vec<Vector3<f64>>> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 2 => out.push(origin + Vector3::new(v[0] * 1e-6, 0.0, v[1] * 1e-6)),
                Err(_) if out.is_empty() && cols.len() == 2 => continue,
                _ => return Err(Error::Parse(format!("waypoint line {}: expected `x_um,z_um`", i + 1))),
            }
        }
        if out.is_empty() {
            return Err(Error::Parse("no waypoints".into()));
        }
        Ok(out)
    }

    /// The 58-point lettering shipped with the crate, 152 µm above the
    /// centre, with 1 ms cooling, 4 ms transports, 500 µs dwells and 172
    /// repeats.
    pub fn logo() -> Self {
        let origin = Vector3::new(0.0, 152e-6, 0.0);
        Self {
            origin,
            waypoints: Self::parse_waypoints(LOGO, origin).expect("shipped waypoints parse"),
            cool: 1e-3,
            transport: 4e-3,
            dwell: 500e-6,
            repeats: 172,
        }
    }

    /// Extent of the waypoints along x and z.
    pub fn extent(&self) -> (f64, f64) {
        let (mut lo, mut hi) = (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY));
        for p in &self.waypoints {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi.x - lo.x, hi.z - lo.z)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::InvalidParameter("raster needs at least one waypoint".into()));
        }
        for (name, v) in [("cool", self.cool), ("transport", self.transport), ("dwell", self.dwell)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} duration must be ≥ 0")));
            }
        }
        if self.transport == 0.0 || self.dwell == 0.0 {
            return Err(Error::InvalidParameter("transport and dwell durations must be positive".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidParameter("repeat count must be positive".into()));
        }
        Ok(())
    }

    /// One pass over all waypoints.
    pub fn segments(&self) -> Vec<RasterSegment> {
        let mut out = Vec::with_capacity(4 * self.waypoints.len());
        let mut t = 0.0;
        let mut push = |kind, duration, from, to| {
            out.push(RasterSegment { kind, start: t, duration, from, to });
            t += duration;
        };
        for p in &self.waypoints {
            if self.cool > 0.0 {
                push(SegmentKind::Cool, self.cool, self.origin, self.origin);
            }
            push(SegmentKind::Transport, self.transport, self.origin, *p);
            push(SegmentKind::Dwell, self.dwell, *p, *p);
            push(SegmentKind::Transport, self.transport, *p, self.origin);
        }
        out
    }

    pub fn pass_duration(&self) -> f64 {
        self.waypoints.len() as f64 * (self.cool + 2.0 * self.transport + self.dwell)
    }

    /// Waveforms for the outbound leg to every waypoint (the return leg is
    /// the same path reversed).
    pub fn outbound_waveforms(
        &self,
        geom: &ElectrodeGeometry,
        species: &Species,
        hessian: HessianTarget,
        knots: usize,
        solve: &SolveOptions,
    ) -> Result<Vec<TransportWaveform>> {
        self.waypoints
            .iter()
            .map(|p| {
                let mut req = TransportRequest::new(self.origin, *p, self.transport, hessian);
                req.knots = knots;
                req.solve = solve.clone();
                make_transport_waveform(geom, species, &req)
            })
            .collect()
    }

    /// Segment table as CSV with the schedule parameters in `#` header lines.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let (ex, ez) = self.extent();
        writeln!(w, "# waypoints: {}", self.waypoints.len())?;
        writeln!(w, "# repeats: {}", self.repeats)?;
        writeln!(w, "# dwell_s: {:e}", self.dwell)?;
        writeln!(w, "# transport_s: {:e}", self.transport)?;
        writeln!(w, "# cool_s: {:e}", self.cool)?;
        writeln!(w, "# extent_x_um: {:.3}", ex * 1e6)?;
        writeln!(w, "# extent_z_um: {:.3}", ez * 1e6)?;
        writeln!(w, "segment,kind,start_s,duration_s,from_x_um,from_z_um,to_x_um,to_z_um")?;
        for (i, s) in self.segments().iter().enumerate() {
            let kind = match s.kind {
                SegmentKind::Cool => "cool",
                SegmentKind::Transport => "transport",
                SegmentKind::Dwell => "dwell",
            };
            writeln!(
                w,
                "{i},{kind},{:e},{:e},{:.3},{:.3},{:.3},{:.3}",
                s.start,
                s.duration,
                s.from.x * 1e6,
                s.from.z * 1e6,
                s.to.x * 1e6,
                s.to.z * 1e6
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_hit_end_points() {
        for p in [Profile::SinSquared, Profile::MinimumJerk] {
            assert_eq!(p.fraction(0.0), 0.0);
            assert!((p.fraction(1.0) - 1.0).abs() < 1e-15);
            assert!((p.fraction(0.5) - 0.5).abs() < 1e-15);
            // vanishing slope at both ends
            let h = 1e-6;
            assert!(p.fraction(h) / h < 1e-4);
            assert!((1.0 - p.fraction(1.0 - h)) / h < 1e-4);
        }
        assert_eq!("min-jerk".parse::<Profile>().unwrap(), Profile::MinimumJerk);
        assert!("cubic".parse::<Profile>().is_err());
    }

    #[test]
    fn logo_schedule_structure() {
        let s = RasterSchedule::logo();
        s.validate().unwrap();
        assert_eq!(s.waypoints.len(), 58);
        let (ex, ez) = s.extent();
        assert!((ex - 40e-6).abs() < 1e-9 && (ez - 75e-6).abs() < 1e-9);
        let seg = s.segments();
        assert_eq!(seg.len(), 4 * 58);
        let end = seg.last().map(|x| x.start + x.duration).unwrap();
        assert!((end - s.pass_duration()).abs() < 1e-12);
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("# repeats: 172"));
    }

    #[test]
    fn waypoint_parsing() {
        let o = Vector3::new(0.0, 1e-4, 0.0);
        let w = RasterSchedule::parse_waypoints("x_um,z_um\n1,2 # a\n\n-3,4\n", o).unwrap();
        assert_eq!(w.len(), 2);
        assert!((w[1] - Vector3::new(-3e-6, 1e-4, 4e-6)).norm() < 1e-18);
        assert!(RasterSchedule::parse_waypoints("1,2,3\n", o).is_err());
        assert!(RasterSchedule::parse_waypoints("", o).is_err());
    }
}
