//! Scenario files: TOML with an explicit unit on every physical quantity.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use penning::coherence::{NoiseModel, SequenceFamily};
use penning::modes::MotionalMode;
use penning::units::{hz, parse_quantity, Dimension, Species, CYCLING_LINEWIDTH};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::CliError;

type Q = Spanned<String>;

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    seed: Option<Spanned<i64>>,
    trap: Option<RawTrap>,
    output: Option<RawOutput>,
    solve: Option<RawSolve>,
    null: Option<RawNull>,
    doppler: Option<RawDoppler>,
    sideband: Option<RawSideband>,
    thermometry: Option<RawThermometry>,
    heating: Option<RawHeating>,
    coherence: Option<RawCoherence>,
    transport: Option<RawTransport>,
    raster: Option<RawRaster>,
    isolation: Option<RawIsolation>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTrap {
    species: Option<Spanned<String>>,
    mass: Option<Q>,
    b_field: Option<Q>,
    omega_z: Option<Q>,
    geometry: Option<Spanned<String>>,
    height: Option<Q>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolve {
    null: Option<Vec<Q>>,
    bound: Option<Q>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawNull {
    voltages: Option<Spanned<String>>,
    guess: Option<Vec<Q>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDoppler {
    duration: Option<Q>,
    dt: Option<Q>,
    repeats: Option<usize>,
    samples: Option<usize>,
    initial_quanta: Option<[f64; 3]>,
    saturation: Option<f64>,
    detuning: Option<Q>,
    beam_angle_deg: Option<f64>,
    axialization: Option<Q>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSideband {
    schedule: Option<Spanned<String>>,
    initial_quanta: Option<[f64; 3]>,
    heating_rates: Option<Vec<Q>>,
    budget: Option<Q>,
    rabi: Option<Q>,
    raman_angle_deg: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawThermometry {
    input: Option<Spanned<String>>,
    mode: Option<Spanned<String>>,
    shots: Option<u64>,
    n_bar: Option<Vec<f64>>,
    rabi: Option<Q>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawHeating {
    input: Option<Spanned<String>>,
    slope: Option<Q>,
    span: Option<Q>,
    points: Option<usize>,
    noisy: Option<bool>,
    mode: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    kind: Spanned<String>,
    sigma: Option<Q>,
    correlation_time: Option<Q>,
    density: Option<Q>,
    amplitude: Option<f64>,
    alpha: Option<f64>,
    low_cutoff: Option<Q>,
    high_cutoff: Option<Q>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCoherence {
    sequences: Option<Vec<Spanned<String>>>,
    t_max: Option<Q>,
    points: Option<usize>,
    monte_carlo_paths: Option<usize>,
    fit_model: Option<Spanned<String>>,
    noise: Option<RawNoise>,
    fit_targets: Option<Vec<(Spanned<String>, Q)>>,
    low_cutoff: Option<Q>,
    high_cutoff: Option<Q>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTransport {
    displacement: Option<Vec<Q>>,
    duration: Option<Q>,
    profile: Option<Spanned<String>>,
    knots: Option<usize>,
    dt: Option<Q>,
    simulate: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRaster {
    waypoints: Option<Spanned<String>>,
    cool: Option<Q>,
    transport: Option<Q>,
    dwell: Option<Q>,
    repeats: Option<u32>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawIsolation {
    network: Option<Spanned<String>>,
    points: Option<usize>,
    fit_parasitics: Option<bool>,
    shunt_leakage: Option<Q>,
    dc_target_db: Option<f64>,
    hf_target_db: Option<f64>,
    hf_frequency: Option<Q>,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub null: Option<Vector3<f64>>,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct NullConfig {
    pub voltages: Option<PathBuf>,
    pub guess: Option<Vector3<f64>>,
}

#[derive(Debug, Clone)]
pub struct DopplerConfig {
    pub duration: f64,
    pub dt: f64,
    pub repeats: usize,
    pub samples: usize,
    pub initial_quanta: [f64; 3],
    pub saturation: f64,
    /// rad/s
    pub detuning: f64,
    /// Beam angle to the magnetic field, rad.
    pub beam_angle: f64,
    /// Axialization amplitude, V; zero disables the drive.
    pub axialization: f64,
}

#[derive(Debug, Clone)]
pub struct SidebandConfig {
    pub schedule: Option<PathBuf>,
    pub initial_quanta: [f64; 3],
    pub heating_rates: [f64; 3],
    pub budget: f64,
    pub rabi: f64,
    pub raman_angle: f64,
}

#[derive(Debug, Clone)]
pub struct ThermometryConfig {
    pub input: Option<PathBuf>,
    pub mode: MotionalMode,
    pub shots: Option<u64>,
    /// Thermal states probed when no input file is given.
    pub n_bar: Vec<f64>,
    pub rabi: f64,
}

#[derive(Debug, Clone)]
pub struct HeatingConfig {
    pub input: Option<PathBuf>,
    pub slope: f64,
    pub span: f64,
    pub points: usize,
    pub noisy: bool,
    pub mode: MotionalMode,
}

#[derive(Debug, Clone)]
pub struct CoherenceConfig {
    pub sequences: Vec<SequenceFamily>,
    pub t_max: f64,
    pub points: usize,
    pub monte_carlo_paths: usize,
    pub fit_model: penning::coherence::DecayModel,
    pub noise: NoiseModel,
    /// Measured coherence times to fit a soft-cutoff power law to; replaces
    /// `noise` when present.
    pub fit_targets: Vec<(SequenceFamily, f64)>,
    pub low_cutoff: f64,
    pub high_cutoff: f64,
}

#[derive(Debug, Clone)]
pub struct TransportConfig {
    pub displacement: Vector3<f64>,
    pub duration: f64,
    pub profile: penning::dynamics::Profile,
    pub knots: usize,
    pub dt: f64,
    pub simulate: bool,
}

#[derive(Debug, Clone)]
pub struct RasterConfig {
    pub waypoints: Option<PathBuf>,
    pub cool: f64,
    pub transport: f64,
    pub dwell: f64,
    pub repeats: u32,
}

#[derive(Debug, Clone)]
pub struct IsolationConfig {
    pub network: Option<PathBuf>,
    pub points: usize,
    pub fit_parasitics: bool,
    pub shunt_leakage: f64,
    pub dc_target_db: f64,
    pub hf_target_db: f64,
    /// Hz
    pub hf_frequency: f64,
}

/// A validated scenario. Frequencies are angular (rad/s), everything else
/// SI.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub species: Species,
    pub b_field: f64,
    pub omega_z: f64,
    pub geometry: Option<PathBuf>,
    pub height: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub solve: SolveConfig,
    pub null: NullConfig,
    pub doppler: DopplerConfig,
    pub sideband: SidebandConfig,
    pub thermometry: ThermometryConfig,
    pub heating: HeatingConfig,
    pub coherence: CoherenceConfig,
    pub transport: TransportConfig,
    pub raster: RasterConfig,
    pub isolation: IsolationConfig,
    /// SHA-256 of the scenario text.
    pub hash: String,
}

/// Collects field errors with line numbers.
struct Diag<'a> {
    text: &'a str,
    errors: Vec<String>,
}

impl<'a> Diag<'a> {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn push<T>(&mut self, field: &str, at: &Spanned<T>, msg: impl std::fmt::Display) {
        let line = self.line(at.span().start);
        self.errors.push(format!("line {line}, `{field}`: {msg}"));
    }

    fn qty(&mut self, field: &str, v: &Option<Q>, dim: Dimension) -> Option<f64> {
        let v = v.as_ref()?;
        match parse_quantity(v.get_ref(), dim) {
            Ok(x) if x.is_finite() => Some(x),
            Ok(_) => {
                self.push(field, v, "value is not finite");
                None
            }
            Err(e) => {
                self.push(field, v, e);
                None
            }
        }
    }

    fn qty_or(&mut self, field: &str, v: &Option<Q>, dim: Dimension, default: f64) -> f64 {
        self.qty(field, v, dim).unwrap_or(default)
    }

    fn positive(&mut self, field: &str, v: &Option<Q>, dim: Dimension, default: f64) -> f64 {
        let x = self.qty_or(field, v, dim, default);
        if !(x > 0.0) {
            if let Some(s) = v {
                self.push(field, s, "must be positive");
            }
        }
        x
    }

    fn vector(&mut self, field: &str, v: &Option<Vec<Q>>) -> Option<Vector3<f64>> {
        let v = v.as_ref()?;
        if v.len() != 3 {
            self.errors.push(format!("`{field}`: expected three lengths [x, y, z]"));
            return None;
        }
        let c: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, s)| self.qty(&format!("{field}[{i}]"), &Some(s.clone()), Dimension::Length).unwrap_or(0.0))
            .collect();
        Some(Vector3::new(c[0], c[1], c[2]))
    }

    fn path(&mut self, field: &str, v: &Option<Spanned<String>>, base: &Path) -> Option<PathBuf> {
        let v = v.as_ref()?;
        let p = base.join(v.get_ref());
        if !p.is_file() {
            self.push(field, v, format!("file `{}` not found", p.display()));
        }
        Some(p)
    }

    fn parse<T: std::str::FromStr>(&mut self, field: &str, v: &Option<Spanned<String>>, default: T) -> T
    where
        T::Err: std::fmt::Display,
    {
        match v {
            None => default,
            Some(s) => match s.get_ref().parse() {
                Ok(x) => x,
                Err(e) => {
                    self.push(field, s, e);
                    default
                }
            },
        }
    }
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read scenario `{}`: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_in(&text, base)
    }

    /// Parses scenario text, resolving file references against `base`.
    pub fn from_str_in(text: &str, base: &Path) -> Result<Self, CliError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        let mut d = Diag { text, errors: Vec::new() };

        let trap = raw.trap.unwrap_or_default();
        let missing: Vec<&str> = [
            ("trap.species", trap.species.is_none()),
            ("trap.b_field", trap.b_field.is_none()),
            ("trap.omega_z", trap.omega_z.is_none()),
        ]
        .iter()
        .filter(|(_, m)| *m)
        .map(|(n, _)| *n)
        .collect();
        if !missing.is_empty() {
            d.errors.push(format!("missing required fields: {}", missing.join(", ")));
        }

        let mut species = Species::beryllium9();
        if let Some(s) = &trap.species {
            match Species::by_name(s.get_ref()) {
                Ok(sp) => species = sp,
                Err(e) => d.push("trap.species", s, e),
            }
        }
        if let Some(m) = d.qty("trap.mass", &trap.mass, Dimension::Mass) {
            species.mass = m;
        }
        let b_field = d.positive("trap.b_field", &trap.b_field, Dimension::MagneticField, 3.0);
        let omega_z = d.positive("trap.omega_z", &trap.omega_z, Dimension::AngularFrequency, hz(2.5e6));
        let geometry = d.path("trap.geometry", &trap.geometry, base);
        let height = d.qty("trap.height", &trap.height, Dimension::Length);

        let seed = match raw.seed {
            Some(s) if *s.get_ref() < 0 => {
                d.push("seed", &s, "must be ≥ 0");
                0
            }
            Some(s) => *s.get_ref() as u64,
            None => 1,
        };

        let s = raw.solve.unwrap_or_default();
        let solve = SolveConfig {
            null: d.vector("solve.null", &s.null),
            bound: d.positive("solve.bound", &s.bound, Dimension::Voltage, 30.0),
        };

        let n = raw.null.unwrap_or_default();
        let null = NullConfig {
            voltages: d.path("null.voltages", &n.voltages, base),
            guess: d.vector("null.guess", &n.guess),
        };

        let r = raw.doppler.unwrap_or_default();
        let doppler = DopplerConfig {
            duration: d.positive("doppler.duration", &r.duration, Dimension::Time, 600e-6),
            dt: d.positive("doppler.dt", &r.dt, Dimension::Time, 5e-9),
            repeats: r.repeats.unwrap_or(32),
            samples: r.samples.unwrap_or(6),
            initial_quanta: r.initial_quanta.unwrap_or([6.7, 9.9, 4.4]),
            saturation: r.saturation.unwrap_or(0.1),
            detuning: d.qty_or("doppler.detuning", &r.detuning, Dimension::AngularFrequency, -0.5 * CYCLING_LINEWIDTH),
            beam_angle: r.beam_angle_deg.unwrap_or(45.0).to_radians(),
            axialization: d.qty_or("doppler.axialization", &r.axialization, Dimension::Voltage, 0.03),
        };
        if doppler.repeats == 0 || doppler.samples == 0 {
            d.errors.push("`doppler.repeats` and `doppler.samples` must be positive".into());
        }

        let r = raw.sideband.unwrap_or_default();
        let mut heating_rates = [0.49, 3.8, 0.088];
        if let Some(v) = &r.heating_rates {
            if v.len() != 3 {
                d.errors.push("`sideband.heating_rates`: expected three rates [plus, minus, axial]".into());
            } else {
                for (k, q) in v.iter().enumerate() {
                    heating_rates[k] =
                        d.qty_or(&format!("sideband.heating_rates[{k}]"), &Some(q.clone()), Dimension::Rate, 0.0);
                }
            }
        }
        let sideband = SidebandConfig {
            schedule: d.path("sideband.schedule", &r.schedule, base),
            initial_quanta: r.initial_quanta.unwrap_or([6.7, 9.9, 4.4]),
            heating_rates,
            budget: d.positive("sideband.budget", &r.budget, Dimension::Time, 60e-3),
            rabi: d.positive("sideband.rabi", &r.rabi, Dimension::AngularFrequency, hz(8e3)),
            raman_angle: r.raman_angle_deg.unwrap_or(90.0).to_radians(),
        };

        let r = raw.thermometry.unwrap_or_default();
        let thermometry = ThermometryConfig {
            input: d.path("thermometry.input", &r.input, base),
            mode: d.parse("thermometry.mode", &r.mode, MotionalMode::Axial),
            shots: r.shots,
            n_bar: r.n_bar.unwrap_or_else(|| vec![0.007, 0.05, 1.0]),
            rabi: d.positive("thermometry.rabi", &r.rabi, Dimension::AngularFrequency, hz(8e3)),
        };

        let r = raw.heating.unwrap_or_default();
        let heating = HeatingConfig {
            input: d.path("heating.input", &r.input, base),
            slope: d.qty_or("heating.slope", &r.slope, Dimension::Rate, 0.088),
            span: d.positive("heating.span", &r.span, Dimension::Time, 5.0),
            points: r.points.unwrap_or(6),
            noisy: r.noisy.unwrap_or(true),
            mode: d.parse("heating.mode", &r.mode, MotionalMode::Axial),
        };

        let r = raw.coherence.unwrap_or_default();
        let sequences = match &r.sequences {
            None => vec![
                SequenceFamily::Ramsey,
                SequenceFamily::Uhrig(1),
                SequenceFamily::Uhrig(3),
                SequenceFamily::Uhrig(5),
            ],
            Some(v) => v
                .iter()
                .enumerate()
                .map(|(i, s)| d.parse(&format!("coherence.sequences[{i}]"), &Some(s.clone()), SequenceFamily::Ramsey))
                .collect(),
        };
        let noise = match &r.noise {
            // quasi-static noise giving the 1.9 ms Ramsey 1/e time
            None => NoiseModel::QuasiStatic { sigma: 2f64.sqrt() / 1.9e-3 },
            Some(nz) => noise_model(&mut d, nz),
        };
        let fit_targets = r
            .fit_targets
            .as_ref()
            .map(|v| {
                v.iter()
                    .enumerate()
                    .map(|(i, (f, t))| {
                        let fam = d.parse(&format!("coherence.fit_targets[{i}]"), &Some(f.clone()), SequenceFamily::Ramsey);
                        let t = d.qty_or(&format!("coherence.fit_targets[{i}]"), &Some(t.clone()), Dimension::Time, 0.0);
                        (fam, t)
                    })
                    .collect()
            })
            .unwrap_or_default();
        let coherence = CoherenceConfig {
            sequences,
            t_max: d.positive("coherence.t_max", &r.t_max, Dimension::Time, 10e-3),
            points: r.points.unwrap_or(40),
            monte_carlo_paths: r.monte_carlo_paths.unwrap_or(0),
            fit_model: d.parse("coherence.fit_model", &r.fit_model, penning::coherence::DecayModel::Gaussian),
            noise,
            fit_targets,
            low_cutoff: d.positive("coherence.low_cutoff", &r.low_cutoff, Dimension::AngularFrequency, 2.0 * PI * 100.0),
            high_cutoff: d.positive("coherence.high_cutoff", &r.high_cutoff, Dimension::AngularFrequency, 2.0 * PI * 1e6),
        };
        if coherence.points < 4 {
            d.errors.push("`coherence.points` must be at least 4".into());
        }

        let r = raw.transport.unwrap_or_default();
        let transport = TransportConfig {
            displacement: d.vector("transport.displacement", &r.displacement).unwrap_or(Vector3::new(0.0, 0.0, 30e-6)),
            duration: d.positive("transport.duration", &r.duration, Dimension::Time, 300e-6),
            profile: d.parse("transport.profile", &r.profile, penning::dynamics::Profile::SinSquared),
            knots: r.knots.unwrap_or(41),
            dt: d.positive("transport.dt", &r.dt, Dimension::Time, 5e-9),
            simulate: r.simulate.unwrap_or(true),
        };

        let r = raw.raster.unwrap_or_default();
        let raster = RasterConfig {
            waypoints: d.path("raster.waypoints", &r.waypoints, base),
            cool: d.qty_or("raster.cool", &r.cool, Dimension::Time, 1e-3),
            transport: d.positive("raster.transport", &r.transport, Dimension::Time, 4e-3),
            dwell: d.positive("raster.dwell", &r.dwell, Dimension::Time, 500e-6),
            repeats: r.repeats.unwrap_or(172),
        };

        let r = raw.isolation.unwrap_or_default();
        let isolation = IsolationConfig {
            network: d.path("isolation.network", &r.network, base),
            points: r.points.unwrap_or(200),
            fit_parasitics: r.fit_parasitics.unwrap_or(false),
            shunt_leakage: d.positive("isolation.shunt_leakage", &r.shunt_leakage, Dimension::Resistance, 1e10),
            dc_target_db: r.dc_target_db.unwrap_or(83.0),
            hf_target_db: r.hf_target_db.unwrap_or(77.0),
            hf_frequency: d.positive("isolation.hf_frequency", &r.hf_frequency, Dimension::AngularFrequency, hz(5e6))
                / (2.0 * PI),
        };

        if !d.errors.is_empty() {
            return Err(CliError::Validation(d.errors.join("\n")));
        }
        Ok(Self {
            seed,
            species,
            b_field,
            omega_z,
            geometry,
            height,
            output_dir: raw.output.and_then(|o| o.dir).map(|p| base.join(p)),
            solve,
            null,
            doppler,
            sideband,
            thermometry,
            heating,
            coherence,
            transport,
            raster,
            isolation,
            hash: hex(&Sha256::digest(text.as_bytes())),
        })
    }
}

fn noise_model(d: &mut Diag<'_>, n: &RawNoise) -> NoiseModel {
    let need = |d: &mut Diag<'_>, name: &str, v: &Option<Q>, dim| {
        if v.is_none() {
            d.push(&format!("coherence.noise.{name}"), &n.kind, "required for this noise kind");
        }
        d.qty_or(&format!("coherence.noise.{name}"), v, dim, 0.0)
    };
    match n.kind.get_ref().as_str() {
        "none" => NoiseModel::None,
        "quasi-static" => NoiseModel::QuasiStatic {
            sigma: need(d, "sigma", &n.sigma, Dimension::AngularFrequency),
        },
        "ou" | "ornstein-uhlenbeck" => NoiseModel::OrnsteinUhlenbeck {
            sigma: need(d, "sigma", &n.sigma, Dimension::AngularFrequency),
            correlation_time: need(d, "correlation_time", &n.correlation_time, Dimension::Time),
        },
        "white" => NoiseModel::White {
            density: need(d, "density", &n.density, Dimension::Rate),
        },
        "power-law" => {
            if n.amplitude.is_none() || n.alpha.is_none() {
                d.push("coherence.noise", &n.kind, "power-law needs `amplitude` and `alpha`");
            }
            NoiseModel::PowerLaw {
                amplitude: n.amplitude.unwrap_or(0.0),
                alpha: n.alpha.unwrap_or(0.0),
                low_cutoff: need(d, "low_cutoff", &n.low_cutoff, Dimension::AngularFrequency),
                high_cutoff: need(d, "high_cutoff", &n.high_cutoff, Dimension::AngularFrequency),
            }
        }
        other => {
            d.push("coherence.noise.kind", &n.kind, format!("unknown noise kind `{other}`"));
            NoiseModel::None
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
