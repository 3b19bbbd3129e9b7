//! One runner per subcommand. Runners only compute; writing is done by
//! [`crate::output`].

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use penning::coherence::{
    coherence_decay, coherence_time, fit_coherence, fit_noise_spectrum, monte_carlo_decay, MonteCarloOptions,
};
use penning::dynamics::{
    doppler_cool, make_transport_waveform, transport_energy_gain, AxializationDrive, CoolingLaser, DopplerOptions,
    RasterSchedule, Trap, TransportRequest,
};
use penning::electronics::{fit_parasitics, isolation_report, motional_band, LadderNetwork};
use penning::geometry::{
    find_null, rf_null_line, solve_voltages, ElectrodeField, ElectrodeGeometry, HessianTarget, RfNullOptions,
    SolveOptions, VoltageSet, VoltageTarget,
};
use penning::modes::{stability_limit, ModeSet, MotionalMode, TrapParams};
use penning::sideband::{
    electric_field_noise, excitation_probability, heating_fit, lamb_dicke, pi_time, raman_wavevector_difference,
    sideband_cool, sideband_ratio_thermometry, thermometry_uncertainty, CoolingSchedule, FockDistribution,
    HeatingSample,
};
use penning::units::{to_hz, BEAM_WAVELENGTH};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::CliError;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Modes,
    Solve,
    Null,
    CoolDoppler,
    CoolSideband,
    Thermometry,
    Heating,
    Coherence,
    Transport,
    Raster,
    Isolation,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Modes => "modes",
            Command::Solve => "solve",
            Command::Null => "null",
            Command::CoolDoppler => "cool-doppler",
            Command::CoolSideband => "cool-sideband",
            Command::Thermometry => "thermometry",
            Command::Heating => "heating",
            Command::Coherence => "coherence",
            Command::Transport => "transport",
            Command::Raster => "raster",
            Command::Isolation => "isolation",
        }
    }
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Output {
    fn new(name: &str, bytes: Vec<u8>) -> Self {
        Self {
            name: name.to_string(),
            bytes,
        }
    }

    fn text(name: &str, s: String) -> Self {
        Self::new(name, s.into_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub command: Command,
    pub outputs: Vec<Output>,
    /// Human-readable summary for stdout.
    pub summary: String,
}

pub fn run(cmd: Command, sc: &Scenario) -> Result<RunResult, CliError> {
    let (outputs, summary) = match cmd {
        Command::Modes => modes(sc)?,
        Command::Solve => solve(sc)?,
        Command::Null => null(sc)?,
        Command::CoolDoppler => cool_doppler(sc)?,
        Command::CoolSideband => cool_sideband(sc)?,
        Command::Thermometry => thermometry(sc)?,
        Command::Heating => heating(sc)?,
        Command::Coherence => coherence(sc)?,
        Command::Transport => transport(sc)?,
        Command::Raster => raster(sc)?,
        Command::Isolation => isolation(sc)?,
    };
    Ok(RunResult {
        command: cmd,
        outputs,
        summary,
    })
}

type Run = Result<(Vec<Output>, String), CliError>;

fn params(sc: &Scenario) -> Result<TrapParams, CliError> {
    Ok(TrapParams::new(sc.b_field, sc.species)?)
}

fn geometry(sc: &Scenario) -> Result<ElectrodeGeometry, CliError> {
    match &sc.geometry {
        Some(p) => Ok(ElectrodeGeometry::load(p)?),
        None => Ok(ElectrodeGeometry::default_trap()),
    }
}

fn outer_pair() -> VoltageSet {
    VoltageSet::new().with("mid1", 1.0).with("mid7", 1.0)
}

/// Trap height: the scenario's, else the rf null of the outer pair.
fn height(sc: &Scenario, geom: &ElectrodeGeometry) -> Result<f64, CliError> {
    match sc.height {
        Some(h) => Ok(h),
        None => Ok(rf_null_line(geom, &outer_pair(), &RfNullOptions::default())?),
    }
}

fn read_input(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::Validation(format!("cannot read `{}`: {e}", p.display())))
}

fn modes(sc: &Scenario) -> Run {
    let m = ModeSet::new(&params(sc)?, sc.omega_z)?;
    m.require_stable()?;
    let rows = [
        ("omega_c", m.omega_c),
        ("omega_plus", m.omega_plus),
        ("omega_minus", m.omega_minus),
        ("omega_z", m.omega_z),
        ("stability_limit", stability_limit(m.omega_c)),
    ];
    let mut csv = String::from("quantity,rad_per_s,mhz\n");
    let mut summary = String::new();
    for (name, w) in rows {
        writeln!(csv, "{name},{w:e},{:.6}", to_hz(w) * 1e-6).unwrap();
        writeln!(summary, "{name:>16}  2π × {:.4} MHz", to_hz(w) * 1e-6).unwrap();
    }
    Ok((vec![Output::text("modes.csv", csv)], summary))
}

fn solve(sc: &Scenario) -> Run {
    let geom = geometry(sc)?;
    let null = match sc.solve.null {
        Some(n) => n,
        None => Vector3::new(0.0, height(sc, &geom)?, 0.0),
    };
    let target = VoltageTarget::penning(null, HessianTarget::symmetric(sc.omega_z), &sc.species);
    let opts = SolveOptions {
        bound: sc.solve.bound,
        ..SolveOptions::default()
    };
    let sol = solve_voltages(&geom, &target, &opts)?;
    let mut csv = String::from("electrode,volts\n");
    for l in geom.labels() {
        writeln!(csv, "{l},{:.9}", sol.voltages.get(l)).unwrap();
    }
    let peak = sol.voltages.values.values().fold(0.0f64, |a, v| a.max(v.abs()));
    let summary = format!(
        "null at ({:.2}, {:.2}, {:.2}) µm; residual {:.3e}; peak |V| {:.3} V; {} bounds active\n",
        null.x * 1e6,
        null.y * 1e6,
        null.z * 1e6,
        sol.residual,
        peak,
        sol.active_bounds
    );
    Ok((
        vec![
            Output::text("solve.csv", csv),
            Output::text("voltages.toml", sol.voltages.to_toml_string()),
        ],
        summary,
    ))
}

fn null(sc: &Scenario) -> Run {
    let geom = geometry(sc)?;
    let v = match &sc.null.voltages {
        Some(p) => VoltageSet::from_toml_str(&read_input(p)?)?,
        None => ElectrodeGeometry::reference_voltages(),
    };
    let guess = match sc.null.guess {
        Some(g) => g,
        None => Vector3::new(0.0, height(sc, &geom)?, 0.0),
    };
    let field = ElectrodeField::new(&geom, &v)?;
    let p = find_null(&field, guess)?;
    let trap = Trap::from_field(field, params(sc)?, p)?;
    let h = trap.hessian()?;
    let m = trap.modes;
    let mut csv = String::from("x_um,y_um,z_um,omega_z_rad_s,omega_plus_rad_s,omega_minus_rad_s\n");
    writeln!(
        csv,
        "{:.6},{:.6},{:.6},{:e},{:e},{:e}",
        p.x * 1e6,
        p.y * 1e6,
        p.z * 1e6,
        m.omega_z,
        m.omega_plus,
        m.omega_minus
    )
    .unwrap();
    let mut hess = String::from("row,d_x,d_y,d_z\n");
    for r in 0..3 {
        writeln!(hess, "{r},{:e},{:e},{:e}", h[(r, 0)], h[(r, 1)], h[(r, 2)]).unwrap();
    }
    let summary = format!(
        "null at ({:.3}, {:.3}, {:.3}) µm; ωz = 2π × {:.4} MHz\n",
        p.x * 1e6,
        p.y * 1e6,
        p.z * 1e6,
        to_hz(m.omega_z) * 1e-6
    );
    Ok((vec![Output::text("null.csv", csv), Output::text("null_hessian.csv", hess)], summary))
}

fn cool_doppler(sc: &Scenario) -> Run {
    let geom = geometry(sc)?;
    let d = &sc.doppler;
    let trap = Trap::quadrupole(params(sc)?, Vector3::new(0.0, height(sc, &geom)?, 0.0), sc.omega_z)?;
    let laser = CoolingLaser::at_angle(d.beam_angle, d.detuning, d.saturation)?;
    let drive = AxializationDrive::outer_pair(d.axialization, trap.modes.omega_c)?;
    let opts = DopplerOptions {
        duration: d.duration,
        dt: d.dt,
        repeats: d.repeats,
        samples: d.samples,
        seed: sc.seed,
        initial_quanta: d.initial_quanta,
    };
    let drive = (d.axialization > 0.0).then_some((&geom, &drive));
    let r = doppler_cool(&trap, &laser, drive, &opts)?;
    let mut csv = String::from("t_s,n_plus,n_minus,n_z\n");
    for (t, q) in r.times.iter().zip(&r.mean_quanta) {
        writeln!(csv, "{t:e},{:e},{:e},{:e}", q[0], q[1], q[2]).unwrap();
    }
    let mut fin = String::from("repeat,n_plus,n_minus,n_z\n");
    for (i, q) in r.final_quanta.iter().enumerate() {
        writeln!(fin, "{i},{:e},{:e},{:e}", q[0], q[1], q[2]).unwrap();
    }
    let (a, b, e) = (r.initial_mean(), r.final_mean(), r.final_stderr());
    let summary = format!(
        "n̄ (+, −, z): ({:.2}, {:.2}, {:.2}) → ({:.2} ± {:.2}, {:.2} ± {:.2}, {:.2} ± {:.2}); {:.0} photons per run\n",
        a[0], a[1], a[2], b[0], e[0], b[1], e[1], b[2], e[2], r.mean_photons
    );
    Ok((vec![Output::text("doppler.csv", csv), Output::text("doppler_final.csv", fin)], summary))
}

fn etas(sc: &Scenario, raman_angle: f64) -> Result<[f64; 3], CliError> {
    let modes = ModeSet::new(&params(sc)?, sc.omega_z)?;
    let dk = raman_wavevector_difference(raman_angle, BEAM_WAVELENGTH);
    let mut out = [0.0; 3];
    for m in MotionalMode::ALL {
        out[m.index()] = lamb_dicke(dk, sc.species.mass, &modes, m)?.eta;
    }
    Ok(out)
}

fn cool_sideband(sc: &Scenario) -> Run {
    let c = &sc.sideband;
    let schedule = match &c.schedule {
        Some(p) => CoolingSchedule::from_toml_str(&read_input(p)?)?,
        None => CoolingSchedule::shipped(),
    };
    let eta = etas(sc, c.raman_angle)?;
    let start = [
        FockDistribution::thermal(c.initial_quanta[0])?,
        FockDistribution::thermal(c.initial_quanta[1])?,
        FockDistribution::thermal(c.initial_quanta[2])?,
    ];
    let r = sideband_cool(&start, &schedule, eta, c.rabi, c.heating_rates, c.budget)?;
    let mut csv = String::from("t_s,n_plus,n_minus,n_z\n");
    for (t, q) in std::iter::once(&0.0).chain(&r.times).zip(&r.mean_quanta) {
        writeln!(csv, "{t:e},{:e},{:e},{:e}", q[0], q[1], q[2]).unwrap();
    }
    let mut pops = String::from("n,p_plus,p_minus,p_z\n");
    let len = r.state.iter().map(|d| d.probs().len()).max().unwrap_or(0);
    for n in 0..len.min(64) {
        let p = |k: usize| r.state[k].probs().get(n).copied().unwrap_or(0.0);
        writeln!(pops, "{n},{:e},{:e},{:e}", p(0), p(1), p(2)).unwrap();
    }
    let f = r.final_mean();
    let summary = format!(
        "η (+, −, z) = ({:.4}, {:.4}, {:.4}); {} pulses; final n̄ = ({:.4}, {:.4}, {:.4})\n",
        eta[0], eta[1], eta[2], r.pulses_applied, f[0], f[1], f[2]
    );
    Ok((
        vec![
            Output::text("sideband.csv", csv),
            Output::text("sideband_populations.csv", pops),
            Output::text("schedule.toml", schedule.to_toml_string()),
        ],
        summary,
    ))
}

#[derive(Deserialize)]
struct ProbeRow {
    t_wait: f64,
    p_red: f64,
    p_blue: f64,
}

fn thermometry(sc: &Scenario) -> Run {
    let c = &sc.thermometry;
    // with the qubit starting in its upper level, blue lowers n for the
    // positive-energy modes and red lowers it for the magnetron mode
    let (lowering_is_blue, name) = (c.mode.positive_energy(), c.mode.to_string());
    let rows: Vec<ProbeRow> = match &c.input {
        Some(p) => {
            let mut rdr = csv::Reader::from_path(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            rdr.deserialize()
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
        }
        None => {
            let eta = etas(sc, sc.sideband.raman_angle)?[c.mode.index()];
            let t = pi_time(0, 1, eta, c.rabi);
            c.n_bar
                .iter()
                .map(|&n| {
                    let d = FockDistribution::thermal(n)?;
                    let lower = excitation_probability(&d, -1, t, eta, c.rabi);
                    let raise = excitation_probability(&d, 1, t, eta, c.rabi);
                    let (p_red, p_blue) = if lowering_is_blue { (raise, lower) } else { (lower, raise) };
                    Ok(ProbeRow { t_wait: 0.0, p_red, p_blue })
                })
                .collect::<Result<_, penning::Error>>()?
        }
    };
    let mut csv = String::from("t_wait,P_red,P_blue,n_bar,sigma\n");
    let mut summary = format!("{name} mode\n");
    for (k, r) in rows.iter().enumerate() {
        let (lower, raise) = if lowering_is_blue { (r.p_blue, r.p_red) } else { (r.p_red, r.p_blue) };
        let (n, s) = match c.shots {
            Some(shots) => thermometry_uncertainty(lower, raise, shots)?,
            None => (sideband_ratio_thermometry(lower, raise)?, f64::NAN),
        };
        writeln!(csv, "{:e},{:e},{:e},{n:e},{s:e}", r.t_wait, r.p_red, r.p_blue).unwrap();
        match c.input {
            Some(_) => writeln!(summary, "  t = {:.3e} s: n̄ = {n:.5}", r.t_wait),
            None => writeln!(summary, "  thermal n̄ {}: estimated {n:.5}", c.n_bar[k]),
        }
        .unwrap();
    }
    Ok((vec![Output::text("thermometry.csv", csv)], summary))
}

#[derive(Deserialize)]
struct HeatingRow {
    t_wait: f64,
    n_bar: f64,
    #[serde(default)]
    sigma: f64,
}

fn heating(sc: &Scenario) -> Run {
    let c = &sc.heating;
    let samples: Vec<HeatingSample> = match &c.input {
        Some(p) => {
            let mut rdr = csv::Reader::from_path(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            rdr.deserialize::<HeatingRow>()
                .map(|r| {
                    r.map(|r| HeatingSample { t_wait: r.t_wait, n_bar: r.n_bar, sigma: r.sigma })
                        .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
                })
                .collect::<Result<_, _>>()?
        }
        None => {
            if c.points < 2 {
                return Err(CliError::Validation("`heating.points` must be at least 2".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
            (0..c.points)
                .map(|k| {
                    let t = c.span * k as f64 / (c.points - 1) as f64;
                    let n = 0.02 + c.slope * t;
                    let sigma = 0.05 + 0.1 * n;
                    let noise = if c.noisy { Normal::new(0.0, sigma).unwrap().sample(&mut rng) } else { 0.0 };
                    HeatingSample { t_wait: t, n_bar: n + noise, sigma }
                })
                .collect()
        }
    };
    let fit = heating_fit(&samples)?;
    let omega = c.mode.frequency(&ModeSet::new(&params(sc)?, sc.omega_z)?);
    let s_e = electric_field_noise(fit.slope.max(0.0), omega, sc.species.mass, sc.species.charge);
    let mut data = String::from("t_wait,n_bar,sigma,model\n");
    for s in &samples {
        writeln!(data, "{:e},{:e},{:e},{:e}", s.t_wait, s.n_bar, s.sigma, fit.intercept + fit.slope * s.t_wait).unwrap();
    }
    let report = format!(
        "slope,slope_err,intercept,intercept_err,chi2,dof,weighted,field_noise_v2_m2_hz\n{:e},{:e},{:e},{:e},{:e},{},{},{:e}\n",
        fit.slope, fit.slope_err, fit.intercept, fit.intercept_err, fit.chi2, fit.dof, fit.weighted, s_e
    );
    let summary = format!(
        "ṅ = {:.4} ± {:.4} quanta/s; S_E = {:.3e} V²m⁻²Hz⁻¹ at 2π × {:.3} MHz\n",
        fit.slope,
        fit.slope_err,
        s_e,
        to_hz(omega) * 1e-6
    );
    Ok((vec![Output::text("heating.csv", data), Output::text("heating_fit.csv", report)], summary))
}

fn coherence(sc: &Scenario) -> Run {
    let c = &sc.coherence;
    let mut outputs = Vec::new();
    let mut summary = String::new();
    let noise = if c.fit_targets.is_empty() {
        c.noise.clone()
    } else {
        let fit = fit_noise_spectrum(&c.fit_targets, c.low_cutoff, c.high_cutoff, 2.0)?;
        outputs.push(Output::text("spectrum_fit.toml", fit.report()));
        summary.push_str(&fit.report());
        fit.noise
    };
    let grid: Vec<f64> = (1..=c.points).map(|k| c.t_max * k as f64 / c.points as f64).collect();
    let mut curves = String::from("sequence,method,t_s,contrast,stderr\n");
    let mut fits = String::from("sequence,coherence_time_s,fit_model,fit_tau_s,fit_tau_err_s,fit_amplitude\n");
    for (i, &fam) in c.sequences.iter().enumerate() {
        let ff = coherence_decay(&noise, fam, &grid)?;
        for k in 0..ff.len() {
            writeln!(curves, "{fam},filter-function,{:e},{:e},0", ff.times[k], ff.contrast[k]).unwrap();
        }
        let t1e = coherence_time(&noise, fam, 1e3 * c.t_max)?;
        let f = fit_coherence(&ff, c.fit_model)?;
        if c.monte_carlo_paths > 0 {
            let opts = MonteCarloOptions {
                paths: c.monte_carlo_paths,
                seed: sc.seed.wrapping_add(i as u64),
            };
            let mc = monte_carlo_decay(&noise, fam, &grid, &opts)?;
            for k in 0..mc.len() {
                writeln!(curves, "{fam},monte-carlo,{:e},{:e},{:e}", mc.times[k], mc.contrast[k], mc.stderr[k]).unwrap();
            }
        }
        let t1e_s = t1e.map_or("inf".to_string(), |t| format!("{t:e}"));
        writeln!(fits, "{fam},{t1e_s},{},{:e},{:e},{:e}", c.fit_model, f.tau, f.tau_err, f.amplitude).unwrap();
        writeln!(
            summary,
            "{fam:>10}: 1/e time {}",
            t1e.map_or("> search range".to_string(), |t| format!("{:.3} ms", t * 1e3))
        )
        .unwrap();
    }
    outputs.push(Output::text("coherence.csv", curves));
    outputs.push(Output::text("coherence_fit.csv", fits));
    Ok((outputs, summary))
}

fn transport(sc: &Scenario) -> Run {
    let geom = geometry(sc)?;
    let c = &sc.transport;
    let start = Vector3::new(0.0, height(sc, &geom)?, 0.0);
    let mut req = TransportRequest::new(start, start + c.displacement, c.duration, HessianTarget::symmetric(sc.omega_z));
    req.profile = c.profile;
    req.knots = c.knots;
    let wf = make_transport_waveform(&geom, &sc.species, &req)?;
    let mut buf = Vec::new();
    wf.write(&mut buf)?;
    let mut outputs = vec![Output::new("transport_waveform.csv", buf)];
    let mut summary = format!("{} knots over {:.1} µs\n", wf.times.len(), c.duration * 1e6);
    if c.simulate {
        let gain = transport_energy_gain(&geom, &wf, &params(sc)?, c.dt)?;
        outputs.push(Output::text(
            "transport.csv",
            format!("n_plus,n_minus,n_z\n{:e},{:e},{:e}\n", gain[0], gain[1], gain[2]),
        ));
        writeln!(summary, "quanta gained (+, −, z): ({:.3e}, {:.3e}, {:.3e})", gain[0], gain[1], gain[2]).unwrap();
    }
    Ok((outputs, summary))
}

fn raster(sc: &Scenario) -> Run {
    let c = &sc.raster;
    let mut s = RasterSchedule::logo();
    if let Some(p) = &c.waypoints {
        s.waypoints = RasterSchedule::parse_waypoints(&read_input(p)?, s.origin)?;
    }
    s.cool = c.cool;
    s.transport = c.transport;
    s.dwell = c.dwell;
    s.repeats = c.repeats;
    s.validate()?;
    let mut buf = Vec::new();
    s.write(&mut buf)?;
    let (ex, ez) = s.extent();
    let summary = format!(
        "{} waypoints, {:.0} × {:.0} µm, dwell {:.0} µs, pass {:.1} ms, repeated {} times\n",
        s.waypoints.len(),
        ex * 1e6,
        ez * 1e6,
        s.dwell * 1e6,
        s.pass_duration() * 1e3,
        s.repeats
    );
    Ok((vec![Output::new("raster.csv", buf)], summary))
}

fn isolation(sc: &Scenario) -> Run {
    let c = &sc.isolation;
    let mut net = match &c.network {
        Some(p) => LadderNetwork::from_toml_str(&read_input(p)?)?,
        None => LadderNetwork::detachment_ladder(),
    };
    let mut outputs = Vec::new();
    let mut summary = String::new();
    if c.fit_parasitics {
        let fit = fit_parasitics(&net, c.dc_target_db, c.hf_target_db, c.hf_frequency, c.shunt_leakage)?;
        writeln!(
            summary,
            "fitted parasitics: switch leakage {:.3e} Ω, bridge {:.4} pF (shunt leakage {:.3e} Ω)",
            fit.switch_leakage,
            fit.bridge_capacitance * 1e12,
            fit.shunt_leakage
        )
        .unwrap();
        net = fit.network;
        outputs.push(Output::text("network_fitted.toml", net.to_toml_string()));
    }
    let r = isolation_report(&net, &motional_band(c.points))?;
    let mut buf = Vec::new();
    r.write_csv(&mut buf)?;
    outputs.insert(0, Output::new("isolation.csv", buf));
    if let (Some((fw, w)), Some((fb, b))) = (r.worst(), r.best()) {
        writeln!(summary, "isolation {w:.2} dB (worst, at {fw:.4e} Hz) to {b:.2} dB (best, at {fb:.4e} Hz)").unwrap();
    }
    writeln!(summary, "isolation non-increasing with frequency: {}", r.non_increasing_isolation()).unwrap();
    Ok((outputs, summary))
}
