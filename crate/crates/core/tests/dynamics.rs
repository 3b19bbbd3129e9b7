use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use penning::dynamics::*;
use penning::geometry::*;
use penning::modes::{epicycle_state, ModeAmplitudes, ModeSet, TrapParams};
use penning::units::{hz, Species, CYCLING_LINEWIDTH};
use penning::Error;

fn params() -> TrapParams {
    TrapParams::new(3.0, Species::beryllium9()).unwrap()
}

fn quad_trap() -> Trap<QuadrupoleField> {
    Trap::quadrupole(params(), Vector3::new(0.0, 152e-6, 0.0), hz(2.5e6)).unwrap()
}

fn cyclotron_step(p: &TrapParams, per_period: f64) -> f64 {
    2.0 * PI * p.mass / (p.charge * p.b_field * per_period)
}

#[test]
fn free_cyclotron_orbit_keeps_speed() {
    let p = params();
    let dt = cyclotron_step(&p, 50.0);
    let s0 = IonState::new(Vector3::zeros(), Vector3::new(300.0, -150.0, 0.0));
    let opts = IntegrateOptions { dt, duration: 1000.0 * 50.0 * dt, sample_every: 1000 };
    let tr = integrate(s0, &NoField, &p, &opts).unwrap();
    let v0 = s0.velocity.norm();
    for s in &tr.states {
        assert!((s.velocity.norm() / v0 - 1.0).abs() < 1e-10);
    }
    // after whole periods the ion is back where it started
    assert!((tr.last().unwrap().position - s0.position).norm() < 1e-9 * v0 * dt * 50.0);
}

/// Frequency of the strongest component of `signal` near `guess`, from a
/// Hann-windowed discrete-time Fourier transform maximised by golden
/// section.
fn refine_peak(signal: &[Complex64], dt: f64, guess: f64, width: f64) -> f64 {
    let n = signal.len();
    let w: Vec<f64> = (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos()).collect();
    let power = |omega: f64| {
        let step = Complex64::from_polar(1.0, omega * dt);
        let mut ph = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            acc += signal[k] * w[k] * ph;
            ph *= step;
            if k % 1024 == 0 {
                ph /= ph.norm();
            }
        }
        acc.norm_sqr()
    };
    let (mut a, mut b) = (guess - width, guess + width);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (power(c), power(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = power(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = power(d);
        }
    }
    0.5 * (a + b)
}

/// Coarse peak location from an FFT of the (zero-padded) signal.
fn coarse_peaks(signal: &[Complex64], dt: f64, k: usize) -> Vec<f64> {
    use rustfft::FftPlanner;
    let n = signal.len().next_power_of_two();
    let mut buf: Vec<Complex64> = signal.to_vec();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
    let mut peaks: Vec<(usize, f64)> = (1..n - 1)
        .filter(|&i| mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])
        .map(|i| (i, mag[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks
        .iter()
        .take(k)
        .map(|&(i, _)| {
            // FFT uses e^{-iωt}; map bins to signed angular frequency
            let f = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
            -2.0 * PI * f / (n as f64 * dt)
        })
        .collect()
}

#[test]
fn trajectory_spectrum_matches_mode_frequencies() {
    let trap = quad_trap();
    let p = trap.params;
    let amps = ModeAmplitudes {
        j_plus: 40.0 * 1.054e-34,
        j_minus: 90.0 * 1.054e-34,
        j_z: 30.0 * 1.054e-34,
        phase_plus: 0.4,
        phase_minus: 2.1,
        phase_z: 5.0,
    };
    let (x, v) = epicycle_state(&trap.modes, &amps, p.mass, 0.0);
    let dt = cyclotron_step(&p, 200.0);
    let opts = IntegrateOptions { dt, duration: 200e-6, sample_every: 2 };
    let tr = integrate(IonState::new(trap.center + x, v), &Static(trap.field), &p, &opts).unwrap();
    let sdt = tr.states[1].time - tr.states[0].time;
    let radial: Vec<Complex64> = tr
        .states
        .iter()
        .map(|s| Complex64::new(s.position.x - trap.center.x, s.position.y - trap.center.y))
        .collect();
    let axial: Vec<Complex64> = tr.states.iter().map(|s| Complex64::new(s.position.z, 0.0)).collect();

    // x + iy rotates as e^{-iω±t}; the transform kernel e^{+iωt} picks ω±
    let radial_guess = coarse_peaks(&radial, sdt, 2);
    let mut found: Vec<f64> = radial_guess
        .iter()
        .map(|g| refine_peak(&radial, sdt, *g, 2.0 * PI / 200e-6 * 2.0))
        .collect();
    found.sort_by(|a, b| a.total_cmp(b));
    let axial_guess = coarse_peaks(&axial, sdt, 2).into_iter().map(f64::abs).fold(0.0, f64::max);
    let wz = refine_peak(&axial, sdt, axial_guess, 2.0 * PI / 200e-6 * 2.0).abs();

    let m = trap.modes;
    for (got, want) in [(found[0], m.omega_minus), (found[1], m.omega_plus), (wz, m.omega_z)] {
        assert!((got / want - 1.0).abs() < 1e-4, "{got} vs {want}");
    }
}

#[test]
fn energy_drift_is_negligible() {
    let trap = quad_trap();
    let p = trap.params;
    let amps = ModeAmplitudes::from_quanta(50.0, 80.0, 30.0);
    let (x, v) = epicycle_state(&trap.modes, &amps, p.mass, 0.0);
    let dt = cyclotron_step(&p, 400.0);
    let cycles = 1000.0;
    let duration = cycles * 2.0 * PI / trap.modes.omega_z;
    let opts = IntegrateOptions { dt, duration, sample_every: 7 };
    let tr = integrate(IonState::new(trap.center + x, v), &Static(trap.field), &p, &opts).unwrap();
    let e: Vec<f64> = tr.states.iter().map(|s| trap.energy(s).unwrap()).collect();
    let t: Vec<f64> = tr.states.iter().map(|s| s.time).collect();
    // least-squares trend of E(t); the bounded oscillation of a symplectic
    // scheme averages out, a secular drift does not
    let n = e.len() as f64;
    let (tm, em) = (t.iter().sum::<f64>() / n, e.iter().sum::<f64>() / n);
    let slope = t.iter().zip(&e).map(|(a, b)| (a - tm) * (b - em)).sum::<f64>()
        / t.iter().map(|a| (a - tm).powi(2)).sum::<f64>();
    let drift = (slope * duration / em).abs();
    assert!(drift < 1e-8, "relative drift {drift:e}");
}

#[test]
fn second_order_convergence() {
    let trap = quad_trap();
    let p = trap.params;
    let amps = ModeAmplitudes::from_quanta(1e3, 2e3, 1e3);
    let (x, v) = epicycle_state(&trap.modes, &amps, p.mass, 0.0);
    let duration = 5e-6;
    let exact = epicycle_state(&trap.modes, &amps, p.mass, duration).0 + trap.center;
    let mut errors = Vec::new();
    for per in [40.0, 80.0, 160.0] {
        let opts = IntegrateOptions { dt: cyclotron_step(&p, per), duration, sample_every: usize::MAX };
        let tr = integrate(IonState::new(trap.center + x, v), &Static(trap.field), &p, &opts).unwrap();
        errors.push((tr.last().unwrap().position - exact).norm());
    }
    assert!(errors[0] / errors[1] >= 4.0 * 0.95, "{errors:?}");
    assert!(errors[1] / errors[2] >= 4.0 * 0.95, "{errors:?}");
}

#[test]
fn actions_constant_under_free_evolution() {
    let trap = quad_trap();
    let p = trap.params;
    let amps = ModeAmplitudes::from_quanta(12.0, 30.0, 7.0);
    let (x, v) = epicycle_state(&trap.modes, &amps, p.mass, 0.0);
    let opts = IntegrateOptions { dt: cyclotron_step(&p, 400.0), duration: 20e-6, sample_every: 500 };
    let tr = integrate(IonState::new(trap.center + x, v), &Static(trap.field), &p, &opts).unwrap();
    for s in &tr.states {
        let q = trap.actions(s).unwrap().quanta();
        for (a, b) in q.iter().zip([12.0, 30.0, 7.0]) {
            assert!((a / b - 1.0).abs() < 1e-3, "{q:?}");
        }
    }
}

fn rf_trap() -> (ElectrodeGeometry, Trap<QuadrupoleField>) {
    let g = ElectrodeGeometry::default_trap();
    let h = rf_null_line(&g, &VoltageSet::new().with("mid1", 1.0).with("mid7", 1.0), &RfNullOptions::default())
        .unwrap();
    (g, Trap::quadrupole(params(), Vector3::new(0.0, h, 0.0), hz(2.5e6)).unwrap())
}

fn magnetron_state(trap: &Trap<QuadrupoleField>, n: f64) -> IonState {
    let (x, v) = epicycle_state(&trap.modes, &ModeAmplitudes::from_quanta(0.0, n, 0.0), trap.params.mass, 0.0);
    IonState::new(trap.center + x, v)
}

#[test]
fn axialization_swap_scales_with_amplitude() {
    let (g, trap) = rf_trap();
    let dt = cyclotron_step(&trap.params, 100.0);
    let mut periods = Vec::new();
    for amp in [0.01, 0.02] {
        let drive = AxializationDrive::outer_pair(amp, trap.modes.omega_c).unwrap();
        let predicted = PI / (2.0 * drive.coupling_rate(&g, &trap).unwrap());
        let series =
            axialization_exchange(&trap, &g, magnetron_state(&trap, 1e4), &drive, 1.5 * predicted, dt, 50).unwrap();
        let (t, frac) = series.peak_transfer().unwrap();
        assert!(frac > 0.99, "incomplete swap {frac}");
        assert!((t / predicted - 1.0).abs() < 0.02, "{t} vs {predicted}");
        // J+ + J- conserved over the swap
        let a0 = series.actions[0].j_plus + series.actions[0].j_minus;
        for a in &series.actions {
            assert!(((a.j_plus + a.j_minus) / a0 - 1.0).abs() < 0.01);
        }
        periods.push(t);
    }
    assert!((periods[0] / periods[1] / 2.0 - 1.0).abs() < 0.05);
}

#[test]
fn zero_amplitude_drive_leaves_actions_alone() {
    let (g, trap) = rf_trap();
    let drive = AxializationDrive::outer_pair(0.0, trap.modes.omega_c).unwrap();
    let dt = cyclotron_step(&trap.params, 100.0);
    let series = axialization_exchange(&trap, &g, magnetron_state(&trap, 1e4), &drive, 30e-6, dt, 100).unwrap();
    for a in &series.actions {
        assert!(a.j_plus / series.actions[0].j_minus < 1e-6);
        assert!((a.j_minus / series.actions[0].j_minus - 1.0).abs() < 1e-6);
    }
}

#[test]
fn detuned_drive_matches_two_mode_oracle() {
    let (g, trap) = rf_trap();
    let amp = 0.02;
    let resonant = AxializationDrive::outer_pair(amp, trap.modes.omega_c).unwrap();
    let coupling = resonant.coupling_rate(&g, &trap).unwrap();
    let delta = 6.0 * coupling;
    let drive = AxializationDrive::outer_pair(amp, trap.modes.omega_c + delta).unwrap();
    let rabi = (coupling * coupling + 0.25 * delta * delta).sqrt();
    let dt = cyclotron_step(&trap.params, 100.0);
    let series =
        axialization_exchange(&trap, &g, magnetron_state(&trap, 1e4), &drive, 1.5 * PI / rabi, dt, 20).unwrap();
    let oracle = coupling * coupling / (rabi * rabi);
    let (t, frac) = series.peak_transfer().unwrap();
    assert!((frac / oracle - 1.0).abs() < 0.05, "{frac} vs {oracle}");
    assert!((t * rabi / (PI / 2.0) - 1.0).abs() < 0.05);
}

#[test]
fn drive_on_dc_electrode_is_rejected() {
    let (g, trap) = rf_trap();
    let drive = AxializationDrive::new(0.01, trap.modes.omega_c, 0.0, VoltageSet::new().with("dcl3", 1.0)).unwrap();
    assert!(axialization_exchange(&trap, &g, magnetron_state(&trap, 1.0), &drive, 1e-6, 1e-9, 1).is_err());
    assert!(AxializationDrive::new(-1.0, 1.0, 0.0, VoltageSet::new()).is_err());
}

fn cooling_laser(s: f64) -> CoolingLaser {
    CoolingLaser::at_angle(PI / 4.0, -0.5 * CYCLING_LINEWIDTH, s).unwrap()
}

fn doppler_opts(initial: [f64; 3], repeats: usize, seed: u64) -> DopplerOptions {
    DopplerOptions { duration: 600e-6, dt: 5e-9, repeats, samples: 6, seed, initial_quanta: initial }
}

#[test]
fn doppler_cooling_with_and_without_axialization() {
    let (g, trap) = rf_trap();
    let drive = AxializationDrive::outer_pair(0.03, trap.modes.omega_c).unwrap();
    let hot = [67.0, 99.0, 44.0];
    let with = doppler_cool(&trap, &cooling_laser(0.1), Some((&g, &drive)), &doppler_opts(hot, 32, 11)).unwrap();
    let (a, b) = (with.initial_mean(), with.final_mean());
    for k in 0..3 {
        assert!(b[k] < 0.5 * a[k], "mode {k}: {a:?} -> {b:?}");
    }
    let without = doppler_cool(&trap, &cooling_laser(0.1), None, &doppler_opts(hot, 32, 11)).unwrap();
    // the positive-energy modes cool at first; the growing magnetron orbit
    // later modulates the scattering and heats them again
    let (a, early, b) = (without.initial_mean(), without.mean_quanta[1], without.final_mean());
    assert!(early[2] < 0.5 * a[2] && early[0] < 0.5 * a[0], "{a:?} -> {early:?}");
    assert!(b[1] > 3.0 * a[1], "magnetron {a:?} -> {b:?}");
    // keeps growing rather than settling
    let series: Vec<f64> = without.mean_quanta.iter().map(|q| q[1]).collect();
    assert!(series.windows(2).skip(1).all(|w| w[1] > w[0]), "{series:?}");
}

#[test]
fn laser_off_is_free_evolution() {
    let trap = quad_trap();
    let mut o = doppler_opts([5.0, 5.0, 5.0], 4, 3);
    o.dt = 1e-9;
    o.duration = 100e-6;
    let r = doppler_cool(&trap, &cooling_laser(0.0), None, &o).unwrap();
    assert_eq!(r.mean_photons, 0.0);
    for (a, b) in r.initial_mean().iter().zip(r.final_mean()) {
        assert!((a / b - 1.0).abs() < 1e-3);
    }
}

#[test]
fn doppler_is_reproducible() {
    let trap = quad_trap();
    let mut o = doppler_opts([20.0, 20.0, 20.0], 6, 42);
    o.duration = 50e-6;
    let a = doppler_cool(&trap, &cooling_laser(0.3), None, &o).unwrap();
    let b = doppler_cool(&trap, &cooling_laser(0.3), None, &o).unwrap();
    assert_eq!(a.final_quanta, b.final_quanta);
    assert_eq!(a.mean_quanta, b.mean_quanta);
    o.seed = 43;
    let c = doppler_cool(&trap, &cooling_laser(0.3), None, &o).unwrap();
    assert_ne!(a.final_quanta, c.final_quanta);
}

#[test]
fn scattering_rate_is_lorentzian() {
    let l = cooling_laser(1.0);
    let on = l.scattering_rate(&Vector3::zeros());
    // Δ = −Γ/2, s = 1: (Γ/2) / (1 + 1 + 1)
    assert!((on / (CYCLING_LINEWIDTH / 6.0) - 1.0).abs() < 1e-12);
    // moving towards the beam by Γ/(2k) brings it onto resonance
    let v = -l.direction * (0.5 * CYCLING_LINEWIDTH / l.wavevector().norm());
    assert!((l.scattering_rate(&v) / (CYCLING_LINEWIDTH / 4.0) - 1.0).abs() < 1e-12);
    assert!(CoolingLaser::new(Vector3::zeros(), 313e-9, 0.0, 1.0, 1.0).is_err());
}

fn species() -> Species {
    Species::beryllium9()
}

fn request(d: Vector3<f64>, duration: f64) -> TransportRequest {
    let start = Vector3::new(0.0, 152e-6, 0.0);
    TransportRequest::new(start, start + d, duration, HessianTarget::symmetric(hz(2.5e6)))
}

#[test]
fn stationary_waveform_is_constant() {
    let g = ElectrodeGeometry::default_trap();
    let wf = make_transport_waveform(&g, &species(), &request(Vector3::zeros(), 100e-6)).unwrap();
    assert!(wf.voltages.iter().all(|v| *v == wf.voltages[0]));
}

#[test]
fn axial_transport_in_300us_is_adiabatic() {
    let g = ElectrodeGeometry::default_trap();
    for d in [Vector3::new(0.0, 0.0, 30e-6), Vector3::new(30e-6, 0.0, 0.0)] {
        let wf = make_transport_waveform(&g, &species(), &request(d, 300e-6)).unwrap();
        let gain = transport_energy_gain(&g, &wf, &params(), 5e-9).unwrap();
        assert!(gain.iter().all(|q| *q < 0.1), "{gain:?}");
    }
}

#[test]
fn gain_falls_with_duration() {
    let g = ElectrodeGeometry::default_trap();
    let period = 2.0 * PI / hz(2.5e6);
    let mut last = f64::INFINITY;
    for k in [2.0, 4.0, 8.0, 16.0, 32.0] {
        let mut req = request(Vector3::new(0.0, 0.0, 30e-6), k * period);
        req.knots = 81;
        let wf = make_transport_waveform(&g, &species(), &req).unwrap();
        let gain = transport_energy_gain(&g, &wf, &params(), 2e-9).unwrap()[2];
        assert!(gain < last, "duration {k} periods: {gain} after {last}");
        last = gain;
    }
}

#[test]
fn step_displacement_matches_displaced_oscillator() {
    let g = ElectrodeGeometry::default_trap();
    let p = params();
    let d = 0.5e-6;
    let mut req = request(Vector3::new(0.0, 0.0, d), 2e-6);
    req.profile = Profile::Step;
    let wf = make_transport_waveform(&g, &species(), &req).unwrap();
    let gain = transport_energy_gain(&g, &wf, &p, 1e-9).unwrap();
    let wz = hz(2.5e6);
    let analytic = 0.5 * p.mass * wz * wz * d * d / (1.054571817e-34 * wz);
    assert!((gain[2] / analytic - 1.0).abs() < 0.01, "{} vs {analytic}", gain[2]);
}

#[test]
fn unreachable_knot_is_named() {
    let g = ElectrodeGeometry::default_trap();
    let mut req = request(Vector3::new(0.0, 0.0, 600e-6), 100e-6);
    req.knots = 5;
    match make_transport_waveform(&g, &species(), &req) {
        Err(Error::TransportKnot { knot, .. }) => assert!(knot > 0),
        other => panic!("expected a knot error, got {other:?}"),
    }
}

#[test]
fn logo_waypoints_are_reachable() {
    let g = ElectrodeGeometry::default_trap();
    let s = RasterSchedule::logo();
    let corners: Vec<Vector3<f64>> = s
        .waypoints
        .iter()
        .filter(|p| (p.x - s.origin.x).abs() > 19e-6 && (p.z - s.origin.z).abs() > 37e-6)
        .copied()
        .collect();
    assert!(!corners.is_empty());
    let sub = RasterSchedule { waypoints: corners, ..s.clone() };
    let wfs = sub
        .outbound_waveforms(&g, &species(), HessianTarget::symmetric(hz(2.5e6)), 9, &SolveOptions::default())
        .unwrap();
    for wf in wfs {
        assert!((wf.duration() - 4e-3).abs() < 1e-15);
    }
    let _ = ModeSet::new(&params(), hz(2.5e6)).unwrap();
}
