use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use penning::modes::{ModeSet, MotionalMode, TrapParams};
use penning::sideband::*;
use penning::units::{hz, Species, BEAM_WAVELENGTH};
use penning::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn be() -> TrapParams {
    TrapParams::new(3.0, Species::beryllium9()).unwrap()
}

fn axial_modes(fz: f64) -> ModeSet {
    ModeSet::new(&be(), hz(fz)).unwrap()
}

fn crossed_dk() -> f64 {
    raman_wavevector_difference(FRAC_PI_2, BEAM_WAVELENGTH)
}

fn axial_eta() -> f64 {
    lamb_dicke(crossed_dk(), be().mass, &axial_modes(2.5e6), MotionalMode::Axial).unwrap().eta
}

/// |⟨m| exp(iη(a + a†)) |n⟩| from a truncated matrix exponential.
fn displacement_elements(eta: f64, dim: usize) -> DMatrix<f64> {
    let mut x = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim - 1 {
        let v = ((k + 1) as f64).sqrt();
        x[(k, k + 1)] = v;
        x[(k + 1, k)] = v;
    }
    let eig = SymmetricEigen::new(x);
    let (v, l) = (eig.eigenvectors, eig.eigenvalues);
    DMatrix::from_fn(dim, dim, |m, n| {
        let (mut re, mut im) = (0.0, 0.0);
        for j in 0..dim {
            let w = v[(m, j)] * v[(n, j)];
            re += w * (eta * l[j]).cos();
            im += w * (eta * l[j]).sin();
        }
        re.hypot(im)
    })
}

#[test]
fn lamb_dicke_of_crossed_beams() {
    // η = √2 k √(ħ / 2mωz), evaluated directly
    let hbar = 1.054_571_817e-34;
    let m = 9.012_182 * 1.660_539_066_60e-27;
    let k = 2.0 * PI / 313e-9;
    let expect = 2f64.sqrt() * k * (hbar / (2.0 * m * 2.0 * PI * 2.5e6)).sqrt();
    let eta = axial_eta();
    assert!((eta - expect).abs() < 1e-12 * expect);
    assert!((eta - 0.43).abs() < 0.01, "η = {eta}");

    let zero = lamb_dicke(0.0, m, &axial_modes(2.5e6), MotionalMode::Axial).unwrap();
    assert_eq!(zero.eta, 0.0);

    let quad = ModeSet::from_frequencies(hz(10e6), hz(40e6)).unwrap();
    let base = ModeSet::from_frequencies(hz(2.5e6), hz(40e6)).unwrap();
    let r = lamb_dicke(1e7, m, &quad, MotionalMode::Axial).unwrap().eta
        / lamb_dicke(1e7, m, &base, MotionalMode::Axial).unwrap().eta;
    assert!((r - 0.5).abs() < 1e-12);
}

#[test]
fn radial_lamb_dicke_uses_mode_splitting() {
    let modes = axial_modes(2.5e6);
    let hbar = 1.054_571_817e-34;
    let m = be().mass;
    let expect = crossed_dk() * (hbar / (2.0 * m * (modes.omega_plus - modes.omega_minus))).sqrt();
    for which in [MotionalMode::Plus, MotionalMode::Minus] {
        let ld = lamb_dicke(crossed_dk(), m, &modes, which).unwrap();
        assert!((ld.eta - expect).abs() < 1e-12 * expect);
    }
}

#[test]
fn unstable_modes_rejected() {
    let bad = ModeSet {
        omega_z: hz(4e6),
        omega_plus: hz(2.56e6),
        omega_minus: -1.0,
        omega_c: hz(5.12e6),
    };
    assert!(matches!(
        lamb_dicke(crossed_dk(), be().mass, &bad, MotionalMode::Axial),
        Err(Error::Unstable { .. })
    ));
}

#[test]
fn couplings_match_displacement_operator() {
    let eta = 0.43;
    let d = displacement_elements(eta, 120);
    for n in 0..30 {
        for s in [-3i64, -2, -1, 0, 1, 2, 3] {
            let m = n as i64 + s;
            if m < 0 {
                assert_eq!(rabi_coupling(n, s, eta, 1.0), 0.0);
                continue;
            }
            let got = rabi_coupling(n, s, eta, 1.0).abs();
            let want = d[(m as usize, n)];
            assert!((got - want).abs() < 1e-10, "n={n} s={s}: {got} vs {want}");
        }
    }
}

#[test]
fn carrier_without_recoil_is_bare_rabi() {
    assert_eq!(rabi_coupling(0, 0, 0.0, 123.0), 123.0);
    assert_eq!(rabi_coupling(7, 0, 0.0, 123.0), 123.0);
}

#[test]
fn pi_times_of_large_eta_sidebands() {
    let eta = axial_eta();
    let w0 = hz(8e3);
    for (s, published) in [(0, 62e-6), (1, 145e-6), (3, 2000e-6)] {
        let t = pi_time(0, s, eta, w0);
        assert!((t / published - 1.0).abs() < 0.2, "s = {s}: {t:e} s");
    }
}

#[test]
fn blue_sideband_cannot_be_driven_from_ground() {
    let eta = axial_eta();
    let w0 = hz(8e3);
    let g = FockDistribution::ground();
    let t = pi_time(1, -1, eta, w0);
    let blue = Pulse::new(MotionalMode::Axial, 1, t).unwrap();
    let red = Pulse::new(MotionalMode::Axial, -1, t).unwrap();
    assert_eq!(excitation_probability(&g, blue.quantum_change(), t, eta, w0), 0.0);
    assert!(excitation_probability(&g, red.quantum_change(), t, eta, w0) > 0.5);
    // for the negative-energy magnetron mode the roles swap
    let blue = Pulse::new(MotionalMode::Minus, 1, t).unwrap();
    let red = Pulse::new(MotionalMode::Minus, -1, t).unwrap();
    assert_eq!(excitation_probability(&g, red.quantum_change(), t, eta, w0), 0.0);
    assert!(excitation_probability(&g, blue.quantum_change(), t, eta, w0) > 0.5);
}

#[test]
fn pi_pulse_empties_first_excited_level() {
    let eta = axial_eta();
    let w0 = hz(8e3);
    let p = Pulse::new(MotionalMode::Axial, 1, pi_time(1, -1, eta, w0)).unwrap();
    let out = apply_pulse(&FockDistribution::fock(1), &p, eta, w0);
    assert!((out.probs()[0] - 1.0).abs() < 1e-12);
    assert!(out.probs()[1].abs() < 1e-12);
    assert_eq!(out.spin_up, 1.0);

    let zero = Pulse::new(MotionalMode::Axial, 1, 0.0).unwrap();
    let th = FockDistribution::thermal(3.0).unwrap();
    assert_eq!(apply_pulse(&th, &zero, eta, w0), th);
}

#[test]
fn probe_without_repump_keeps_spin_population() {
    let eta = axial_eta();
    let w0 = hz(8e3);
    let th = FockDistribution::thermal(2.0).unwrap();
    let t = 90e-6;
    let p = excitation_probability(&th, -1, t, eta, w0);
    let out = transfer(&th, -1, t, eta, w0, false);
    assert!((out.spin_up - (1.0 - p)).abs() < 1e-12);
}

#[test]
fn raising_pulses_extend_the_truncation() {
    let d = FockDistribution::fock(128);
    assert_eq!(d.truncation(), 128);
    let out = transfer(&d, 3, 1e-3, 0.4, hz(8e3), true);
    assert!(out.truncation() >= 131);
    assert!(out.tail() < 1e-6);
    assert!((out.total() - 1.0).abs() < 1e-12);
}

#[test]
fn thermal_state_heats_linearly_and_stays_thermal() {
    let d = FockDistribution::thermal(0.5).unwrap();
    let out = heat(&d, 3.8, 0.5);
    let n = 0.5 + 3.8 * 0.5;
    assert!((out.mean() - n).abs() < 1e-6 * n, "{}", out.mean());
    let q = n / (n + 1.0);
    for k in 0..40 {
        let want = (1.0 - q) * q.powi(k as i32);
        assert!((out.probs()[k] - want).abs() < 1e-7, "level {k}");
    }
    assert!(out.tail() < 1e-6);
    assert!((out.total() - 1.0).abs() < 1e-9);
}

#[test]
fn strong_heating_grows_truncation() {
    let d = FockDistribution::thermal(1.0).unwrap();
    let out = heat(&d, 40.0, 1.0);
    assert!(out.truncation() > 128);
    assert!(out.tail() < 1e-6);
    assert!((out.mean() - 41.0).abs() < 1e-3 * 41.0);
}

fn shipped_start() -> [FockDistribution; 3] {
    [6.7, 9.9, 4.4].map(|n| FockDistribution::thermal(n).unwrap())
}

fn etas() -> [f64; 3] {
    let modes = axial_modes(2.5e6);
    MotionalMode::ALL.map(|m| lamb_dicke(crossed_dk(), be().mass, &modes, m).unwrap().eta)
}

#[test]
fn shipped_schedule_reaches_ground_state() {
    let sched = CoolingSchedule::shipped();
    assert!(sched.pulses.iter().any(|p| p.order.abs() == 3));
    assert!(sched.pulses.iter().any(|p| p.order.abs() == 1));
    let r = sideband_cool(&shipped_start(), &sched, etas(), hz(8e3), [0.49, 3.8, 0.088], 60e-3).unwrap();
    let f = r.final_mean();
    assert!(f[2] <= 0.01, "n̄z = {}", f[2]);
    assert_eq!(*r.times.last().unwrap(), 60e-3);
    for d in &r.state {
        assert!((d.total() - 1.0).abs() < 1e-9);
        assert!(d.tail() < 1e-6);
    }
}

#[test]
fn empty_schedule_only_heats() {
    let sched = CoolingSchedule::new(vec![], 0.0).unwrap();
    let start = shipped_start();
    let r = sideband_cool(&start, &sched, etas(), hz(8e3), [0.49, 3.8, 0.088], 60e-3).unwrap();
    let f = r.final_mean();
    for (k, rate) in [0.49, 3.8, 0.088].into_iter().enumerate() {
        let n0 = start[k].mean();
        assert!((f[k] - (n0 + rate * 60e-3)).abs() < 1e-6, "mode {k}: {} vs {}", f[k], n0 + rate * 60e-3);
    }
    assert_eq!(r.pulses_applied, 0);
}

#[test]
fn third_sideband_speeds_up_cooling() {
    let eta = etas();
    let w0 = hz(8e3);
    let start = [0.0, 0.0, 10.0].map(|n| FockDistribution::thermal(n).unwrap());
    let first = CoolingSchedule::new(vec![Pulse::new(MotionalMode::Axial, 1, 120e-6).unwrap(); 2], 10e-6).unwrap();
    let mixed = CoolingSchedule::new(
        vec![
            Pulse::new(MotionalMode::Axial, 3, 200e-6).unwrap(),
            Pulse::new(MotionalMode::Axial, 1, 120e-6).unwrap(),
        ],
        10e-6,
    )
    .unwrap();
    let budget = 10e-3;
    let a = sideband_cool(&start, &first, eta, w0, [0.0; 3], budget).unwrap().final_mean()[2];
    let b = sideband_cool(&start, &mixed, eta, w0, [0.0; 3], budget).unwrap().final_mean()[2];
    assert!(b < 0.5 * a, "first only {a}, mixed {b}");
}

#[test]
fn heating_sidebands_are_rejected() {
    let bad = CoolingSchedule::new(vec![Pulse::new(MotionalMode::Axial, -1, 1e-4).unwrap()], 0.0);
    assert!(matches!(bad, Err(Error::InvalidParameter(_))));
    let bad = CoolingSchedule::new(vec![Pulse::new(MotionalMode::Minus, 3, 1e-4).unwrap()], 0.0);
    assert!(bad.is_err());
    let text = "[[pulse]]\nmode = \"minus\"\nsideband = \"blue\"\norder = 1\nduration = \"100 us\"\n";
    assert!(CoolingSchedule::from_toml_str(text).is_err());
}

#[test]
fn schedule_text_round_trip() {
    let s = CoolingSchedule::shipped();
    let back = CoolingSchedule::from_toml_str(&s.to_toml_string()).unwrap();
    assert_eq!(back.pulses.len(), s.pulses.len());
    for (a, b) in back.pulses.iter().zip(&s.pulses) {
        assert_eq!((a.mode, a.order), (b.mode, b.order));
        assert!((a.duration - b.duration).abs() < 1e-15);
    }
    let rep = CoolingSchedule::from_toml_str(
        "repump = \"5 us\"\n[[pulse]]\nmode = \"z\"\nsideband = \"blue\"\norder = 3\nduration = \"0.2 ms\"\nrepeat = 4\n",
    )
    .unwrap();
    assert_eq!(rep.pulses.len(), 4);
    assert!((rep.cycle_duration() - 4.0 * 205e-6).abs() < 1e-15);
}

#[test]
fn thermometry_basics() {
    assert_eq!(sideband_ratio_thermometry(0.0, 0.4).unwrap(), 0.0);
    assert!(matches!(sideband_ratio_thermometry(0.5, 0.4), Err(Error::RatioNotThermal(_))));
    assert!(sideband_ratio_thermometry(1.2, 0.4).is_err());
    let (n, s) = thermometry_uncertainty(0.1, 0.4, 200).unwrap();
    assert!((n - 1.0 / 3.0).abs() < 1e-12 && s > 0.0);
}

#[test]
fn thermometry_round_trip_through_probes() {
    let eta = axial_eta();
    let w0 = hz(8e3);
    let t = pi_time(0, 1, eta, w0);
    for n in [0.007, 0.05, 1.0] {
        let d = FockDistribution::thermal(n).unwrap();
        let lower = excitation_probability(&d, -1, t, eta, w0);
        let raise = excitation_probability(&d, 1, t, eta, w0);
        let est = sideband_ratio_thermometry(lower, raise).unwrap();
        assert!((est - n).abs() <= (0.1 * n).max(0.005), "{n}: {est}");
        assert!((est - n).abs() < 1e-6 * n.max(1e-3));
    }
}

#[test]
fn noisy_thermometry_at_the_ground_state() {
    // projection noise with 10⁵ shots per sideband stays inside the quoted 0.003
    let eta = axial_eta();
    let w0 = hz(8e3);
    let t = pi_time(0, 1, eta, w0);
    let d = FockDistribution::thermal(0.007).unwrap();
    let lower = excitation_probability(&d, -1, t, eta, w0);
    let raise = excitation_probability(&d, 1, t, eta, w0);
    let (_, sigma) = thermometry_uncertainty(lower, raise, 100_000).unwrap();
    assert!(sigma < 0.003, "σ = {sigma}");
}

fn line(slope: f64, span: f64, sigma: f64) -> Vec<HeatingSample> {
    (0..6)
        .map(|k| {
            let t = span * k as f64 / 5.0;
            HeatingSample {
                t_wait: t,
                n_bar: 0.02 + slope * t,
                sigma,
            }
        })
        .collect()
}

#[test]
fn heating_fit_exact_lines() {
    for (slope, span) in [(0.49, 2.0), (3.8, 0.5), (0.088, 5.0)] {
        let f = heating_fit(&line(slope, span, 0.0)).unwrap();
        assert!((f.slope - slope).abs() < 1e-12, "{slope}: {}", f.slope);
        assert!((f.intercept - 0.02).abs() < 1e-12);
        assert!(f.slope_err < 1e-12);
    }
    let flat = heating_fit(&line(0.0, 1.0, 0.01)).unwrap();
    assert_eq!(flat.slope, 0.0);
}

#[test]
fn heating_fit_rejects_bad_input() {
    let same: Vec<_> = (0..4)
        .map(|k| HeatingSample {
            t_wait: 0.3,
            n_bar: k as f64,
            sigma: 0.1,
        })
        .collect();
    assert!(matches!(heating_fit(&same), Err(Error::Fit(_))));
    assert!(heating_fit(&line(1.0, 1.0, 0.1)[..2]).is_err());
}

#[test]
fn heating_fit_coverage() {
    for (slope, span) in [(0.49, 2.0), (3.8, 0.5), (0.088, 5.0)] {
        let truth = line(slope, span, 0.0);
        let mut hits = 0;
        let total = 100_000u64;
        for seed in 0..total {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<_> = truth
                .iter()
                .map(|s| {
                    let sigma = 0.05 + 0.1 * s.n_bar;
                    HeatingSample {
                        n_bar: s.n_bar + Normal::new(0.0, sigma).unwrap().sample(&mut rng),
                        sigma,
                        ..*s
                    }
                })
                .collect();
            let f = heating_fit(&data).unwrap();
            if (f.slope - slope).abs() <= 2.0 * f.slope_err {
                hits += 1;
            }
        }
        // nominal 95.45 %; the binomial spread at this sample size is 0.07 %
        let c = hits as f64 / total as f64;
        assert!((0.95..0.96).contains(&c), "slope {slope}: coverage {c}");
    }
}

#[test]
fn field_noise_from_heating_rate() {
    let be = Species::beryllium9();
    let s = electric_field_noise(0.088, hz(2.5e6), be.mass, be.charge);
    assert!((s / 3.4e-16 - 1.0).abs() < 0.03, "S_E = {s:e}");
    assert_eq!(electric_field_noise(0.0, hz(2.5e6), be.mass, be.charge), 0.0);
    let detached = electric_field_noise(0.10, hz(2.5e6), be.mass, be.charge);
    assert!((detached / s - 0.10 / 0.088).abs() < 1e-12);
    let back = heating_rate_from_noise(s, hz(2.5e6), be.mass, be.charge);
    assert!((back - 0.088).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn couplings_are_symmetric(n in 0usize..60, s in -3i64..=3, eta in 0.01f64..0.8) {
        prop_assume!(n as i64 + s >= 0);
        let m = (n as i64 + s) as usize;
        let a = rabi_coupling(n, s, eta, 1.0);
        let b = rabi_coupling(m, -s, eta, 1.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
    }

    #[test]
    fn lamb_dicke_regime_limit(n in 0usize..20, eta in 1e-4f64..0.05) {
        let exact = rabi_coupling(n, 1, eta, 1.0);
        let approx = eta * ((n + 1) as f64).sqrt();
        let rel = (exact / approx - 1.0).abs();
        prop_assert!(rel < eta * eta * (n + 1) as f64);
        if n == 0 {
            prop_assert!(rel < eta * eta);
        }
    }

    #[test]
    fn thermal_detailed_balance(n_bar in 0.0f64..30.0) {
        let d = FockDistribution::thermal(n_bar).unwrap();
        let q = n_bar / (n_bar + 1.0);
        for k in 0..20 {
            let (a, b) = (d.probs()[k], d.probs()[k + 1]);
            prop_assert!((b - q * a).abs() <= 1e-12 * a.max(1e-300));
        }
        prop_assert!((d.total() - 1.0).abs() < 1e-9);
        prop_assert!(d.tail() < 1e-6);
    }

    #[test]
    fn pulses_and_heating_conserve_probability(
        n_bar in 0.0f64..15.0,
        ops in prop::collection::vec((-3i64..=3, 0.0f64..3e-3, 0.0f64..5.0), 1..12),
    ) {
        let eta = 0.43;
        let w0 = hz(8e3);
        let mut d = FockDistribution::thermal(n_bar).unwrap();
        for (dn, t, rate) in ops {
            d = transfer(&d, dn, t, eta, w0, true);
            prop_assert!((d.total() - 1.0).abs() < 1e-9);
            d = heat(&d, rate, t);
            prop_assert!((d.total() - 1.0).abs() < 1e-9);
            prop_assert!(d.tail() < 1e-6);
            prop_assert!(d.probs().iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn cooling_without_heating_never_raises_occupation(
        n_bar in 0.0f64..12.0,
        pulses in prop::collection::vec((prop::sample::select(vec![1i64, 3]), 1e-6f64..2e-3), 1..10),
    ) {
        let eta = [0.35, 0.35, 0.43];
        let start = [0.0, n_bar, n_bar].map(|n| FockDistribution::thermal(n).unwrap());
        let list: Vec<Pulse> = pulses
            .iter()
            .flat_map(|&(o, t)| {
                [Pulse::new(MotionalMode::Axial, o, t).unwrap(), Pulse::new(MotionalMode::Minus, -o, t).unwrap()]
            })
            .collect();
        let sched = CoolingSchedule::new(list, 0.0).unwrap();
        let r = sideband_cool(&start, &sched, eta, hz(8e3), [0.0; 3], sched.cycle_duration()).unwrap();
        for w in r.mean_quanta.windows(2) {
            for (after, before) in w[1].iter().zip(&w[0]).skip(1) {
                prop_assert!(*after <= before + 1e-12);
            }
        }
    }
}
