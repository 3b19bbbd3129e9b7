"""Smoke test for the penning_trap extension module.

Build and install first:
    pip install --no-build-isolation -e crates/py
then run:
    python python/smoke_test.py
"""

import math

import penning_trap as pt


def close(a, b, rel):
    return abs(a / b - 1.0) <= rel


def main():
    two_pi = 2.0 * math.pi
    be = pt.Species.by_name("be9")

    m = pt.ModeSet(3.0, two_pi * 2.5e6, be)
    f = m.frequencies_hz()
    assert close(f["omega_c"], 5.12e6, 0.005), f
    assert close(f["omega_plus"], 4.41e6, 0.01), f
    assert close(f["omega_minus"], 0.71e6, 0.01), f
    assert abs(m.omega_plus + m.omega_minus - m.omega_c) < 1e-9 * m.omega_c
    print(m)

    value, dim = pt.parse_quantity("2.5 MHz")
    assert dim == "frequency" and close(value, two_pi * 2.5e6, 1e-12)
    assert pt.parse_quantity("3 T")[1] == "magnetic_field"
    try:
        pt.ModeSet(3.0, two_pi * 4e6)
    except ValueError as e:
        print("unstable trap rejected:", e)
    else:
        raise AssertionError("expected a stability error")

    dk = pt.raman_wavevector_difference(math.pi / 2)
    eta = m.lamb_dicke(dk, "axial")
    assert abs(eta - 0.43) < 0.01, eta
    rabi = two_pi * 8e3
    t1 = pt.pi_time(0, 1, eta, rabi)
    print(f"eta_z = {eta:.4f}, first-sideband pi time {t1 * 1e6:.0f} us")

    d = pt.FockDistribution.thermal(0.05)
    lower = d.excitation_probability(-1, t1, eta, rabi)
    raise_ = d.excitation_probability(1, t1, eta, rabi)
    assert close(pt.sideband_ratio_thermometry(lower, raise_), 0.05, 1e-6)

    t = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    slope, slope_err, _, _ = pt.heating_fit(t, [0.02 + 0.088 * x for x in t], [0.05] * 6)
    assert close(slope, 0.088, 1e-9)
    s_e = pt.electric_field_noise(0.088, two_pi * 2.5e6, be)
    assert close(s_e, 3.4e-16, 0.03), s_e

    qs = pt.NoiseModel.quasi_static(math.sqrt(2) / 1.9e-3)
    c = qs.coherence("ramsey", [1.9e-3])[0]
    assert close(c, math.exp(-1), 1e-6), c
    t_echo = pt.NoiseModel.ornstein_uhlenbeck(30.0, 0.5).coherence_time("echo", 10.0)
    print(f"OU echo 1/e time {t_echo * 1e3:.1f} ms")

    ladder = pt.LadderNetwork.detachment_ladder()
    assert ladder.isolation_db(5e6) > 180.0
    leak, bridge, fitted = ladder.fit_parasitics()
    assert abs(fitted.isolation_db(0.0) - 83.0) < 1.0
    assert abs(fitted.isolation_db(5e6) - 77.0) < 1.0
    print(f"fitted switch leakage {leak:.3e} ohm, bridge {bridge * 1e12:.4f} pF")

    print("penning_trap", pt.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
