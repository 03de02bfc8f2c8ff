"""Quick check that the extension module loads and agrees with known values.

Build first:  pip install --no-build-isolation ./crates/python
"""
import math

import cbe


def main():
    p = cbe.EnsembleParams(10, 2.0)
    assert abs(p.log_laplace(2.0) - math.log(11.0)) < 1e-10
    assert p.log_laplace(0.0) == 0.0
    # mean zero, variance ln N / beta to leading order
    assert abs(p.log_laplace(0.0, 1)) < 1e-12
    assert 0 < p.log_laplace(0.0, 2) < 2 * math.log(10) / 2

    try:
        cbe.EnsembleParams(10, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative beta accepted")

    t = cbe.solve_tilt(16, 2.0, 3.0)
    assert abs(cbe.EnsembleParams(16, 2.0).log_laplace(t.h, 1) - 3.0) < 1e-9

    regime, _ = cbe.classify_regime(1_000_000, 2.0, 500.0)
    assert regime == "TrueModerate", regime
    tm = cbe.estimate(1_000_000, 2.0, 500.0, "true_moderate")
    sc = cbe.estimate(1_000_000, 2.0, 500.0, "scheme")
    assert abs(tm.log_probability - sc.log_probability) < 1.0

    _, _, rate, hko = cbe.rate_curve_row(0.5, 2.0)
    assert abs(rate - hko) < 1e-6 * hko

    ld = cbe.large_dev(64, 2.0, 0.3)
    assert ld.l2_star is not None and ld.bound.probability < 1.0

    batch = cbe.mcmc_sample(cbe.EnsembleParams(4, 2.0), samples=2000, burn=200, seed=3)
    assert len(batch) == 2000
    again = cbe.mcmc_sample(cbe.EnsembleParams(4, 2.0), samples=2000, burn=200, seed=3)
    assert batch.values == again.values

    exact = cbe.brute_force_tail(2, 2.0, 0.0, 1.0)
    prob, se, _ = cbe.tail_estimate_tilted(2, 2.0, 1.0, samples=20_000, seed=1)
    assert abs(prob - exact) < 5 * se + 1e-3, (prob, exact, se)

    checks = cbe.validate(quick=True)
    assert all(status != "FAIL" for _, _, status, _ in checks)
    assert any(status == "FAIL" for _, _, status, _ in cbe.validate(quick=True, inject_fault=True))
    print("python smoke test passed")


if __name__ == "__main__":
    main()
