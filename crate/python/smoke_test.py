"""Smoke test for the quadvar extension module.

Build and install first:  pip install --no-build-isolation -e crates/python
"""
import math

import quadvar


def close(a, b, tol):
    return abs(a - b) <= tol * abs(b)


def main():
    iid = quadvar.CovarianceModel.iid()
    for n in (8, 64, 1024):
        assert close(quadvar.kappa3_exact(iid, n), 2 ** 1.5 / math.sqrt(n), 1e-12)
        assert close(quadvar.kappa4_exact(iid, n), 12 / n, 1e-12)

    fgn = quadvar.CovarianceModel.fgn(0.7)
    engine = quadvar.CumulantEngine(fgn, 4096)
    row = engine.report(4096)
    assert row["kappa3_lower"] <= row["kappa3"] <= row["kappa3_upper"]
    assert fgn.rho(3) == fgn.rho(-3)

    regime = quadvar.classify_rate("3/4", "0")
    assert regime["regime"] == "H34Log", regime
    scan = quadvar.commensurability_scan(fgn, "0.7", "0", quadvar.geometric_grid(256, 4096, 2))
    assert scan["band_factor"] < 10

    values = quadvar.sample_fn(iid, 64, 20000, seed=1)
    assert values == quadvar.sample_fn(iid, 64, 20000, seed=1, workers=2)
    stats = quadvar.empirical_stats(values)
    assert abs(stats["kappa3"] - 2 ** 1.5 / 8) < 4 * stats["se_kappa3"], stats

    approx = quadvar.RosenblattApproximant(0.85, 64)
    assert abs(approx.variance() - 1) < 1e-12
    assert approx.kappa3() > 0 and len(approx.sample(10, 3)) == 10

    terms = quadvar.tv_bound(0.85, 1.0, [256, 512])
    assert all(t[1] > 0 and t[2] > 0 and t[3] > 0 for t in terms)

    try:
        quadvar.CovarianceModel.fgn(1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("H = 1.5 accepted")

    print(f"quadvar {quadvar.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
