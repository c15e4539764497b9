import numpy as np
import pytest

from rfppv import asymptotics as asy
from rfppv import experiments as exp
from rfppv.errors import BinMismatch, DegenerateDenominator
from rfppv.simulator import SimulationConfig

SMALL = SimulationConfig(d=20, n=60, n_features=40, lam=1e-2, tau_sq=0.2, n_test=200)


class TestSweep:
    def test_single_point(self):
        spec = exp.SweepSpec(SMALL, "n_features", (40,), 1, 9)
        a, b = exp.run_sweep(spec), exp.run_sweep(spec)
        assert len(a) == 1
        assert a[0].samples[0].as_tuple() == b[0].samples[0].as_tuple()
        assert a[0].psi1 == pytest.approx(2.0)

    def test_threads_invariant(self):
        spec = exp.SweepSpec(SMALL, "n_features", (20, 60, 120), 5, 3)
        one = exp.run_sweep(spec, threads=1)
        four = exp.run_sweep(spec, threads=4)
        for r1, r4 in zip(one, four):
            assert [s.as_tuple() for s in r1.samples] == [s.as_tuple() for s in r4.samples]

    def test_common_random_numbers(self):
        spec = exp.SweepSpec(SMALL, "lam", (1e-3, 1e-1), 3, 4)
        recs = exp.run_sweep(spec)
        # same data for every grid point, so y variance is shared
        np.testing.assert_array_equal([s.y_var for s in recs[0].samples],
                                      [s.y_var for s in recs[1].samples])

    def test_boundary_and_limits(self, relu_coeffs):
        spec = exp.SweepSpec(SMALL, "n_features", (60, 6000), 2, 0)
        recs = exp.run_sweep(spec, relu_coeffs)
        assert recs[0].boundary and not recs[1].boundary
        assert recs[0].risk_limit is None and recs[1].risk_limit is not None
        lim = asy.ppv_limit(asy.ModelParams(tau_sq=0.2), asy.ShapeRatios(3, 3),
                            relu_coeffs, 1e-2)
        assert recs[0].ppv_limit == pytest.approx(lim)

    def test_bad_axis(self):
        with pytest.raises(ValueError):
            exp.SweepSpec(SMALL, "d", (10,), 1, 0)


class TestRatioCurve:
    def test_degenerate(self, relu_coeffs):
        with pytest.raises(DegenerateDenominator):
            exp.ratio_curve(relu_coeffs, asy.ModelParams(f1_sq=0.0, tau_sq=1.0), "psi1",
                            [1000])

    def test_wide_points(self, relu_coeffs):
        p = asy.ModelParams(f1_sq=1.0, tau_sq=0.2)
        pts = exp.ratio_curve(relu_coeffs, p, "psi1", [100, 1e4])
        assert all(pt.lambda_source == "zero" and pt.ratio < 1 for pt in pts)

    def test_high_noise_approaches_one(self, relu_coeffs):
        p = asy.ModelParams(f1_sq=1.0, tau_sq=5.0)
        pt, = exp.ratio_curve(relu_coeffs, p, "psi1", [1e4])
        assert pt.lambda_source == "lambda_opt"
        np.testing.assert_allclose(pt.ratio, 1.0, rtol=1e-3)

    def test_large_sample_axis(self, relu_coeffs):
        p = asy.ModelParams(f1_sq=1.0, tau_sq=0.2)
        pt, = exp.ratio_curve(relu_coeffs, p, "psi2", [1e4], fixed_other=2.0)
        np.testing.assert_allclose(pt.ratio, 1.0, rtol=1e-3)

    def test_empirical_point(self, relu_coeffs):
        s = exp.RatioSettings(d=20, replications=2, lambda_grid=(1e-3, 1e-1, 1.0),
                              n_test=200)
        p = asy.ModelParams(f1_sq=1.0, tau_sq=0.2)
        pt, = exp.ratio_curve(relu_coeffs, p, "psi1", [2.0], settings=s)
        assert pt.lambda_source == "tuned" and pt.lam in s.lambda_grid
        assert pt.risk > 0


class TestJarqueBera:
    def test_gaussian_screen(self):
        rng = np.random.default_rng(0)
        passed = sum(exp.fluctuation_report(rng.standard_normal(2000), "synthetic", 1).jb
                     < exp.JB_CUTOFF_99 for _ in range(100))
        assert passed >= 95

    def test_self_calibration(self):
        rate = exp.jb_rejection_rate(10_000, 2000, seed=1)
        assert abs(rate - 0.01) <= 0.01

    def test_skewed_rejected(self):
        x = np.random.default_rng(0).exponential(size=2000)
        assert exp.jarque_bera(x)[0] > exp.JB_CUTOFF_99


class TestHistograms:
    def test_probabilities(self):
        x = np.random.default_rng(2).standard_normal(777)
        rep = exp.fluctuation_report(x, "risk", 10, exp.common_bins(x, bins=13))
        np.testing.assert_allclose(rep.probabilities.sum(), 1.0, atol=1e-12)
        assert rep.counts.sum() == 777

    def test_overlap_extremes(self):
        x = np.random.default_rng(3).standard_normal(500)
        edges = exp.common_bins(x, x + 100)
        a = exp.fluctuation_report(x, "a", 1, edges)
        b = exp.fluctuation_report(x + 100, "b", 1, edges)
        assert exp.overlap(a, a) == pytest.approx(1.0)
        assert exp.overlap(a, b) == 0.0

    def test_bin_mismatch(self):
        x = np.arange(10.0)
        a = exp.fluctuation_report(x, "a", 1, np.linspace(0, 9, 4))
        b = exp.fluctuation_report(x, "b", 1, np.linspace(0, 9, 5))
        with pytest.raises(BinMismatch):
            exp.overlap(a, b)


class TestFluctuation:
    def test_reproducible(self):
        cfg = SMALL.with_(n_features=30)
        a = exp.fluctuation_study(cfg, "risk", 500, 7)
        b = exp.fluctuation_study(cfg, "risk", 500, 7, threads=3)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.counts, b.counts)
        assert a.jb == b.jb

    def test_minimum_replications(self):
        with pytest.raises(ValueError):
            exp.fluctuation_study(SMALL, "risk", 100, 0)

    def test_paired_sampling(self):
        cfg = SMALL.with_(n_features=30)
        same = exp.collect(cfg, 300, 0)
        other = exp.collect(cfg, 300, 1)
        paired = np.var([s.risk - s.ppv for s in same])
        indep = np.var([s.risk - o.ppv for s, o in zip(same, other)])
        assert paired < indep

    def test_variance_ordering_duplicates(self):
        cfg = SimulationConfig(d=10, n=30, n_features=60, lam=1e-2, tau_sq=0.2, n_test=100)
        rows = exp.variance_ordering([cfg, cfg], 1000, 0, threads=4)
        assert rows[0] == rows[1]
        lo, hi = exp.SAME_ORDER_BOUNDS
        assert rows[0].same_order == (lo <= rows[0].ratio <= hi)
