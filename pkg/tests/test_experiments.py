import csv

import numpy as np
import pytest

from varexp.concentration import smooth_bump
from varexp.experiments import (continuity_experiment, dilation_check,
                                reapply_criterion, scaling_limit_experiment,
                                subcritical_ball_experiment,
                                theorem61_experiment, write_csv)
from varexp.exponents import ExponentField
from varexp.grid import ball, interval, rectangle
from varexp.sobolev import talenti_constant


def _reload_rows(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: float(v) for k, v in row.items()} for row in reader]


def _roundtrip_verdict(result, tmp_path):
    path = write_csv(result, tmp_path / f"{result.name}.csv")
    rows = _reload_rows(path)
    assert reapply_criterion(result.name, rows) == result.verdict
    assert str(path) in result.artifacts


class TestScalingLimit:
    def test_constant_critical_gaps_vanish(self, tmp_path):
        dom = rectangle(-1, 1, -1, 1, 256)
        res = scaling_limit_experiment(smooth_bump, (0.0, 0.0),
                                       [0.7, 0.5, 0.35, 0.25], 1.5, 6.0, dom)
        assert res.verdict
        target = res.details["target"]
        for row in res.row_dicts():
            assert row["gap"] <= 0.02 * target
        _roundtrip_verdict(res, tmp_path)

    def test_variable_exponent_trend(self, tmp_path):
        dom = ball((0.0, 0.0), 1.0, 384)
        pf = lambda x, y: 1.5 + 0.0 * x           # noqa: E731
        qf = lambda x, y: 6.0 - 4.0 * (x**2 + y**2)  # noqa: E731
        res = scaling_limit_experiment(smooth_bump, (0.0, 0.0),
                                       [0.6, 0.45, 0.32, 0.22], pf, qf, dom,
                                       target_scale=0.95)
        assert res.verdict
        gaps = [r["gap"] for r in res.row_dicts()]
        assert gaps[-1] <= gaps[-2] <= gaps[-3]
        _roundtrip_verdict(res, tmp_path)

    def test_single_scale_degenerate(self):
        dom = rectangle(-1, 1, -1, 1, 128)
        res = scaling_limit_experiment(smooth_bump, (0.0, 0.0), [0.5],
                                       1.5, 6.0, dom)
        assert res.verdict is not None

    def test_rejects_noncritical_center(self):
        dom = rectangle(-1, 1, -1, 1, 128)
        with pytest.raises(ValueError, match="criticality"):
            scaling_limit_experiment(smooth_bump, (0.0, 0.0), [0.5],
                                     1.5, 5.5, dom)


class TestContinuity:
    def test_zero_shift_gives_zero_gaps(self, tmp_path):
        dom = interval(0, 1, 128)
        res = continuity_experiment(2.0, 2.0, [0.0, 0.0, 0.0], dom, seed=0)
        assert res.verdict
        assert all(r["gap"] == 0.0 for r in res.row_dicts())
        _roundtrip_verdict(res, tmp_path)

    def test_shifted_pairs_approach_base(self, tmp_path):
        dom = interval(0, 1, 256)
        res = continuity_experiment(2.0, 2.0, [0.2, 0.1, 0.05], dom, seed=0)
        assert res.verdict
        rows = res.row_dicts()
        gaps = [r["gap"] for r in rows]
        assert gaps[0] >= gaps[1] >= gaps[2]
        assert gaps[2] <= 0.05 * rows[-1]["s_base"]
        _roundtrip_verdict(res, tmp_path)

    def test_rejects_q_collapse(self):
        dom = interval(0, 1, 64)
        with pytest.raises(ValueError, match="below 1"):
            continuity_experiment(2.0, 1.15, [0.2, 0.1], dom)


class TestDilation:
    def test_constant_exponents_exact(self, tmp_path):
        res = dilation_check(smooth_bump, [0.5, 0.25, 0.125], 1.5, 6.0,
                             center=(0.0, 0.0), resolution=96)
        assert res.verdict
        for row in res.row_dicts():
            assert abs(row["fun_ratio"] - 1.0) <= 1e-8
            assert abs(row["grad_ratio"] - 1.0) <= 1e-8
        _roundtrip_verdict(res, tmp_path)

    def test_variable_q_ratios_trend_to_one(self, tmp_path):
        qf = lambda x, y: 6.0 - (x**2 + y**2)  # noqa: E731
        res = dilation_check(smooth_bump, [0.5, 0.25, 0.125], 1.5, qf,
                             center=(0.0, 0.0), resolution=96)
        assert res.verdict
        devs = [abs(r["fun_ratio"] - 1.0) for r in res.row_dicts()]
        assert devs[-1] <= 0.05
        _roundtrip_verdict(res, tmp_path)

    def test_rejects_noncompact_profile(self):
        with pytest.raises(ValueError, match="support violation"):
            dilation_check(lambda rho: np.ones_like(rho), [0.5, 0.25],
                           1.5, 6.0, center=(0.0, 0.0), resolution=48)

    def test_rejects_increasing_eps(self):
        with pytest.raises(ValueError):
            dilation_check(smooth_bump, [0.25, 0.5], 1.5, 6.0,
                           center=(0.0, 0.0), resolution=48)


class TestTheorem61:
    def test_strict_minimum_instance_passes(self, tmp_path):
        dom = ball((0.0, 0.0), 1.0, 256)
        p = ExponentField.from_callable(lambda x, y: 1.5 + 0.5 * (x**2 + y**2), dom)
        q = ExponentField.from_callable(lambda x, y: 6.0 - 2.0 * (x**2 + y**2), dom)
        res = theorem61_experiment((0.0, 0.0), p, q, [0.4, 0.3, 0.2],
                                   cells_per_diameter=96, max_iters=200)
        assert res.verdict
        assert res.details["extrapolated"] == pytest.approx(
            talenti_constant(2, 1.5), rel=0.15)
        _roundtrip_verdict(res, tmp_path)

    def test_degenerate_constant_case_needs_flag(self):
        dom = ball((0.0, 0.0), 1.0, 128)
        p = ExponentField.constant(1.5, dom)
        q = ExponentField.constant(6.0, dom)
        with pytest.raises(ValueError, match="local minimum"):
            theorem61_experiment((0.0, 0.0), p, q, [0.35, 0.25],
                                 cells_per_diameter=64)
        res = theorem61_experiment((0.0, 0.0), p, q, [0.35, 0.25],
                                   cells_per_diameter=64, max_iters=150,
                                   allow_degenerate=True)
        assert res.details["extrapolated"] == pytest.approx(
            talenti_constant(2, 1.5), rel=0.15)

    def test_refuses_local_maximum(self):
        dom = ball((0.0, 0.0), 1.0, 128)
        p = ExponentField.from_callable(lambda x, y: 1.8 - 0.5 * (x**2 + y**2), dom)
        q = ExponentField.from_callable(lambda x, y: 18.0 - 2.0 * (x**2 + y**2), dom)
        with pytest.raises(ValueError, match="local minimum"):
            theorem61_experiment((0.0, 0.0), p, q, [0.35, 0.25],
                                 cells_per_diameter=64)


class TestSubcriticalBall:
    PROFILE = staticmethod(lambda rho: 0.6 * smooth_bump(rho))

    def test_end_to_end_chain(self, tmp_path):
        s_target = talenti_constant(2, 1.5)
        res = subcritical_ball_experiment(self.PROFILE, [1.5, 3, 6, 12, 24, 48],
                                          1.5, 3.0, s_target=s_target,
                                          resolution=128)
        assert res.verdict
        rows = res.row_dicts()
        flagged = [r for r in rows if r["conditions_ok"] >= 0.5]
        assert flagged and all(r["claim_ok"] >= 0.5 for r in flagged)
        first_fail = [r for r in rows if r["conditions_ok"] < 0.5]
        assert first_fail and any(
            r["cond_grad"] <= 1 or r["cond_fun"] <= 1
            or r["cond_quotient_bound"] >= r["s_target"] for r in first_fail)
        assert res.details["smallest_passing_radius"] == 6.0
        _roundtrip_verdict(res, tmp_path)

    def test_doubling_keeps_conditions(self):
        s_target = talenti_constant(2, 1.5)
        res = subcritical_ball_experiment(self.PROFILE, [6, 12, 24, 48],
                                          1.5, 3.0, s_target=s_target,
                                          resolution=96)
        assert all(r["conditions_ok"] >= 0.5 for r in res.row_dicts())

    def test_rejects_supercritical_ball(self):
        with pytest.raises(ValueError, match="not subcritical"):
            subcritical_ball_experiment(self.PROFILE, [2.0], 1.5, 6.5,
                                        s_target=2.5, resolution=64)

    def test_rejects_profile_bound_violation(self):
        big = lambda rho: 1.2 * smooth_bump(rho)  # noqa: E731
        with pytest.raises(ValueError, match="profile bound"):
            subcritical_ball_experiment(big, [2.0], 1.5, 3.0, s_target=2.5,
                                        resolution=64)

    def test_rejects_radius_below_one(self):
        with pytest.raises(ValueError):
            subcritical_ball_experiment(self.PROFILE, [0.5, 2.0], 1.5, 3.0,
                                        s_target=2.5, resolution=64)

    def test_needs_target_or_critical_point(self):
        with pytest.raises(ValueError, match="s_target"):
            subcritical_ball_experiment(self.PROFILE, [2.0], 1.5, 3.0,
                                        resolution=64)
