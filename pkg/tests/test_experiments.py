import xml.etree.ElementTree as ET

import numpy as np
import pytest

from klsat import experiments as ex
from klsat.pool import standard_pool
from klsat.simplex import NumericalFailure

from .helpers import single_pool


class TestScan:
    def test_zero_density(self, pool8):
        (rec,) = ex.scan_f(pool8, [0], 50, 3)
        assert rec.mean_scaled == 0 and rec.std_scaled == 0

    def test_zero_density_lower_box_cost(self):
        pool = single_pool((1, 1, 1), 0, lo=1, hi=2, w_x=2)
        (rec,) = ex.scan_f(pool, [0], 20, 2)
        assert rec.mean_scaled == pytest.approx(2.0)

    def test_grid_must_ascend(self, pool8):
        with pytest.raises(ValueError):
            ex.scan_f(pool8, [1, 0.5], 20, 1)

    def test_monotone_and_nonnegative(self, pool8):
        recs = ex.scan_f(pool8, [0.25, 0.75, 1.25, 2, 4], 120, 6, record_runtime=False)
        assert ex.scan_is_monotone(recs)
        assert all(r.mean_scaled >= -1e-9 and r.std_scaled >= 0 for r in recs)

    def test_csv_bytes_reproducible_across_workers(self, pool8):
        a = ex.scan_csv(ex.scan_f(pool8, [0.5, 1.5], 80, 4, record_runtime=False))
        b = ex.scan_csv(ex.scan_f(pool8, [0.5, 1.5], 80, 4, record_runtime=False, workers=2))
        assert a == b
        assert a.splitlines()[0] == "c,n,seeds,mean_scaled,std_scaled,mean_runtime_s"
        rows = ex.read_csv(a)
        assert [r["c"] for r in rows] == [0.5, 1.5]

    def _failing(self, monkeypatch, bad_seeds):
        real = ex.solve_glp

        def fake(inst, method="highs"):
            if inst.seed in bad_seeds:
                raise NumericalFailure("injected")
            return real(inst, method)
        monkeypatch.setattr(ex, "solve_glp", fake)

    def test_rare_failures_excluded(self, monkeypatch, pool8):
        self._failing(monkeypatch, {3})
        (rec,) = ex.scan_f(pool8, [1.0], 30, 40)
        assert rec.failures == 1 and rec.seeds == 39

    def test_frequent_failures_raise(self, monkeypatch, pool8):
        self._failing(monkeypatch, {1, 2})
        with pytest.raises(ex.ScanError):
            ex.scan_f(pool8, [1.0], 30, 40)


class TestThreshold:
    def test_bracket(self, pool8):
        tol = 0.1
        est = ex.estimate_threshold(pool8, 150, 3, 0.01, 5.0, tol)
        assert not est.flagged
        assert 1 / 9 - tol <= est.c_lo <= est.c_hi <= 5.0
        assert est.c_hi - est.c_lo <= tol
        assert est.mean_lo <= 0.01 < est.mean_hi
        for a, b in zip(est.widths, est.widths[1:]):
            assert b == pytest.approx(a / 2)

    def test_never_infeasible_is_flagged(self):
        est = ex.estimate_threshold(single_pool((1,), 2), 50, 2, 0.01, 3.0, 0.1)
        assert est.flagged and est.c_lo == est.c_hi == 3.0

    def test_argument_checks(self, pool8):
        with pytest.raises(ValueError):
            ex.estimate_threshold(pool8, 20, 1, 0, 1, 0.1)


class TestCoupling:
    def test_passes(self, pool8):
        res = ex.coupling_monotone_test(pool8, 80, 0.5, 1.0, 8)
        assert len(res) == 8 and all(r.passed for r in res)

    def test_equal_densities(self, pool8):
        for r in ex.coupling_monotone_test(pool8, 60, 0.7, 0.7, 4):
            assert abs(r.opt_c1 - r.opt_c2) <= 1e-9

    def test_from_empty(self):
        pool = standard_pool(w_x=0.5)
        for r in ex.coupling_monotone_test(pool, 40, 0, 1.0, 3):
            assert r.opt_c1 == 0 and r.passed

    def test_order_checked(self, pool8):
        with pytest.raises(ValueError):
            ex.coupling_monotone_test(pool8, 10, 1.0, 0.5, 1)


class TestConcentration:
    def test_single_seed_flagged(self, pool8):
        (row,) = ex.concentration_report(pool8, 1.0, [50], 1)
        assert row.std_scaled == 0 and row.flagged

    def test_constant_weights_zero_density(self, pool8):
        rows = ex.concentration_report(pool8, 0, [20, 40], 5)
        assert all(r.std_scaled == 0 for r in rows)

    def test_sizes_ascend(self, pool8):
        with pytest.raises(ValueError):
            ex.concentration_report(pool8, 1, [40, 20], 2)


class TestTreeStats:
    def test_empty(self, pool8):
        st = ex.tree_stats(pool8, 50, 0, 2, 20)
        assert st["tv_degree"] == 0 and st["tree_fraction"] == 1 and st["gw_tree_fraction"] == 1

    def test_sparse_balls_are_trees(self, pool8):
        st = ex.tree_stats(pool8, 4000, 0.5, 2, 300)
        assert st["tree_fraction"] > 0.95

    def test_galton_watson_means(self):
        rng = np.random.default_rng(0)
        # depth 1: Pois(cK); depth 2 adds (K-1) * cK * cK on average
        one = ex.galton_watson_constraint_counts(0.5, 3, 1, 20000, rng)
        two = ex.galton_watson_constraint_counts(0.5, 3, 2, 20000, rng)
        assert one.mean() == pytest.approx(1.5, abs=0.05)
        assert two.mean() == pytest.approx(1.5 + 2 * 1.5 * 1.5, abs=0.15)

    def test_poisson_tv(self):
        assert ex.poisson_tv({0: 10}, 0) == 0
        assert ex.poisson_tv({5: 1}, 0) == 1


class TestMatchingReport:
    def test_rows(self):
        rows = ex.matching_limit_report([0, 1.0], 400, 3)
        zero, one = rows
        assert (zero.lpm0_frac, zero.ks_lower_frac, zero.ks_degnorm) == (0, 0, 0)
        assert zero.ks_printed == 1.0
        assert one.ks_lower_frac <= one.lpm0_frac + 1e-12
        text = ex.matching_csv(rows)
        assert text.splitlines()[0] == "c,n,lpm0_frac,ks_lower_frac,ks_printed,ks_degnorm"

    def test_tracking_note_names_a_curve(self):
        rows = ex.matching_limit_report([0.5, 1.0], 600, 2)
        note = ex.tracking_note(rows)
        assert note.startswith("tracks ")
        assert "printed(c)" in note and "degree_normalized(c)" in note


def test_svg_is_well_formed():
    svg = ex.svg_line_chart({"a": ([0, 1, 2], [0, 1, 4]), "b": ([0, 2], [1, float("nan")])}, title="t")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 2
