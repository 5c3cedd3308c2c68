import pytest

from maxent_merge.evaluation import (
    EmptyExperimentError,
    HarnessConfig,
    run_ace_fig,
    run_roc,
    run_tpr_vs_ace,
)

FAST = HarnessConfig(n=400)
EXACT = HarnessConfig(exact=True, tol=1e-8, max_iter=100_000)


class TestRunRoc:
    def test_forced_strong_edges_detected_near_zero_threshold(self):
        # all dashed edges present: at a small threshold most are found
        curve = run_roc(
            "a", reps=20, mode="known_px", seed=3,
            config=HarnessConfig(n=1000),
            forced_edges={c: True for c in ("X1", "X2", "X3", "X4", "X5")},
        )
        assert curve.true_non_edges == 0
        point = next(p for p in curve.points if abs(p.threshold - 0.05) < 1e-9)
        assert point.tpr >= 0.7

    def test_endpoint_sanity(self):
        curve = run_roc("a", reps=10, seed=4, config=FAST)
        first = curve.points[0]
        assert first.threshold == 0.0
        assert first.tpr == 1.0 and first.fpr == 1.0
        last = curve.points[-1]
        assert last.threshold == 1.0
        assert last.fpr <= first.fpr

    def test_counts_identity(self):
        curve = run_roc("b", reps=10, seed=5, config=FAST)
        for p in curve.points:
            assert p.tp + p.fn == curve.true_edges
            assert p.fp + p.tn == curve.true_non_edges
        assert curve.true_edges + curve.true_non_edges == 5 * curve.retained

    def test_monotone_rates_in_threshold(self):
        curve = run_roc("a", reps=15, seed=6, config=FAST)
        tprs = [p.tpr for p in curve.points]
        fprs = [p.fpr for p in curve.points]
        assert all(a >= b - 1e-12 for a, b in zip(tprs, tprs[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(fprs, fprs[1:]))

    def test_deterministic_under_seed(self):
        c1 = run_roc("a", reps=8, seed=7, config=FAST)
        c2 = run_roc("a", reps=8, seed=7, config=FAST)
        assert c1.auc == c2.auc
        assert [p.tpr for p in c1.points] == [p.tpr for p in c2.points]

    def test_parallel_matches_serial(self):
        serial = run_roc("a", reps=8, seed=7, config=FAST, jobs=1)
        parallel = run_roc("a", reps=8, seed=7, config=FAST, jobs=2)
        assert serial.auc == parallel.auc

    def test_exact_moments_family_a_high_separation(self):
        curve = run_roc("a", reps=30, mode="known_px", seed=77, config=EXACT)
        assert curve.dropped == 0
        assert curve.auc >= 0.85

    def test_all_dropped_raises(self):
        cfg = HarnessConfig(n=400, max_iter=1, tol=1e-12)
        with pytest.raises(EmptyExperimentError):
            run_roc("a", reps=3, seed=8, config=cfg)

    def test_reps_validation(self):
        with pytest.raises(ValueError):
            run_roc("a", reps=0, seed=1)

    def test_estimated_mode_runs(self):
        curve = run_roc("c", reps=8, mode="estimated_px", seed=9, config=FAST)
        assert curve.retained + curve.dropped == 8

    def test_rows_and_summary_shapes(self):
        curve = run_roc("a", reps=5, seed=10, config=FAST)
        rows = curve.to_rows()
        assert len(rows) == len(curve.points)
        assert set(rows[0]) == {"threshold", "tpr", "fpr", "tp", "fp", "tn", "fn"}
        summary = curve.summary()
        assert summary["family"] == "a"
        assert 0.0 <= summary["auc"] <= 1.0


class TestRunTprVsAce:
    def test_structure_and_forced_edge(self):
        curve = run_tpr_vs_ace("a", reps=40, t=0.15, seed=11, config=FAST, n_bins=4)
        assert curve.threshold == 0.15
        assert len(curve.bins) == 4
        assert curve.retained + curve.dropped == 40
        assert len(curve.pairs) == curve.retained
        assert sum(b.count for b in curve.bins) == curve.retained

    def test_high_effect_bin_detects_better(self):
        curve = run_tpr_vs_ace("a", reps=120, t=0.15, seed=12,
                               config=HarnessConfig(n=1000), n_bins=3)
        assert curve.bins[-1].tpr >= curve.bins[0].tpr

    def test_undetectable_band_near_zero(self):
        curve = run_tpr_vs_ace("a", reps=120, t=0.15, seed=13,
                               config=HarnessConfig(n=1000), n_bins=5)
        # the lowest bin mixes null and weak mechanisms; its rate stays
        # well below the top bin
        assert curve.bins[0].tpr <= 0.75

    def test_deterministic(self):
        c1 = run_tpr_vs_ace("a", reps=15, seed=14, config=FAST)
        c2 = run_tpr_vs_ace("a", reps=15, seed=14, config=FAST)
        assert c1.pairs == c2.pairs


class TestRunAceFig:
    def test_rows_and_bounds(self):
        rows = run_ace_fig(variants=4, seed=15, config=HarnessConfig(tol=1e-6))
        assert len(rows) == 4
        for r in rows:
            assert r.lower <= r.upper
            assert r.true_within
            if r.point_known is not None:
                assert r.known_within

    def test_deterministic(self):
        r1 = run_ace_fig(variants=3, seed=16, config=HarnessConfig(tol=1e-6))
        r2 = run_ace_fig(variants=3, seed=16, config=HarnessConfig(tol=1e-6))
        assert [r.true_ace for r in r1] == [r.true_ace for r in r2]
        assert [r.point_known for r in r1] == [r.point_known for r in r2]

    def test_variant_validation(self):
        with pytest.raises(ValueError):
            run_ace_fig(variants=0)
