import numpy as np
import pytest

from adselect.datasets import synthetic_consumption
from adselect.inject import EDGE_MARGIN, InjectionError, InjectionPlan, inject


@pytest.fixture(scope="module")
def week6():
    return synthetic_consumption(1008, seed=1)


@pytest.fixture(scope="module")
def yearish():
    return synthetic_consumption(8016, seed=2)


def runs_of_ones(labels):
    out, run = [], 0
    for v in labels:
        if v:
            run += 1
        elif run:
            out.append(run)
            run = 0
    if run:
        out.append(run)
    return out


class TestBudgets:
    def test_count_1008_at_5pct(self, week6):
        out = inject(week6, InjectionPlan(kind="mixed", rate=0.05, seed=0))
        assert int(out.labels.sum()) == 50  # round(0.05 * 1008)

    def test_count_8016_at_2pct(self, yearish):
        out = inject(yearish, InjectionPlan(kind="mixed", rate=0.02, seed=0))
        assert int(out.labels.sum()) == 160  # round(0.02 * 8016)

    def test_mixed_split_is_thirds(self, week6):
        clean = week6.values
        out = inject(week6, InjectionPlan(kind="mixed", rate=0.05, seed=3))
        n_outside = int(((out.values < clean.min()) | (out.values > clean.max())).sum())
        assert n_outside == 50 // 3  # the global share; local/clustered stay inside
        assert int(out.labels.sum()) == 50

    def test_edge_margin_untouched(self, week6):
        out = inject(week6, InjectionPlan(kind="mixed", rate=0.05, seed=4))
        assert not out.labels[:EDGE_MARGIN].any()
        assert not out.labels[-EDGE_MARGIN:].any()
        changed = out.values != week6.values
        np.testing.assert_array_equal(changed, out.labels.astype(bool))


class TestDeterminism:
    def test_same_seed_identical(self, week6):
        plan = InjectionPlan(kind="mixed", rate=0.05, seed=9)
        a, b = inject(week6, plan), inject(week6, plan)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_different_seed_differs(self, week6):
        a = inject(week6, InjectionPlan(kind="global", rate=0.05, seed=1))
        b = inject(week6, InjectionPlan(kind="global", rate=0.05, seed=2))
        assert not np.array_equal(a.labels, b.labels)


class TestGlobal:
    def test_strictly_outside_range(self, week6):
        clean = week6.values
        gmin, gmax, grange = clean.min(), clean.max(), np.ptp(clean)
        for seed in range(5):
            out = inject(week6, InjectionPlan(kind="global", rate=0.05, seed=seed))
            hit = out.values[out.labels.astype(bool)]
            assert len(hit) == 50
            outside = (hit < gmin) | (hit > gmax)
            assert outside.all()
            # overshoot bounded by the configured u-range
            over = np.where(hit > gmax, hit - gmax, gmin - hit) / grange
            assert (over >= 0.1 - 1e-12).all() and (over <= 0.5 + 1e-12).all()

    def test_untouched_points_unchanged(self, week6):
        out = inject(week6, InjectionPlan(kind="global", rate=0.05, seed=0))
        keep = ~out.labels.astype(bool)
        np.testing.assert_array_equal(out.values[keep], week6.values[keep])


class TestLocal:
    def test_inside_range_and_sigma_displaced(self, week6):
        clean = week6.values
        gmin, gmax = clean.min(), clean.max()
        for seed in range(5):
            out = inject(week6, InjectionPlan(kind="local", rate=0.05, seed=seed))
            idx = np.flatnonzero(out.labels)
            assert len(idx) == 50
            for i in idx:
                x = out.values[i]
                assert gmin < x < gmax
                neigh = np.concatenate([clean[i - 12 : i], clean[i + 1 : i + 13]])
                mu, sd = neigh.mean(), neigh.std()
                assert abs(x - mu) >= 3.0 * sd - 1e-9

    def test_custom_k_floor(self, week6):
        clean = week6.values
        out = inject(week6, InjectionPlan(kind="local", rate=0.02, seed=0, local_k=(4.0, 5.0)))
        for i in np.flatnonzero(out.labels):
            neigh = np.concatenate([clean[i - 12 : i], clean[i + 1 : i + 13]])
            assert abs(out.values[i] - neigh.mean()) >= 4.0 * neigh.std() - 1e-9


class TestClustered:
    def test_runs_contiguous_with_admissible_lengths(self, week6):
        for seed in range(5):
            out = inject(week6, InjectionPlan(kind="clustered", rate=0.05, seed=seed))
            lengths = runs_of_ones(out.labels)
            assert sum(lengths) == 50
            assert all(4 <= L <= 6 for L in lengths)

    def test_runs_share_direction(self, week6):
        clean = week6.values
        out = inject(week6, InjectionPlan(kind="clustered", rate=0.05, seed=1))
        labels = out.labels
        i = 0
        while i < len(labels):
            if labels[i]:
                j = i
                while j < len(labels) and labels[j]:
                    j += 1
                signs = np.sign(out.values[i:j] - clean[i:j])
                assert len(set(signs)) == 1
                i = j
            else:
                i += 1

    def test_values_stay_inside_range(self, week6):
        clean = week6.values
        out = inject(week6, InjectionPlan(kind="clustered", rate=0.05, seed=2))
        hit = out.values[out.labels.astype(bool)]
        assert (hit > clean.min()).all() and (hit < clean.max()).all()


class TestErrors:
    def test_series_too_short(self, make_series):
        with pytest.raises(InjectionError):
            inject(make_series(np.arange(60.0)), InjectionPlan(kind="global", rate=0.3))

    def test_rate_yields_zero(self, week6):
        with pytest.raises(InjectionError):
            inject(week6, InjectionPlan(kind="global", rate=0.0001))

    @pytest.mark.parametrize("budget", [3, 7])
    def test_cluster_budget_infeasible(self, budget):
        # budgets 3 and 7 cannot be tiled by runs of length 4..6
        ts = synthetic_consumption(2000, seed=5)
        with pytest.raises(InjectionError, match="not reachable"):
            inject(ts, InjectionPlan(kind="clustered", rate=budget / len(ts)))

    def test_already_labelled(self, week6):
        labelled = week6.with_labels(np.eye(1, 1008, 500, dtype=np.int8)[0])
        with pytest.raises(InjectionError, match="already"):
            inject(labelled, InjectionPlan(kind="global", rate=0.05))

    def test_bad_kind(self):
        with pytest.raises(InjectionError):
            InjectionPlan(kind="spikes", rate=0.05)

    def test_bad_cluster_len(self):
        with pytest.raises(InjectionError):
            InjectionPlan(kind="clustered", rate=0.05, cluster_len=(6, 4))
