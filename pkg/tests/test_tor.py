import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as hst

from conftest import latent_ordinal, small_synth
from tor_lab.errors import DomainError
from tor_lab.kernels import KernelKind
from tor_lab.losses import LossKind, ordinal_loss_array, predict_from_scores, swap_gain
from tor_lab.ordreg import OrdinalModel, TrainConfig, predict_many, train_supervised
from tor_lab.tor import (TRACE_COLUMNS, C2Schedule, allocate, assign_by_rank, find_swap,
                         find_swap_scores, init_pseudo_labels, objective, snapshot_scorer,
                         train_transductive, validate_events)


def split(X, y, n):
    return X[:n], y[:n], X[n:], y[n:]


class TestAllocation:
    def test_examples(self):
        assert allocate((2, 1, 1), 8) == (4, 2, 2)
        assert allocate((1, 1, 1), 1) == (0, 0, 1)
        assert allocate((5, 0), 7) == (7, 0)

    def test_assign_by_rank(self):
        labels = assign_by_rank(np.array([3.0, -1.0, 2.0, 0.0]), (2, 1, 1))
        assert labels.tolist() == [3, 1, 2, 1]

    def test_init_sizes_follow_ratios(self):
        X, y = small_synth(K=3, n=80, seed=1)
        X_lab, y_lab, X_unl, _ = split(X, y, 30)
        res = init_pseudo_labels(TrainConfig(), X_lab, y_lab, X_unl, 3)
        counts = np.bincount(y_lab, minlength=4)[1:]
        assert res.allocation == allocate(counts, 50)
        assert np.bincount(res.labels, minlength=4)[1:].tolist() == list(res.allocation)
        # labels are handed out in score order
        order = np.argsort(res.scores, kind="stable")
        assert np.all(np.diff(res.labels[order]) >= 0)

    def test_degenerate_and_errors(self):
        X = sp.csr_matrix(np.array([[1.0], [2.0], [3.0], [4.0]]))
        res = init_pseudo_labels(TrainConfig(), X[:2], [1, 1], X[2:], 2)
        assert res.labels.tolist() == [1, 1]
        assert "degenerate-allocation" in res.warnings and "empty-class:2" in res.warnings
        with pytest.raises(DomainError):
            init_pseudo_labels(TrainConfig(), X[:0], [], X[2:], 2)
        with pytest.raises(DomainError):
            init_pseudo_labels(TrainConfig(), X[:2], [1, 2], X[:0], 2)


def model_with(theta, b=0.0):
    return OrdinalModel(K=len(theta) + 1, kernel=KernelKind(), thresholds=np.asarray(theta, float),
                        b=b, dim=1, form="primal", weight=np.array([1.0]))


class TestFindSwap:
    def test_none_without_candidates(self):
        m = model_with((-1.0, 1.0))
        X = sp.csr_matrix(np.array([[-2.0], [0.0], [2.0]]))
        assert find_swap(1, [1, 2, 3], m, X, "hinge") is None

    def test_two_point_example(self):
        m = model_with((-1.0, 1.0))
        X = sp.csr_matrix(np.array([[0.0], [-1.5]]))
        ev = find_swap(1, [1, 2], m, X, LossKind.HINGE)
        assert (ev.i, ev.j, ev.k, ev.gain) == (0, 1, 1, -3.0)

    def test_picks_most_negative(self):
        theta = (0.0, 10.0)
        h = np.array([0.25, -0.25, -1.5, -0.75])  # one i, three j candidates
        pseudo = np.array([1, 2, 2, 2])
        gains = [swap_gain(LossKind.HINGE, 1, 2, h[0], h[j], theta) for j in (1, 2, 3)]
        assert gains == [-1.0, -3.0, -2.0]
        ev = find_swap_scores(1, pseudo, h, theta, 0.0, LossKind.HINGE)
        assert (ev.i, ev.j, ev.gain) == (0, 2, -3.0)

    def test_ties_take_lowest_index(self):
        h = np.array([1.0, 1.0, -1.0, -1.0])
        ev = find_swap_scores(1, np.array([1, 1, 2, 2]), h, (0.0, 9.0), 0.0, LossKind.HINGE)
        assert (ev.i, ev.j) == (0, 2)

    def test_gain_matches_objective_change(self):
        X, y = small_synth(K=3, n=60, seed=2)
        X_lab, y_lab, X_unl, _ = split(X, y, 20)
        model = train_supervised(TrainConfig(c1=5.0), X_lab, y_lab, 3)
        rng = np.random.default_rng(0)
        pseudo = rng.integers(1, 4, size=X_unl.shape[0])
        for k in (1, 2):
            ev = find_swap(k, pseudo, model, X_unl, "hinge")
            if ev is None:
                continue
            swapped = pseudo.copy()
            swapped[ev.i], swapped[ev.j] = k + 1, k
            c2 = 0.25
            before = objective(model, X_lab, y_lab, X_unl, pseudo, 5.0, c2, "hinge")
            after = objective(model, X_lab, y_lab, X_unl, swapped, 5.0, c2, "hinge")
            assert after < before
            assert after - before == pytest.approx(c2 * ev.gain, rel=1e-9)


class TestObjective:
    def test_zero_model(self):
        m = OrdinalModel(K=3, kernel=KernelKind(), thresholds=np.zeros(2), b=0.0, dim=1,
                         form="primal", weight=np.zeros(1))
        X = sp.csr_matrix(np.array([[1.0], [2.0]]))
        assert objective(m, X, [1, 3], X, [2, 2], 0.0, 0.0, "hinge") == 0.0

    def test_c2_zero_is_supervised(self):
        X, y = small_synth(K=3, n=40, seed=3)
        X_lab, y_lab, X_unl, _ = split(X, y, 20)
        model = train_supervised(TrainConfig(c1=2.0), X_lab, y_lab, 3)
        obj = objective(model, X_lab, y_lab, X_unl, np.ones(20, int), 2.0, 0.0, "hinge")
        assert obj == pytest.approx(model.diagnostics["primal_objective"], rel=1e-9)


class TestSchedule:
    def test_iteration(self):
        assert list(C2Schedule(0.1, 2.0, 1.0)) == [0.1, 0.2, 0.4, 0.8]
        assert list(C2Schedule(1.0, 2.0, 1.0)) == []
        with pytest.raises(DomainError):
            C2Schedule(0.0)
        with pytest.raises(DomainError):
            C2Schedule(1.0, 1.0)


def check_run(cfg, X_lab, y_lab, X_unl, K):
    model, pseudo, trace = train_transductive(cfg, X_lab, y_lab, X_unl, K)
    # class counts never change
    assert np.bincount(pseudo, minlength=K + 1).tolist() == \
        np.bincount(trace.init_labels, minlength=K + 1).tolist()
    for st in trace.stages:
        objs = np.array(st.objectives)
        assert np.all(objs[1:] < objs[:-1] + 1e-6 * np.abs(objs[:-1]))
    for ev in trace.events:
        assert ev.gain < 0
    assert validate_events(trace, snapshot_scorer(cfg, X_lab, X_unl), X_lab.shape[0], K) == []
    assert "swap-cap" not in trace.flags
    assert model.ordered
    return model, pseudo, trace


class TestTransductive:
    def test_ceiling_skips_loop(self):
        X, y = small_synth(K=3, n=60, seed=4)
        X_lab, y_lab, X_unl, _ = split(X, y, 20)
        cfg = TrainConfig(c1=1.0, c2_init=1.0)
        model, pseudo, trace = train_transductive(cfg, X_lab, y_lab, X_unl, 3)
        sup = train_supervised(cfg, X_lab, y_lab, 3)
        init = init_pseudo_labels(cfg, X_lab, y_lab, X_unl, 3)
        assert trace.stages == [] and trace.solves == 0
        assert pseudo.tolist() == init.labels.tolist()
        assert predict_many(model, X_unl).tolist() == predict_many(sup, X_unl).tolist()
        assert np.array_equal(model.thresholds, sup.thresholds)

    def test_tiny_instance(self):
        X, y = small_synth(K=3, n=16, p=0.2, seed=5)
        X_lab, y_lab, X_unl, _ = split(X, y, 10)
        cfg = TrainConfig(c1=1.0)
        model, pseudo, trace = check_run(cfg, X_lab, y_lab, X_unl, 3)
        c2 = trace.stages[-1].c2
        init = init_pseudo_labels(cfg, X_lab, y_lab, X_unl, 3)
        start = objective(init.model, X_lab, y_lab, X_unl, init.labels, 1.0, c2, "hinge")
        final = objective(model, X_lab, y_lab, X_unl, pseudo, 1.0, c2, "hinge")
        assert final <= start
        # exhaustive scan: no qualifying pair is left for the final model
        f = predict_many(model, X_unl)
        for k in (1, 2):
            for i in np.flatnonzero(pseudo == k):
                for j in np.flatnonzero(pseudo == k + 1):
                    assert not (f[i] > k and f[j] < k + 1)

    def test_swaps_happen_and_validate(self):
        total = 0
        for seed in range(10):
            X, y = latent_ordinal(60, d=5, noise=2.0, seed=seed)
            X_lab, y_lab, X_unl, _ = split(X, y, 30)
            _, _, trace = check_run(TrainConfig(c1=100.0, c2_init=0.1), X_lab, y_lab, X_unl, 3)
            assert trace.solves == len(trace.stages) + sum(
                len(evs) > 0 for st in trace.stages for evs in st.swaps)
            total += len(trace.events)
        assert total > 0

    @pytest.mark.parametrize("loss", ["logistic", "square-hinge", "laplacian"])
    def test_primal_losses(self, loss):
        X, y = small_synth(K=3, n=50, p=0.1, seed=7)
        X_lab, y_lab, X_unl, _ = split(X, y, 20)
        cfg = TrainConfig(c1=1.0, c2_init=0.05, loss=loss, epochs=10)
        check_run(cfg, X_lab, y_lab, X_unl, 3)

    @pytest.mark.parametrize("kernel", ["perceptron", "cosine"])
    def test_other_kernels(self, kernel):
        X, y = small_synth(K=3, n=50, p=0.1, seed=8)
        X_lab, y_lab, X_unl, _ = split(X, y, 20)
        check_run(TrainConfig(c1=5.0, c2_init=1e-2, kernel=KernelKind(kernel)),
                  X_lab, y_lab, X_unl, 3)

    def test_trace_rows_and_csv(self, tmp_path):
        X, y = small_synth(K=3, n=60, seed=0)
        X_lab, y_lab, X_unl, _ = split(X, y, 30)
        _, _, trace = train_transductive(TrainConfig(c1=10.0, c2_init=1e-3), X_lab, y_lab,
                                         X_unl, 3)
        rows = trace.rows()
        assert all(len(r) == len(TRACE_COLUMNS) for r in rows)
        assert sum(1 for r in rows if r[4] != "") == len(trace.events)
        with open(tmp_path / "t.csv", "w", newline="") as fh:
            trace.write_csv(fh)
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == ",".join(TRACE_COLUMNS) and len(lines) == len(rows) + 1

    def test_deterministic(self):
        X, y = small_synth(K=3, n=50, seed=9)
        X_lab, y_lab, X_unl, _ = split(X, y, 20)
        cfg = TrainConfig(c1=3.0, c2_init=1e-3)
        a = train_transductive(cfg, X_lab, y_lab, X_unl, 3)
        b = train_transductive(cfg, X_lab, y_lab, X_unl, 3)
        assert a[1].tolist() == b[1].tolist()
        assert [s.objectives for s in a[2].stages] == [s.objectives for s in b[2].stages]

    def test_validate_events_catches_tampering(self):
        cfg = TrainConfig(c1=100.0, c2_init=0.1)
        for seed in range(20):
            X, y = latent_ordinal(60, d=5, noise=2.0, seed=seed)
            X_lab, y_lab, X_unl, _ = split(X, y, 30)
            _, _, trace = train_transductive(cfg, X_lab, y_lab, X_unl, 3)
            events = [(st, it) for st in trace.stages for it, evs in enumerate(st.swaps) if evs]
            if events:
                break
        st, it = events[0]
        from dataclasses import replace
        ev = st.swaps[it][0]
        st.swaps[it][0] = replace(ev, i=ev.j, j=ev.i)
        assert validate_events(trace, snapshot_scorer(cfg, X_lab, X_unl), 30, 3)


@given(hst.lists(hst.integers(0, 50), min_size=2, max_size=6).filter(lambda c: sum(c) > 0),
       hst.integers(1, 200))
def test_allocation_properties(counts, u):
    sizes = allocate(counts, u)
    assert sum(sizes) == u and min(sizes) >= 0 and len(sizes) == len(counts)
    ranks = assign_by_rank(np.random.default_rng(u).normal(size=u), sizes)
    assert np.bincount(ranks, minlength=len(sizes) + 1)[1:].tolist() == list(sizes)


@settings(max_examples=150, deadline=None)
@given(hst.integers(0, 10**6), hst.sampled_from(list(LossKind)))
def test_best_swap_against_brute_force(seed, loss):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 5))
    u = int(rng.integers(2, 12))
    theta = np.sort(rng.normal(0, 2, size=K - 1))
    b = float(rng.normal(0, 0.5))
    h = rng.normal(0, 3, size=u)
    pseudo = rng.integers(1, K + 1, size=u)
    f = predict_from_scores(h, theta, b)
    before = ordinal_loss_array(loss, pseudo, h, theta, b).sum()
    for k in range(1, K):
        # exhaustive search with the loss recomputed from scratch per pair
        best = None
        for i in np.flatnonzero((pseudo == k) & (f > k)):
            for j in np.flatnonzero((pseudo == k + 1) & (f < k + 1)):
                moved = pseudo.copy()
                moved[i], moved[j] = k + 1, k
                d = ordinal_loss_array(loss, moved, h, theta, b).sum() - before
                if best is None or d < best:
                    best = d
        ev = find_swap_scores(k, pseudo, h, theta, b, loss)
        if best is None or best >= -1e-9:
            assert ev is None or ev.gain == pytest.approx(best, abs=1e-9)
            continue
        assert ev is not None and ev.gain < 0
        assert ev.gain == pytest.approx(best, rel=1e-9, abs=1e-9)
        moved = pseudo.copy()
        moved[ev.i], moved[ev.j] = k + 1, k
        assert np.bincount(moved, minlength=K + 1).tolist() == \
            np.bincount(pseudo, minlength=K + 1).tolist()
