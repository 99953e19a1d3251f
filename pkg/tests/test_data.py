import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tor_lab.data import (AugmentedPoint, ClassRatios, OrdinalDataset, SparseVector, SynthConfig,
                          encode_extended, extended_labels, from_csr, gen_synthetic,
                          load_dataset, parse_libsvm, quantize_targets, to_csr, write_libsvm)
from tor_lab.errors import DomainError, ParseError


class TestSparseVector:
    def test_drops_zeros_and_validates(self):
        v = SparseVector([0, 3, 5], [1.0, 0.0, 2.0], 6)
        assert v.entries() == [(0, 1.0), (5, 2.0)]
        with pytest.raises(DomainError):
            SparseVector([3, 1], [1.0, 1.0], 5)
        with pytest.raises(DomainError):
            SparseVector([5], [1.0], 5)
        with pytest.raises(DomainError):
            SparseVector([1], [np.nan], 5)

    def test_immutable(self):
        v = SparseVector([1], [1.0], 3)
        with pytest.raises(AttributeError):
            v.dim = 4
        with pytest.raises(ValueError):
            v.values[0] = 3.0

    def test_dot_and_norm(self):
        a = SparseVector.from_dense([1, 0, 2, 0])
        b = SparseVector.from_dense([0, 3, 4, 1])
        assert a.dot(b) == 8.0
        assert a.norm() == pytest.approx(np.sqrt(5))
        with pytest.raises(DomainError):
            a.dot(SparseVector.from_dense([1, 2]))

    def test_csr_round_trip(self):
        vs = [SparseVector.from_dense(r) for r in [[1, 0, 2], [0, 0, 0], [0, 5, 0]]]
        assert from_csr(to_csr(vs)) == vs


class TestEncoding:
    @pytest.mark.parametrize("y,expected", [(3, [1, 1, -1, -1]), (1, [-1] * 4), (5, [1] * 4)])
    def test_examples(self, y, expected):
        assert encode_extended(y, 5) == expected

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            encode_extended(0, 3)
        with pytest.raises(DomainError):
            encode_extended(4, 3)

    @given(st.integers(2, 12).flatmap(lambda K: st.tuples(st.just(K), st.integers(1, K))))
    def test_monotone(self, Ky):
        K, y = Ky
        code = encode_extended(y, K)
        assert code == sorted(code, reverse=True)
        assert code.count(1) == y - 1 and code.count(-1) == K - y

    def test_vectorised_matches(self):
        labels = [1, 2, 3, 4]
        assert extended_labels(labels, 4).tolist() == [encode_extended(y, 4) for y in labels]

    def test_augmented_point(self):
        p = AugmentedPoint(base=2, k=1, binary_label=encode_extended(2, 3)[0])
        assert p.binary_label == 1


class TestQuantize:
    def test_examples(self):
        assert quantize_targets([1, 2, 3, 4, 5, 6], 3) == [1, 1, 2, 2, 3, 3]
        assert quantize_targets([6, 1, 4, 2, 5, 3], 3) == [3, 1, 2, 1, 3, 2]
        assert quantize_targets([7, 7, 7, 7], 2) == [1, 1, 2, 2]

    def test_uneven_sizes(self):
        labels = quantize_targets(list(range(7)), 3)
        assert np.bincount(labels)[1:].tolist() == [3, 2, 2]

    def test_too_few(self):
        with pytest.raises(DomainError):
            quantize_targets([1.0], 2)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=5, max_size=40), st.integers(2, 5))
    def test_order_preserving(self, values, K):
        labels = quantize_targets(values, K)
        for a in range(len(values)):
            for b in range(len(values)):
                if values[a] < values[b]:
                    assert labels[a] <= labels[b]


class TestRatios:
    def test_from_labels(self):
        r = ClassRatios.from_labels([1, 1, 2, 3], 3)
        assert r.ratios == (0.5, 0.25, 0.25)
        assert r.counts == (2, 1, 1)

    def test_invalid(self):
        with pytest.raises(DomainError):
            ClassRatios((0.5, 0.6))
        with pytest.raises(DomainError):
            ClassRatios.from_labels([], 3)


class TestDataset:
    def test_validation(self):
        x = SparseVector([0], [1.0], 2)
        ds = OrdinalDataset([(x, 1), (x, 3)], [x], K=3, dim=2)
        assert (ds.n, ds.u) == (2, 1)
        assert ds.labels.tolist() == [1, 3]
        with pytest.raises(DomainError):
            OrdinalDataset([(x, 4)], [], K=3, dim=2)
        with pytest.raises(DomainError):
            OrdinalDataset([(x, 1)], [], K=3, dim=3)
        with pytest.raises(DomainError):
            OrdinalDataset([], [], K=1, dim=2)


class TestSynthetic:
    def test_dimension(self):
        assert SynthConfig(K=5, p=0.3).dim == 14000
        ds = gen_synthetic(SynthConfig(K=5, p=0.3, n_samples=3))
        assert ds.dim == 14000 and all(x.dim == 14000 for x in ds.vectors)

    def test_config_validation(self):
        with pytest.raises(DomainError):
            SynthConfig(p=1.5)
        with pytest.raises(DomainError):
            SynthConfig(K=1)

    @pytest.mark.parametrize("p,expected", [(0.0, 60), (1.0, 140)])
    def test_nonzero_counts(self, p, expected):
        ds = gen_synthetic(SynthConfig(K=5, p=p, n_samples=1000, seed=3))
        mean_nnz = np.mean([x.nnz for x in ds.vectors])
        assert abs(mean_nnz - expected) <= 0.1 * expected

    def test_band_support_at_p0(self):
        # half-open band [2000(y-1), 2000(y+2)) over 1-based features
        ds = gen_synthetic(SynthConfig(K=5, p=0.0, n_samples=200, seed=1))
        for x, y in ds.labeled:
            d = x.indices + 1
            assert d.min() >= max(2000 * (y - 1), 1) and d.max() < 2000 * (y + 2)

    def test_unit_norm_and_reproducible(self):
        cfg = SynthConfig(K=4, p=0.2, n_samples=50, seed=9)
        a, b = gen_synthetic(cfg), gen_synthetic(cfg)
        assert [x for x, _ in a.labeled] == [x for x, _ in b.labeled]
        assert a.labels.tolist() == b.labels.tolist()
        assert all(abs(x.norm() - 1.0) <= 1e-9 for x in a.vectors)
        c = gen_synthetic(SynthConfig(K=4, p=0.2, n_samples=50, seed=10))
        assert a.vectors != c.vectors

    def test_labels_cover_classes(self):
        ds = gen_synthetic(SynthConfig(K=5, n_samples=500, seed=0))
        assert set(ds.labels.tolist()) == {1, 2, 3, 4, 5}


class TestLibsvm:
    def test_examples(self):
        d = parse_libsvm(io.StringIO("3 1:0.5 7:1.2\n0 2:1.0\n"))
        assert d.labels == [3, 0]
        assert d.vectors[0].entries() == [(0, 0.5), (6, 1.2)]
        assert d.vectors[1].entries() == [(1, 1.0)]
        assert d.dim == 7

    def test_decreasing_indices(self):
        with pytest.raises(ParseError) as exc:
            parse_libsvm(io.StringIO("1 1:1\n3 7:1.2 1:0.5\n"))
        assert exc.value.line == 2

    @pytest.mark.parametrize("line", ["x 1:1", "1 1:", "1 0:1", "1 a:1", "1 1:nan", "1 2"])
    def test_malformed(self, line):
        with pytest.raises(ParseError):
            parse_libsvm(io.StringIO(line + "\n"))

    def test_comments_and_blank_lines(self):
        d = parse_libsvm(io.StringIO("# header\n\n2 3:1\n"))
        assert d.labels == [2]

    def test_dim_override(self):
        assert parse_libsvm(io.StringIO("1 3:1\n"), dim=10).dim == 10
        with pytest.raises(ParseError):
            parse_libsvm(io.StringIO("1 11:1\n"), dim=10)

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.integers(0, 5),
                              st.dictionaries(st.integers(0, 30),
                                              st.floats(-1e3, 1e3, allow_nan=False)
                                              .filter(lambda v: v != 0),
                                              max_size=6)),
                    min_size=1, max_size=8))
    def test_round_trip(self, rows):
        vecs = [SparseVector.from_pairs(sorted(d.items()), 31) for _, d in rows]
        labels = [y for y, _ in rows]
        buf = io.StringIO()
        write_libsvm(buf, vecs, labels)
        first = parse_libsvm(io.StringIO(buf.getvalue()), dim=31)
        assert first.vectors == vecs and first.labels == labels
        buf2 = io.StringIO()
        write_libsvm(buf2, first.vectors, first.labels)
        assert buf2.getvalue() == buf.getvalue()

    def test_load_dataset_split(self, tmp_path):
        lab = tmp_path / "lab.txt"
        lab.write_text("1 1:1\n0 2:1\n3 3:1\n")
        unl = tmp_path / "unl.txt"
        unl.write_text("0 5:1\n")
        ds = load_dataset(lab, 3, unl)
        assert (ds.n, ds.u, ds.dim) == (2, 2, 5)
