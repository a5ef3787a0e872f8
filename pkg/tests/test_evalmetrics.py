import numpy as np
import pytest

from angiokit import evalmetrics as em
from angiokit.core import Point2
from angiokit.quant import StenosisFinding


def _finding(x, y, idx=0):
    return StenosisFinding(segment_id=idx, point_range=(0, 2),
                           location=Point2(x, y), min_degree=0.5, mean_degree=0.6)


class TestMatching:
    def test_exact_match(self):
        out = em.match_findings([_finding(10, 10)], [Point2(10, 10)])
        assert (out.tp, out.fn, out.fp) == (1, 0, 0)

    def test_all_missed(self):
        out = em.match_findings([], [Point2(1, 1), Point2(5, 5)])
        assert (out.tp, out.fn, out.fp) == (0, 2, 0)

    def test_double_detection_single_match(self):
        out = em.match_findings([_finding(10, 10), _finding(12, 10, 1)], [Point2(11, 10)])
        assert (out.tp, out.fn, out.fp) == (1, 0, 1)

    def test_radius_limits_matching(self):
        out = em.match_findings([_finding(0, 0)], [Point2(0, 30)], radius=10)
        assert (out.tp, out.fn, out.fp) == (0, 1, 1)

    def test_permutation_invariant(self):
        findings = [_finding(3, 3), _finding(20, 20, 1), _finding(40, 5, 2)]
        truths = [Point2(21, 20), Point2(2, 3)]
        a = em.match_findings(findings, truths)
        b = em.match_findings(findings[::-1], truths[::-1])
        assert (a.tp, a.fn, a.fp) == (b.tp, b.fn, b.fp)

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            em.match_findings([], [], radius=0)


class TestSenPreF1:
    def test_arithmetic(self):
        m = em.sen_pre_f1(em.DetectionOutcome(tp=3, fn=1, fp=0))
        assert m.sen == pytest.approx(0.75)
        assert m.pre == pytest.approx(1.0)
        assert m.f1 == pytest.approx(0.857, abs=1e-3)

    def test_published_row(self):
        # Sen 0.757, Pre 0.821 combine to F1 = 0.788.
        f1 = em.f1_score(0.757, 0.821)
        assert f1 == pytest.approx(0.788, abs=1e-3)

    def test_degenerate_flags(self):
        m = em.sen_pre_f1(em.DetectionOutcome(tp=0, fn=0, fp=0))
        assert m.sen is None and m.pre is None and m.f1 is None
        assert not m.defined

    def test_f1_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            sen = rng.uniform(0.01, 1.0)
            pre = rng.uniform(0.01, 1.0)
            f1 = em.f1_score(sen, pre)
            assert min(sen, pre) - 1e-12 <= f1 <= max(sen, pre) + 1e-12
            assert f1 == pytest.approx(em.f1_score(pre, sen))


class TestRelativeError:
    def test_simple(self):
        st = em.relative_error([1.1], [1.0])
        assert st.values == (pytest.approx(0.1),)
        assert st.mean == pytest.approx(0.1)

    def test_identity(self):
        st = em.relative_error([2.0, 3.0], [2.0, 3.0])
        assert st.mean == 0.0 and st.max == 0.0

    def test_mixed(self):
        st = em.relative_error([2.0, 4.0], [4.0, 4.0])
        assert st.values == (pytest.approx(0.5), pytest.approx(0.0))
        assert st.mean == pytest.approx(0.25)
        assert st.std == pytest.approx(0.25)  # population std

    def test_errors(self):
        with pytest.raises(ValueError):
            em.relative_error([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            em.relative_error([1.0], [0.0])
        with pytest.raises(ValueError):
            em.relative_error([], [])

    def test_scale_awareness(self):
        rng = np.random.default_rng(1)
        est = rng.uniform(1, 10, 20)
        real = rng.uniform(1, 10, 20)
        base = em.relative_error(est, real)
        scaled = em.relative_error(3.7 * est, 3.7 * real)
        assert np.allclose(scaled.values, base.values)

    def test_stats_consistent(self):
        rng = np.random.default_rng(2)
        est = rng.uniform(1, 10, 30)
        real = rng.uniform(1, 10, 30)
        st = em.relative_error(est, real)
        vals = np.array(st.values)
        assert st.min == pytest.approx(vals.min(), abs=1e-12)
        assert st.max == pytest.approx(vals.max(), abs=1e-12)
        assert st.mean == pytest.approx(vals.mean(), abs=1e-12)
        assert st.std == pytest.approx(vals.std(), abs=1e-12)


def test_re_table_layout():
    rows = {"V1": em.relative_error([1.2], [1.0]), "V2": em.relative_error([0.9], [1.0])}
    table = em.re_table(rows)
    lines = table.splitlines()
    assert lines[0].split() == ["Segment", "min", "max", "mean", "std"]
    assert lines[-1].startswith("Mean")
    assert len(lines) == 4
