"""Detection metrics (sensitivity / precision / F1) and diameter
relative-error statistics for evaluating stenosis findings against ground
truth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Point2
from .quant import StenosisFinding


@dataclass(frozen=True)
class DetectionOutcome:
    tp: int
    fn: int
    fp: int
    matches: tuple = ()   # (finding index, truth index, distance)


@dataclass(frozen=True)
class Metrics:
    sen: float | None     # None marks an undefined ratio (zero denominator)
    pre: float | None
    f1: float | None

    @property
    def defined(self) -> bool:
        return self.sen is not None and self.pre is not None and self.f1 is not None


@dataclass(frozen=True)
class REStats:
    values: tuple
    min: float
    max: float
    mean: float
    std: float            # population standard deviation


def match_findings(findings: list[StenosisFinding], truths: list[Point2],
                   radius: float = 10.0) -> DetectionOutcome:
    """Greedy nearest-pair matching of findings to truth locations.

    Pairs closer than radius are matched nearest-first (ties by finding
    then truth index); each side matches at most once. Unmatched findings
    count as false positives, unmatched truths as false negatives.
    """
    if radius <= 0:
        raise ValueError("matching radius must be positive")
    pairs = []
    for i, f in enumerate(findings):
        for j, t in enumerate(truths):
            d = f.location.dist(t)
            if d <= radius:
                pairs.append((d, i, j))
    pairs.sort()
    used_f: set[int] = set()
    used_t: set[int] = set()
    matches = []
    for d, i, j in pairs:
        if i in used_f or j in used_t:
            continue
        used_f.add(i)
        used_t.add(j)
        matches.append((i, j, d))
    tp = len(matches)
    return DetectionOutcome(tp=tp, fn=len(truths) - tp, fp=len(findings) - tp,
                            matches=tuple(matches))


def f1_score(sen: float, pre: float) -> float | None:
    """Harmonic combination of sensitivity and precision."""
    if sen + pre == 0:
        return None
    return 2.0 * pre * sen / (pre + sen)


def sen_pre_f1(outcome: DetectionOutcome) -> Metrics:
    """Sensitivity, precision, and F1 of a detection outcome.

    Ratios with zero denominators come back as None rather than NaN.
    """
    sen = outcome.tp / (outcome.tp + outcome.fn) if outcome.tp + outcome.fn > 0 else None
    pre = outcome.tp / (outcome.tp + outcome.fp) if outcome.tp + outcome.fp > 0 else None
    f1 = f1_score(sen, pre) if sen is not None and pre is not None else None
    return Metrics(sen, pre, f1)


def relative_error(estimated, real) -> REStats:
    """Elementwise |estimated - real| / real with summary statistics."""
    est = np.asarray(estimated, dtype=np.float64)
    ref = np.asarray(real, dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    if est.size == 0:
        raise ValueError("empty diameter lists")
    if (ref <= 0).any():
        raise ValueError("real diameters must be positive")
    re = np.abs(est - ref) / ref
    return REStats(tuple(float(v) for v in re),
                   float(re.min()), float(re.max()),
                   float(re.mean()), float(re.std()))


def re_table(rows: dict[str, REStats]) -> str:
    """Aligned-column text table of per-segment RE statistics."""
    lines = [f"{'Segment':<14} {'min':>8} {'max':>8} {'mean':>8} {'std':>8}"]
    for name, st in rows.items():
        lines.append(f"{name:<14} {st.min:>8.4f} {st.max:>8.4f} {st.mean:>8.4f} {st.std:>8.4f}")
    if rows:
        mins = [s.min for s in rows.values()]
        maxs = [s.max for s in rows.values()]
        means = [s.mean for s in rows.values()]
        stds = [s.std for s in rows.values()]
        lines.append(f"{'Mean':<14} {np.mean(mins):>8.4f} {np.mean(maxs):>8.4f} "
                     f"{np.mean(means):>8.4f} {np.mean(stds):>8.4f}")
    return "\n".join(lines)
