"""Composite scoring across structured and unstructured outputs, plus batch reports."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import metrics
from .errors import DataError

STRUCTURED = "structured"
UNSTRUCTURED = "unstructured"
BRANCHES = (STRUCTURED, UNSTRUCTURED)

REQUIRED = {
    STRUCTURED: ("bleu", "rouge1", "rouge2", "rougeL", "accuracy"),
    UNSTRUCTURED: ("fluency", "accuracy", "relevance"),
}


@dataclass
class ScoreComponents:
    bleu: float | None = None
    rouge1: float | None = None
    rouge2: float | None = None
    rougeL: float | None = None
    accuracy: float | None = None
    fluency: float | None = None
    relevance: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{f.name}={v} outside [0, 1]")

    def present(self) -> dict[str, float]:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class CompositeWeights:
    branch: str = UNSTRUCTURED
    c: tuple[float, float, float, float, float] = (0.2, 0.2, 0.2, 0.2, 0.2)
    # recovered from the published per-model score table
    d: tuple[float, float, float] = (0.3, 0.3, 0.4)

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}")
        object.__setattr__(self, "c", tuple(float(x) for x in self.c))
        object.__setattr__(self, "d", tuple(float(x) for x in self.d))
        if len(self.c) != 5 or len(self.d) != 3:
            raise ValueError("expected 5 structured and 3 unstructured weights")
        if any(w < 0 for w in self.c + self.d):
            raise ValueError("weights must be non-negative")
        active = self.c if self.branch == STRUCTURED else self.d
        if sum(active) <= 0:
            raise ValueError(f"all {self.branch} weights are zero")

    def with_branch(self, branch: str) -> "CompositeWeights":
        return CompositeWeights(branch, self.c, self.d)

    @property
    def raw_max(self) -> float:
        if self.branch == STRUCTURED:
            return sum(self.c)
        d1, d2, d3 = self.d
        return d1 + d2 * math.log(2) + d3 * math.e


def _raw(comp: ScoreComponents, weights: CompositeWeights) -> float:
    missing = [k for k in REQUIRED[weights.branch] if getattr(comp, k) is None]
    if missing:
        raise DataError(f"{weights.branch} branch needs {', '.join(missing)}")
    if weights.branch == STRUCTURED:
        c1, c2, c3, c4, c5 = weights.c
        return (
            c1 * comp.bleu
            + c2 * comp.rouge1
            + c3 * comp.rouge2
            + c4 * comp.rougeL
            + c5 * comp.accuracy**2
        )
    d1, d2, d3 = weights.d
    return d1 * comp.fluency + d2 * math.log(comp.accuracy + 1) + d3 * math.exp(comp.relevance)


def composite_score(components: ScoreComponents, weights: CompositeWeights) -> tuple[float, float]:
    """Return ``(raw, percent)``; percent is raw relative to the all-ones maximum of the branch."""
    raw = _raw(components, weights)
    percent = 100.0 * raw / weights.raw_max
    return raw, min(100.0, max(0.0, percent))


# -- batch evaluation ------------------------------------------------------


@dataclass
class Scorers:
    """Pluggable per-item scorers for the unstructured branch.

    ``fluency(candidate)`` and ``relevance(candidate, reference)`` return
    values in [0, 1], typically from a judge model.
    """

    fluency: Callable[[str], float] | None = None
    relevance: Callable[[str, str], float] | None = None
    embedder: metrics.Embedder | None = None


def structured_components(candidate: str, reference: str) -> ScoreComponents:
    c, r = metrics.tokenize(candidate), metrics.tokenize(reference)
    return ScoreComponents(
        bleu=metrics.bleu(c, r),
        rouge1=metrics.rouge(c, r, "r1"),
        rouge2=metrics.rouge(c, r, "r2"),
        rougeL=metrics.rouge(c, r, "rL"),
        accuracy=metrics.exact_match_accuracy([candidate], [reference]),
    )


def unstructured_components(candidate: str, reference: str, scorers: Scorers) -> ScoreComponents:
    if scorers.fluency is None or scorers.relevance is None:
        raise DataError("unstructured scoring needs fluency and relevance scorers")
    return ScoreComponents(
        fluency=scorers.fluency(candidate),
        accuracy=metrics.semantic_accuracy(candidate, reference, scorers.embedder),
        relevance=scorers.relevance(candidate, reference),
    )


@dataclass
class ItemScore:
    index: int
    components: ScoreComponents | None = None
    raw: float | None = None
    percent: float | None = None
    error: str | None = None

    @property
    def scored(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "components": self.components.present() if self.components else None,
            "raw": self.raw,
            "percent": self.percent,
            "error": self.error,
        }


@dataclass
class ScoreReport:
    branch: str
    weights: CompositeWeights
    items: list[ItemScore]
    means: dict[str, float] = field(default_factory=dict)
    histogram: dict | None = None

    @property
    def scored(self) -> list[ItemScore]:
        return [it for it in self.items if it.scored]

    @property
    def failed(self) -> list[ItemScore]:
        return [it for it in self.items if not it.scored]

    def to_dict(self) -> dict:
        return {
            "branch": self.branch,
            "weights": {"c": list(self.weights.c), "d": list(self.weights.d)},
            "n_items": len(self.items),
            "n_scored": len(self.scored),
            "means": self.means,
            "histogram": self.histogram,
            "items": [it.to_dict() for it in self.items],
        }


def _aggregate(items: list[ItemScore]) -> dict[str, float]:
    scored = [it for it in items if it.scored]
    if not scored:
        return {}
    keys = scored[0].components.present().keys()
    means = {k: float(np.mean([it.components.present()[k] for it in scored])) for k in keys}
    means["raw"] = float(np.mean([it.raw for it in scored]))
    means["percent"] = float(np.mean([it.percent for it in scored]))
    return means


def histogram(scores: Sequence[float], bins: int = 10) -> dict:
    counts, edges = np.histogram(np.asarray(scores, float), bins=bins, range=(0.0, 100.0))
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def evaluate_batch(
    items: Sequence[tuple[str, str]],
    mode: str,
    weights: CompositeWeights | None = None,
    scorers: Scorers | None = None,
    workers: int = 1,
    bins: int = 10,
) -> ScoreReport:
    """Score each (candidate, reference) pair and aggregate.

    A failing item is recorded with its error and left out of the means.
    """
    if not items:
        raise DataError("no items to evaluate")
    if mode not in BRANCHES:
        raise ValueError(f"mode must be one of {BRANCHES}")
    weights = (weights or CompositeWeights()).with_branch(mode)
    scorers = scorers or Scorers()

    def score_one(idx: int) -> ItemScore:
        candidate, reference = items[idx]
        try:
            if mode == STRUCTURED:
                comp = structured_components(candidate, reference)
            else:
                comp = unstructured_components(candidate, reference, scorers)
            raw, pct = composite_score(comp, weights)
        except Exception as exc:  # recorded per item, batch continues
            return ItemScore(idx, error=f"{type(exc).__name__}: {exc}")
        return ItemScore(idx, comp, raw, pct)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(score_one, range(len(items))))
    else:
        results = [score_one(i) for i in range(len(items))]

    report = ScoreReport(mode, weights, results, _aggregate(results))
    if report.scored:
        report.histogram = histogram([it.percent for it in report.scored], bins)
    return report


def distribution_report(
    system_scores: Sequence[float], human_scores: Sequence[float], bins: int = 10
) -> dict:
    """Side-by-side histograms (shared edges over [0, 100]) and summary statistics.

    The Spearman correlation is only computed for paired lists of equal
    length; a constant list makes it ``"degenerate"``.
    """
    if not system_scores or not human_scores:
        raise DataError("both score lists must be non-empty")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    sys_a = np.asarray(system_scores, float)
    hum_a = np.asarray(human_scores, float)

    def side(a):
        h = histogram(a, bins)
        return {
            "n": int(a.size),
            "mean": float(a.mean()),
            "std": float(a.std(ddof=0)),
            "counts": h["counts"],
        }

    if sys_a.size != hum_a.size:
        corr = None
    elif np.ptp(sys_a) == 0 or np.ptp(hum_a) == 0:
        corr = "degenerate"
    else:
        corr = float(stats.spearmanr(sys_a, hum_a).statistic)
    return {
        "bins": bins,
        "edges": histogram(sys_a, bins)["edges"],
        "system": side(sys_a),
        "human": side(hum_a),
        "spearman": corr,
    }


def format_distribution(report: dict, width: int = 30) -> str:
    """Plain-text rendering: one row per bin with both counts as bars."""
    edges = report["edges"]
    s_counts, h_counts = report["system"]["counts"], report["human"]["counts"]
    peak = max(max(s_counts), max(h_counts), 1)
    lines = [f"{'bin':>13}  {'system':<{width + 5}} human"]
    for i, (s, h) in enumerate(zip(s_counts, h_counts)):
        label = f"[{edges[i]:5.1f},{edges[i + 1]:5.1f})"
        bar_s = "#" * round(width * s / peak)
        bar_h = "#" * round(width * h / peak)
        lines.append(f"{label:>13}  {bar_s:<{width}} {s:4d} {bar_h:<{width}} {h:4d}")
    for name in ("system", "human"):
        side = report[name]
        lines.append(f"{name}: n={side['n']} mean={side['mean']:.2f} std={side['std']:.2f}")
    corr = report["spearman"]
    lines.append(f"spearman: {corr if isinstance(corr, str) or corr is None else f'{corr:.4f}'}")
    return "\n".join(lines)
