"""2x2 toggle-design estimation of the penalty components.

Each observation belongs to one of four regimes, labelled by two switches:
the first digit turns the latency constraint on, the second the order
constraint (``"10"`` = latency only).  Per-regime expected losses are
estimated with stabilised (Hajek) inverse-probability weights, the weight
being the product of a selection and a censoring weight, truncated at a
threshold.  Components follow from differences of regime losses under one
of two conventions, and a cluster bootstrap gives percentile intervals.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

REGIMES = ("00", "01", "10", "11")
SAMPLE_COLUMNS = ("regime", "y", "w_sel", "w_cens", "mhat", "cluster_id")
DEFAULT_TRUNC_PERCENTILE = 99.5
DEFAULT_MIN_ESS = 100.0


class Convention(str, enum.Enum):
    """How the latency penalty is read off the 2x2 table.

    ``SEQUENTIAL``: latency measured with the order constraint already on,
    ``g1 = L11 - L01``.  ``BASELINE``: both penalties are increments over
    the unconstrained regime, ``g1 = L10 - L00``.
    """

    SEQUENTIAL = "sequential"
    BASELINE = "baseline"


@dataclass(frozen=True)
class WeightedSample:
    y: float
    w_sel: float
    w_cens: float
    regime: str
    cluster_id: object
    mhat: float | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        for name in ("w_sel", "w_cens"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if not math.isfinite(self.y):
            raise ValueError("y must be finite")
        if self.mhat is not None and not math.isfinite(self.mhat):
            raise ValueError("mhat must be finite when given")


class SampleFrame:
    """Column-oriented samples; what the estimators actually run on.

    Build one with :meth:`from_samples` or :func:`read_samples_csv`.
    ``mhat`` is NaN where missing.
    """

    def __init__(self, regime, y, w_sel, w_cens, cluster_id, mhat=None):
        self.regime = np.asarray(regime, dtype=np.int8)
        self.y = np.asarray(y, dtype=float)
        self.w_sel = np.asarray(w_sel, dtype=float)
        self.w_cens = np.asarray(w_cens, dtype=float)
        n = self.y.size
        self.mhat = np.full(n, np.nan) if mhat is None else np.asarray(mhat, dtype=float)
        labels, codes = np.unique(np.asarray(cluster_id), return_inverse=True)
        self.cluster_labels = labels
        self.cluster = codes.reshape(-1).astype(np.intp)
        for name in ("regime", "w_sel", "w_cens", "mhat", "cluster"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"column {name} has the wrong length")
        if np.any((self.regime < 0) | (self.regime > 3)):
            raise ValueError("regime codes must be 0..3")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("y must be finite")
        w = self.w_sel * self.w_cens
        if not np.all(np.isfinite(w)) or np.any(self.w_sel <= 0) or np.any(self.w_cens <= 0):
            raise ValueError("weights must be finite and strictly positive")

    @classmethod
    def from_samples(cls, samples: Iterable[WeightedSample]) -> "SampleFrame":
        samples = list(samples)
        return cls(
            [REGIMES.index(s.regime) for s in samples],
            [s.y for s in samples],
            [s.w_sel for s in samples],
            [s.w_cens for s in samples],
            [s.cluster_id for s in samples],
            [np.nan if s.mhat is None else s.mhat for s in samples],
        )

    def __len__(self):
        return self.y.size

    @property
    def weights(self) -> np.ndarray:
        return self.w_sel * self.w_cens

    @property
    def has_mhat(self) -> bool:
        return bool(np.all(np.isfinite(self.mhat)))

    @property
    def n_clusters(self) -> int:
        return self.cluster_labels.size

    def take(self, mask) -> "SampleFrame":
        out = object.__new__(SampleFrame)
        for name in ("regime", "y", "w_sel", "w_cens", "mhat", "cluster"):
            setattr(out, name, getattr(self, name)[mask])
        out.cluster_labels = self.cluster_labels
        return out

    def regime_slice(self, regime: str) -> "SampleFrame":
        return self.take(self.regime == REGIMES.index(regime))

    def to_samples(self) -> list[WeightedSample]:
        return [
            WeightedSample(
                float(self.y[i]), float(self.w_sel[i]), float(self.w_cens[i]), REGIMES[self.regime[i]],
                self.cluster_labels[self.cluster[i]].item(),
                None if math.isnan(self.mhat[i]) else float(self.mhat[i]),
            )
            for i in range(len(self))
        ]


def as_frame(samples) -> SampleFrame:
    if isinstance(samples, SampleFrame):
        return samples
    return SampleFrame.from_samples(samples)


def read_samples_csv(path) -> SampleFrame:
    """Read ``regime,y,w_sel,w_cens,mhat,cluster_id`` (``mhat`` may be blank)."""
    cols = {k: [] for k in SAMPLE_COLUMNS}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SAMPLE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                if row["regime"] not in REGIMES:
                    raise ValueError(f"bad regime {row['regime']!r}")
                cols["regime"].append(REGIMES.index(row["regime"]))
                for k in ("y", "w_sel", "w_cens"):
                    cols[k].append(float(row[k]))
                m = (row["mhat"] or "").strip()
                cols["mhat"].append(float(m) if m else np.nan)
                cols["cluster_id"].append(row["cluster_id"])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}, line {lineno}: {exc}") from None
    if not cols["y"]:
        raise ValueError(f"{path}: no rows")
    return SampleFrame(cols["regime"], cols["y"], cols["w_sel"], cols["w_cens"], cols["cluster_id"], cols["mhat"])


def write_samples_csv(frame: SampleFrame, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(SAMPLE_COLUMNS)
        for i in range(len(frame)):
            m = frame.mhat[i]
            out.writerow([
                REGIMES[frame.regime[i]], repr(float(frame.y[i])), repr(float(frame.w_sel[i])),
                repr(float(frame.w_cens[i])), "" if math.isnan(m) else repr(float(m)),
                frame.cluster_labels[frame.cluster[i]],
            ])


# -- weighted means --------------------------------------------------------


class WeightedMean(NamedTuple):
    estimate: float
    ess: float
    clipping_pct: float  # fraction in [0, 1] of samples whose raw weight exceeded the threshold
    trunc_threshold: float
    n: int
    untruncated_estimate: float


def effective_sample_size(w) -> float:
    w = np.asarray(w, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def default_threshold(w) -> float:
    return float(np.percentile(w, DEFAULT_TRUNC_PERCENTILE))


def _prepare(samples, trunc_c):
    frame = as_frame(samples)
    if len(frame) == 0:
        raise ValueError("no samples")
    w = frame.weights
    c = default_threshold(w) if trunc_c is None else float(trunc_c)
    if trunc_c is not None and not c >= 1:
        raise ValueError("trunc_c must be >= 1")
    return frame, w, np.minimum(w, c), c


def ipw_mean(samples, trunc_c: float | None = None) -> WeightedMean:
    """Hajek mean ``sum(w y) / sum(w)`` with weights truncated at ``trunc_c``.

    ``trunc_c`` defaults to the 99.5th percentile of the raw weights.  The
    untruncated estimate is returned alongside for comparison.
    """
    frame, w, wt, c = _prepare(samples, trunc_c)
    y = frame.y
    return WeightedMean(
        float(wt @ y / wt.sum()),
        effective_sample_size(wt),
        float(np.mean(w > c)),
        c,
        len(frame),
        float(w @ y / w.sum()),
    )


def dr_mean(samples, trunc_c: float | None = None) -> WeightedMean:
    """Augmented estimate ``mean(mhat) + sum(w (y - mhat)) / sum(w)``."""
    frame, w, wt, c = _prepare(samples, trunc_c)
    if not frame.has_mhat:
        raise ValueError("dr_mean needs an outcome prediction (mhat) on every sample")
    resid = frame.y - frame.mhat
    base = float(frame.mhat.mean())
    return WeightedMean(
        base + float(wt @ resid / wt.sum()),
        effective_sample_size(wt),
        float(np.mean(w > c)),
        c,
        len(frame),
        base + float(w @ resid / w.sum()),
    )


def truncation_bias_bound(samples, trunc_c: float, y_sup: float, tail_kappa: float | None = None) -> float:
    """``P(w > c) * y_sup + tail_kappa / c``.

    ``tail_kappa`` is the constant of the ``O(1/c)`` remainder.  It has no
    principled default; when omitted it is taken as 0 and a warning says so.
    """
    frame = as_frame(samples)
    if trunc_c <= 0:
        raise ValueError("trunc_c must be positive")
    if y_sup < float(np.max(np.abs(frame.y))):
        raise ValueError("y_sup is below the largest observed |y|")
    if tail_kappa is None:
        warnings.warn("tail_kappa not supplied; using 0, which ignores the O(1/c) remainder", UserWarning,
                      stacklevel=2)
        tail_kappa = 0.0
    if tail_kappa < 0:
        raise ValueError("tail_kappa must be >= 0")
    return float(np.mean(frame.weights > trunc_c)) * y_sup + tail_kappa / trunc_c


# -- regime table and components -------------------------------------------


@dataclass(frozen=True)
class RegimeDiagnostics:
    n: int
    ess: float
    clipping_pct: float
    trunc_threshold: float
    untruncated_estimate: float


@dataclass(frozen=True)
class RegimeTable:
    L00: float
    L01: float
    L10: float
    L11: float
    diagnostics: Mapping[str, RegimeDiagnostics] = field(default_factory=dict)

    def loss(self, regime: str) -> float:
        return getattr(self, "L" + regime)

    def to_dict(self) -> dict:
        return {
            "losses": {r: self.loss(r) for r in REGIMES},
            "diagnostics": {r: vars(d).copy() for r, d in self.diagnostics.items()},
        }


def build_regime_table(samples, trunc_c: float | Mapping[str, float] | None = None,
                       estimator: str = "ipw") -> RegimeTable:
    """Estimate the four regime losses.

    ``trunc_c`` may be one threshold for all regimes or one per regime;
    missing thresholds default to each regime's 99.5th weight percentile.
    ``estimator`` is ``"ipw"`` or ``"dr"``.
    """
    frame = as_frame(samples)
    fn = {"ipw": ipw_mean, "dr": dr_mean}.get(estimator)
    if fn is None:
        raise ValueError(f"estimator must be 'ipw' or 'dr', not {estimator!r}")
    losses, diags = {}, {}
    for r in REGIMES:
        part = frame.regime_slice(r)
        if len(part) == 0:
            raise ValueError(f"no samples in regime {r}")
        c = trunc_c.get(r) if isinstance(trunc_c, Mapping) else trunc_c
        m = fn(part, c)
        losses["L" + r] = m.estimate
        diags[r] = RegimeDiagnostics(m.n, m.ess, m.clipping_pct, m.trunc_threshold, m.untruncated_estimate)
    return RegimeTable(diagnostics=diags, **losses)


class Interval(NamedTuple):
    lo: float
    hi: float


@dataclass(frozen=True)
class ComponentEstimates:
    g1_hat: float
    g2_hat: float
    g12_hat: float
    convention: Convention
    lower_bound: float
    ci: Mapping[str, Interval] | None = None
    sutva_interval: Interval | None = None

    @property
    def g12_clipped(self) -> float:
        return max(0.0, self.g12_hat)

    def to_dict(self) -> dict:
        out = {
            "g1_hat": self.g1_hat,
            "g2_hat": self.g2_hat,
            "g12_hat": self.g12_hat,
            "g12_clipped": self.g12_clipped,
            "convention": self.convention.value,
            "lower_bound": self.lower_bound,
        }
        if self.ci is not None:
            out["ci"] = {k: list(v) for k, v in self.ci.items()}
        if self.sutva_interval is not None:
            out["sutva_interval"] = list(self.sutva_interval)
        return out


def _components(L00, L01, L10, L11, convention):
    g2 = L01 - L00
    g1 = L11 - L01 if convention is Convention.SEQUENTIAL else L10 - L00
    g12 = L11 - L01 - L10 + L00
    return g1, g2, g12


def estimate_components(table: RegimeTable, convention: Convention | str,
                        delta_sutva: float | None = None) -> ComponentEstimates:
    """Component estimates from a regime table.

    Both conventions share ``g2 = L01 - L00`` and
    ``g12 = L11 - L01 - L10 + L00``; they differ on ``g1`` (see
    :class:`Convention`).  There is deliberately no default convention.
    """
    convention = Convention(convention)
    g1, g2, g12 = _components(table.L00, table.L01, table.L10, table.L11, convention)
    est = ComponentEstimates(g1, g2, g12, convention, 0.0)
    d = 0.0 if delta_sutva is None else delta_sutva
    sutva = None if delta_sutva is None else sutva_interval(g12, delta_sutva)
    return ComponentEstimates(g1, g2, g12, convention, empirical_lower_bound(est, d), sutva_interval=sutva)


def empirical_lower_bound(est: ComponentEstimates, delta_sutva: float = 0.0) -> float:
    """``g2 + g1 + max(0, g12) - delta_sutva``, floored at 0."""
    if delta_sutva < 0:
        raise ValueError("delta_sutva must be >= 0")
    return max(0.0, est.g2_hat + est.g1_hat + est.g12_clipped - delta_sutva)


def sutva_interval(g12_naive: float, delta_sutva: float) -> Interval:
    if delta_sutva < 0:
        raise ValueError("delta_sutva must be >= 0")
    return Interval(g12_naive - delta_sutva, g12_naive + delta_sutva)


def ess_guardrail(diag, min_ess: float = DEFAULT_MIN_ESS) -> str:
    """``"guarantee"`` if every regime's ESS is at least ``min_ess``, else
    ``"monitoring_only"``.

    ``diag`` is a :class:`RegimeTable`, a mapping of regime to diagnostics
    (anything with an ``ess`` attribute or key), or a mapping to plain ESS
    values.
    """
    if not min_ess > 0:
        raise ValueError("min_ess must be positive")
    if isinstance(diag, RegimeTable):
        diag = diag.diagnostics
    for d in diag.values():
        ess = d if isinstance(d, (int, float)) else (d["ess"] if isinstance(d, Mapping) else d.ess)
        if ess < min_ess:
            return "monitoring_only"
    return "guarantee"


# -- cluster bootstrap -----------------------------------------------------

STATISTICS = ("g1", "g2", "g12", "g12_clipped", "lower_bound", "L00", "L01", "L10", "L11")


def _cluster_sums(frame: SampleFrame, thresholds: Mapping[str, float]):
    """Per (cluster, regime) sufficient statistics of the Hajek/DR means."""
    k = frame.n_clusters
    idx = frame.cluster * 4 + frame.regime
    w = frame.weights
    c = np.array([thresholds[r] for r in REGIMES])[frame.regime]
    wt = np.minimum(w, c)
    size = 4 * k

    def total(v):
        return np.bincount(idx, weights=v, minlength=size).reshape(k, 4)

    sums = {
        "n": np.bincount(idx, minlength=size).reshape(k, 4).astype(float),
        "w": total(wt),
        "wy": total(wt * frame.y),
    }
    if frame.has_mhat:
        sums["m"] = total(frame.mhat)
        sums["wm"] = total(wt * frame.mhat)
    return sums


def _losses_from_counts(counts: np.ndarray, sums, estimator: str) -> np.ndarray:
    """Regime losses for each row of cluster multiplicities; shape (B, 4)."""
    sw = counts @ sums["w"]
    est = (counts @ sums["wy"]) / sw
    if estimator == "dr":
        est = (counts @ sums["m"]) / (counts @ sums["n"]) + est - (counts @ sums["wm"]) / sw
    return est


def _statistic_values(losses: np.ndarray, statistic, convention) -> np.ndarray:
    if callable(statistic):
        return np.array([
            float(statistic(RegimeTable(*map(float, row)))) for row in losses
        ])
    if statistic not in STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}; choose from {STATISTICS} or pass a callable")
    L00, L01, L10, L11 = losses.T
    if statistic.startswith("L"):
        return losses[:, REGIMES.index(statistic[1:])]
    if convention is None:
        raise ValueError("component statistics need an explicit convention")
    g1, g2, g12 = _components(L00, L01, L10, L11, Convention(convention))
    return {
        "g1": g1,
        "g2": g2,
        "g12": g12,
        "g12_clipped": np.maximum(g12, 0.0),
        "lower_bound": np.maximum(0.0, g1 + g2 + np.maximum(g12, 0.0)),
    }[statistic]


def cluster_bootstrap(samples, statistic: str | Callable[[RegimeTable], float], n_boot: int = 1000,
                      confidence: float = 0.95, seed: int = 0, convention: Convention | str | None = None,
                      trunc_c: float | Mapping[str, float] | None = None, estimator: str = "ipw") -> Interval:
    """Percentile interval from resampling whole clusters.

    Clusters are resampled with replacement within strata of clusters that
    cover the same set of regimes, so every replicate sees every regime.
    Truncation thresholds are fixed from the full sample.  Each replicate
    draws from its own generator spawned from ``seed``, so the result does
    not depend on evaluation order.
    """
    frame = as_frame(samples)
    if frame.n_clusters < 2:
        raise ValueError("cluster bootstrap needs at least two distinct clusters")
    if n_boot < 100:
        raise ValueError("n_boot must be >= 100")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    if estimator not in ("ipw", "dr"):
        raise ValueError(f"estimator must be 'ipw' or 'dr', not {estimator!r}")
    if estimator == "dr" and not frame.has_mhat:
        raise ValueError("dr estimator needs mhat on every sample")

    table = build_regime_table(frame, trunc_c, estimator)
    thresholds = {r: d.trunc_threshold for r, d in table.diagnostics.items()}
    sums = _cluster_sums(frame, thresholds)

    signature = (sums["n"] > 0) @ (1 << np.arange(4))
    strata = [np.flatnonzero(signature == s) for s in np.unique(signature)]
    k = frame.n_clusters
    counts = np.zeros((n_boot, k))
    for b, child in enumerate(np.random.SeedSequence(seed).spawn(n_boot)):
        rng = np.random.default_rng(child)
        for members in strata:
            draw = members[rng.integers(0, members.size, size=members.size)]
            counts[b] += np.bincount(draw, minlength=k)

    losses = _losses_from_counts(counts, sums, estimator)
    values = _statistic_values(losses, statistic, convention)
    alpha = 1.0 - confidence
    lo, hi = np.quantile(values, [alpha / 2, 1 - alpha / 2])
    return Interval(float(lo), float(hi))
