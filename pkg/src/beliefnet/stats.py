"""Analysis layer: correlations, random-effects pooling, change effects.

Conventions used throughout: two-sided p-values; Fisher z-transformed
correlations carry variance 1/(n - 3); between-group heterogeneity is
estimated with the DerSimonian-Laird moment estimator; standardized mean
change divides the mean paired difference by the change-score standard
deviation (pre-score standardization is available behind a switch). The
pre/post energy effect is oriented so that d > 0 means energies dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import AggregationError, DimensionError, DomainError
from .panel import PanelDataset, ResidualDataset


# ---------------------------------------------------------------------------
# correlations


@dataclass(frozen=True)
class CorrelationTest:
    r: float
    t: float
    df: int
    p: float
    n: int


def pearson(x, y) -> CorrelationTest:
    """Product-moment correlation with its t-test, t = r sqrt(df / (1 - r^2))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError("pearson expects two equally long vectors")
    n = x.size
    if n < 3:
        raise DimensionError("pearson needs n >= 3")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = math.sqrt(float(xd @ xd))
    sy = math.sqrt(float(yd @ yd))
    if sx == 0.0 or sy == 0.0:
        raise DomainError("correlation undefined: zero variance")
    r = float(xd @ yd) / (sx * sy)
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        t = math.inf if r > 0 else -math.inf
        p = 0.0
    else:
        t = r * math.sqrt(df / (1.0 - r * r))
        p = float(2.0 * sps.t.sf(abs(t), df))
    return CorrelationTest(r=r, t=t, df=df, p=p, n=n)


def fisher_z(r: float) -> float:
    """Fisher z-transform arctanh(r); requires |r| < 1."""
    if not -1.0 < r < 1.0:
        raise DomainError(f"fisher z undefined for r = {r}")
    return float(np.arctanh(r))


def inverse_fisher_z(z: float) -> float:
    """Back-transform tanh(z)."""
    return float(np.tanh(z))


# ---------------------------------------------------------------------------
# effect sizes and meta-analysis


@dataclass(frozen=True)
class EffectEstimate:
    """One group-level effect: a correlation or a standardized mean change."""

    kind: str
    value: float
    se: float
    n: int
    group: str
    topic: str | None = None

    def __post_init__(self):
        if self.kind not in ("correlation", "mean-change"):
            raise DomainError(f"unknown effect kind {self.kind!r}")
        if self.kind == "correlation" and not -1.0 < self.value < 1.0:
            raise DomainError(f"correlation effect out of range: {self.value}")
        if self.se <= 0:
            raise DomainError("effect standard error must be positive")


def correlation_effect(r: float, n: int, group: str, topic=None) -> EffectEstimate:
    """Wrap a correlation as an effect with Fisher-z variance 1/(n - 3)."""
    if n <= 3:
        raise DimensionError("correlation effect needs n > 3")
    return EffectEstimate(
        kind="correlation",
        value=r,
        se=math.sqrt(1.0 / (n - 3)),
        n=n,
        group=group,
        topic=topic,
    )


@dataclass(frozen=True)
class MetaResult:
    """Random-effects pool of group effects (DerSimonian-Laird)."""

    kind: str
    pooled: float
    pooled_raw: float
    se: float
    tau2: float
    q: float
    z: float
    p: float
    n_groups: int
    weights: tuple[tuple[str, float], ...]


def meta_random_effects(estimates) -> MetaResult:
    """Pool effects with inverse-variance weights 1 / (v_i + tau^2).

    Correlations enter on the Fisher-z scale with variance 1/(n - 3) and
    the pooled value is back-transformed to a correlation; mean changes
    enter as-is with their squared standard errors. tau^2 is the
    DerSimonian-Laird moment estimate, truncated at zero.
    """
    estimates = list(estimates)
    if len(estimates) < 2:
        raise AggregationError("meta-analysis needs at least 2 estimates")
    kinds = {e.kind for e in estimates}
    if len(kinds) != 1:
        raise AggregationError(f"mixed effect kinds: {sorted(kinds)}")
    kind = kinds.pop()
    if kind == "correlation":
        y = np.array([fisher_z(e.value) for e in estimates])
        v = np.array([1.0 / (e.n - 3) for e in estimates])
    else:
        y = np.array([e.value for e in estimates])
        v = np.array([e.se**2 for e in estimates])
    w = 1.0 / v
    y_fixed = float((w * y).sum() / w.sum())
    q = float((w * (y - y_fixed) ** 2).sum())
    df = len(estimates) - 1
    c = float(w.sum() - (w**2).sum() / w.sum())
    tau2 = max(0.0, (q - df) / c) if c > 0 else 0.0
    w_star = 1.0 / (v + tau2)
    pooled_raw = float((w_star * y).sum() / w_star.sum())
    se = math.sqrt(1.0 / w_star.sum())
    z = pooled_raw / se
    p = float(2.0 * sps.norm.sf(abs(z)))
    pooled = inverse_fisher_z(pooled_raw) if kind == "correlation" else pooled_raw
    norm_w = w_star / w_star.sum()
    return MetaResult(
        kind=kind,
        pooled=pooled,
        pooled_raw=pooled_raw,
        se=se,
        tau2=tau2,
        q=q,
        z=z,
        p=p,
        n_groups=len(estimates),
        weights=tuple((e.group, float(wi)) for e, wi in zip(estimates, norm_w)),
    )


@dataclass(frozen=True)
class MeanChange:
    """Paired pre/post effect: raw mean difference and standardized change."""

    md: float
    d: float
    se: float
    t: float
    df: int
    p: float
    n: int


def standardized_mean_change(pre, post, standardizer: str = "change") -> MeanChange:
    """Standardized mean change of paired scores, oriented as pre - post.

    d = mean(pre - post) / sd, where sd is the change-score standard
    deviation (default) or the pre-score standard deviation
    (``standardizer="pre"``); SE = sqrt(1/n + d^2 / (2n)). With energies as
    input, d > 0 means energies decreased. The paired t-test always uses
    the change-score denominator.
    """
    pre = np.asarray(pre, dtype=float)
    post = np.asarray(post, dtype=float)
    if pre.shape != post.shape or pre.ndim != 1:
        raise DimensionError("paired samples must be equally long vectors")
    n = pre.size
    if n < 3:
        raise DimensionError("standardized mean change needs n >= 3")
    diff = pre - post
    md = float(diff.mean())
    sd_change = float(diff.std(ddof=1))
    if standardizer == "change":
        sd = sd_change
    elif standardizer == "pre":
        sd = float(pre.std(ddof=1))
    else:
        raise DomainError(f"unknown standardizer {standardizer!r}")
    if md == 0.0 and sd_change == 0.0:
        # no change at all: define d = t = 0 rather than 0/0
        return MeanChange(md=0.0, d=0.0, se=math.sqrt(1.0 / n), t=0.0, df=n - 1, p=1.0, n=n)
    if sd == 0.0 or sd_change == 0.0:
        raise DomainError("degenerate change scores: zero variance")
    d = md / sd
    se = math.sqrt(1.0 / n + d * d / (2.0 * n))
    t = md / (sd_change / math.sqrt(n))
    p = float(2.0 * sps.t.sf(abs(t), n - 1))
    return MeanChange(md=md, d=d, se=se, t=t, df=n - 1, p=p, n=n)


def mean_change_effect(change: MeanChange, group: str, topic=None) -> EffectEstimate:
    return EffectEstimate(
        kind="mean-change",
        value=change.d,
        se=change.se,
        n=change.n,
        group=group,
        topic=topic,
    )


# ---------------------------------------------------------------------------
# belief change


@dataclass(frozen=True)
class BeliefChange:
    """Per-person change of the mean belief between two waves."""

    persons: tuple[str, ...]
    signed: np.ndarray
    absolute: np.ndarray


def belief_change(
    panel: PanelDataset, pre_wave: str, post_wave: str, role: str = "moral"
) -> BeliefChange:
    """Change of the mean of `role` beliefs from pre to post wave.

    signed = mean(post) - mean(pre) per person; absolute is its magnitude.
    """
    if panel.scale != "belief":
        raise DomainError("belief change expects a rescaled panel")
    names = panel.belief_names(role)
    if not names:
        raise DomainError(f"panel has no beliefs with role {role!r}")
    idx = panel.belief_index(names)
    pre_t = panel.time_index(pre_wave)
    post_t = panel.time_index(post_wave)
    pre = panel.values[:, pre_t, :][:, idx].mean(axis=1)
    post = panel.values[:, post_t, :][:, idx].mean(axis=1)
    signed = post - pre
    return BeliefChange(persons=panel.persons, signed=signed, absolute=np.abs(signed))


def direction_tally(signed) -> dict[str, float]:
    """Shares of persons with strictly positive / negative / zero change."""
    signed = np.asarray(signed, dtype=float)
    n = signed.size
    return {
        "positive": float((signed > 0).sum() / n),
        "negative": float((signed < 0).sum() / n),
        "unchanged": float((signed == 0).sum() / n),
    }


# ---------------------------------------------------------------------------
# network descriptives


def strength_centrality(omega) -> np.ndarray:
    """Strength centrality per belief: sum_j |omega_ij|."""
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    return np.abs(w).sum(axis=1)


def direct_edge_to(omega, beliefs, target: str) -> np.ndarray:
    """Magnitude of each belief's direct coupling to the target belief."""
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    beliefs = list(beliefs)
    if target not in beliefs:
        raise DomainError(f"target belief {target!r} not in belief list")
    t = beliefs.index(target)
    return np.abs(w[:, t])


# ---------------------------------------------------------------------------
# validation diagnostics


@dataclass(frozen=True)
class PooledWithinComparison:
    """Correlation matrices ignoring vs respecting the person nesting."""

    pooled: np.ndarray
    within: np.ndarray
    agreement_r: float
    mean_abs_pooled: float
    mean_abs_within: float


def multilevel_vs_pooled(panel: PanelDataset) -> PooledWithinComparison:
    """Compare correlations over all person-waves with person-centered ones.

    `pooled` correlates the stacked person-wave scores directly; `within`
    first removes each person's own mean. `agreement_r` is the Pearson
    correlation between the two vectorized upper triangles.
    """
    if panel.n_times < 2:
        raise DimensionError("needs >= 2 waves per person")
    v = panel.values
    stacked = v.reshape(-1, panel.n_beliefs)
    centered = (v - v.mean(axis=1, keepdims=True)).reshape(-1, panel.n_beliefs)
    pooled = np.corrcoef(stacked, rowvar=False)
    within = np.corrcoef(centered, rowvar=False)
    iu = np.triu_indices(panel.n_beliefs, 1)
    agreement = pearson(pooled[iu], within[iu]).r
    return PooledWithinComparison(
        pooled=pooled,
        within=within,
        agreement_r=agreement,
        mean_abs_pooled=float(np.abs(pooled[iu]).mean()),
        mean_abs_within=float(np.abs(within[iu]).mean()),
    )


@dataclass(frozen=True)
class NormalityDiagnostic:
    """Shape statistics of the leading principal component scores."""

    scores: np.ndarray
    skewness: float
    excess_kurtosis: float
    qq_max_abs_dev: float
    degenerate: bool = False


def normality_diagnostic(data) -> NormalityDiagnostic:
    """Leading-PC scores with skewness, excess kurtosis, and QQ deviation.

    `data` is a (n, p) array or a ResidualDataset (stacked over waves). The
    QQ deviation is the largest absolute gap between the standardized order
    statistics and the matching normal quantiles.
    """
    if isinstance(data, ResidualDataset):
        x = data.residuals.reshape(-1, data.n_beliefs)
    else:
        x = np.asarray(data, dtype=float)
        if x.ndim != 2:
            raise DimensionError("expected a 2-d score matrix")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / max(1, x.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    lead = eigvecs[:, -1]
    lead = lead if lead[np.argmax(np.abs(lead))] >= 0 else -lead
    scores = xc @ lead
    sd = scores.std(ddof=1) if scores.size > 1 else 0.0
    if sd == 0.0 or not np.isfinite(sd):
        return NormalityDiagnostic(
            scores=scores,
            skewness=math.nan,
            excess_kurtosis=math.nan,
            qq_max_abs_dev=math.nan,
            degenerate=True,
        )
    z = np.sort((scores - scores.mean()) / sd)
    n = z.size
    theo = sps.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return NormalityDiagnostic(
        scores=scores,
        skewness=float(sps.skew(scores)),
        excess_kurtosis=float(sps.kurtosis(scores)),
        qq_max_abs_dev=float(np.abs(z - theo).max()),
    )


@dataclass(frozen=True)
class VarianceDecomposition:
    """Per-belief variance over time within persons vs across persons."""

    beliefs: tuple[str, ...]
    within_person: np.ndarray
    between_person: np.ndarray
    correlation: float


def variance_decomposition(panel: PanelDataset, reference_wave=None) -> VarianceDecomposition:
    """Within-person (over time) and between-person (at one wave) variances.

    Within-person variance averages each person's own variance across
    waves; between-person variance is taken across persons at the
    reference wave (default: first). `correlation` relates the two columns
    across beliefs (NaN when either column is constant).
    """
    if panel.n_times < 2:
        raise DimensionError("needs >= 2 waves")
    t = panel.time_index(reference_wave) if reference_wave is not None else 0
    within = panel.values.var(axis=1, ddof=1).mean(axis=0)
    between = panel.values[:, t, :].var(axis=0, ddof=1)
    try:
        corr = pearson(within, between).r if panel.n_beliefs >= 3 else math.nan
    except DomainError:
        corr = math.nan
    return VarianceDecomposition(
        beliefs=panel.beliefs,
        within_person=within,
        between_person=between,
        correlation=corr,
    )
