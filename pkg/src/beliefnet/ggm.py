"""Constrained Gaussian graphical model estimation across time points.

At time point t the residual belief scores are modelled as multivariate
normal with covariance

    Sigma_t = Delta_t (I - Omega)^{-1} Delta_t

where Omega is the symmetric zero-diagonal matrix of partial correlations
(the couplings) and Delta_t = diag(delta_t) holds one positive scaling
value per belief. Equivalently Sigma_t^{-1} = Delta_t^{-1}(I - Omega)
Delta_t^{-1}, so delta_i = K_ii^{-1/2} for the precision matrix K.

Model specifications constrain Omega, the intercepts mu, and the scalings
delta to be equal across time points (in that nesting order) and choose a
dense or sparse edge set; the eight admissible combinations are compared
by BIC. Sparse structures come from a prune-step-up search: zero all edges
with non-significant Wald tests, refit, then restore single edges while
that improves BIC.

The average scaling value per time point is the network temperature; its
inverse is the beta used by the dynamics module.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm as _norm

from ._optim import hessian_fd, minimize_feasible
from .errors import (
    AggregationError,
    DimensionError,
    DomainError,
    FitError,
    ModelDomainError,
)
from .panel import ResidualDataset

LOG_2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric partial-correlation matrix with a structural-zero mask.

    `support` is True on off-diagonal positions where an edge is allowed;
    `omega` must vanish outside the support, have zero diagonal, and keep
    (I - omega) positive definite (which bounds every entry below 1 in
    magnitude).
    """

    omega: np.ndarray
    support: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"omega must be square, got {w.shape}")
        if not np.allclose(w, w.T, atol=1e-12):
            raise ModelDomainError("omega is not symmetric")
        if np.abs(np.diag(w)).max(initial=0.0) > 1e-12:
            raise ModelDomainError("omega has nonzero diagonal")
        support = self.support
        if support is None:
            support = ~np.eye(w.shape[0], dtype=bool)
        else:
            support = np.asarray(support, dtype=bool)
            if support.shape != w.shape:
                raise DimensionError("support shape mismatch")
            if np.diag(support).any() or not (support == support.T).all():
                raise ModelDomainError("support must be symmetric with empty diagonal")
            if np.abs(w[~support]).max(initial=0.0) > 1e-12:
                raise ModelDomainError("omega has weight outside its support")
        _chol_or_raise(np.eye(w.shape[0]) - w, "(I - omega)")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "support", support)

    @property
    def n_beliefs(self) -> int:
        return self.omega.shape[0]


@dataclass(frozen=True)
class ModelSpec:
    """One of the eight admissible model specifications.

    Constraints nest: equal intercepts require equal networks, and equal
    scalings require equal intercepts.
    """

    equal_network: bool
    equal_intercepts: bool
    equal_scaling: bool
    sparse: bool

    def __post_init__(self):
        if self.equal_intercepts and not self.equal_network:
            raise DomainError("equal intercepts require equal networks")
        if self.equal_scaling and not self.equal_intercepts:
            raise DomainError("equal scalings require equal intercepts")

    @property
    def label(self) -> str:
        if self.equal_scaling:
            base = "all parameters equal"
        elif self.equal_intercepts:
            base = "equal networks and intercepts"
        elif self.equal_network:
            base = "equal networks"
        else:
            base = "all parameters free"
        return f"{base} ({'sparse' if self.sparse else 'dense'})"

    @property
    def dense_parent(self) -> "ModelSpec":
        return replace(self, sparse=False)


EIGHT_SPECS: tuple[ModelSpec, ...] = tuple(
    ModelSpec(eq_net, eq_mu, eq_delta, sparse)
    for (eq_net, eq_mu, eq_delta) in (
        (False, False, False),
        (True, False, False),
        (True, True, False),
        (True, True, True),
    )
    for sparse in (False, True)
)


@dataclass(frozen=True)
class Moments:
    """Sufficient statistics of one time point (ML-normalized covariance)."""

    n: int
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class TemperatureEstimate:
    """Network temperature per time point and its inverse beta."""

    time_points: tuple[str, ...]
    values: np.ndarray
    mode: str = "scaling-mean"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if (v <= 0).any():
            raise ModelDomainError("temperature must be positive")
        object.__setattr__(self, "values", v)

    @property
    def betas(self) -> np.ndarray:
        return 1.0 / self.values


# ---------------------------------------------------------------------------
# basic covariance algebra


def _chol_or_raise(mat, what):
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise ModelDomainError(f"{what} is not positive definite") from None


def implied_covariance(omega, delta) -> np.ndarray:
    """Covariance Delta (I - omega)^{-1} Delta implied by couplings and scalings."""
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    d = np.asarray(delta, dtype=float)
    if (d <= 0).any():
        raise ModelDomainError("scaling values must be positive")
    p = w.shape[0]
    if d.shape != (p,):
        raise DimensionError(f"delta shape {d.shape} does not match omega {w.shape}")
    b = np.eye(p) - w
    _chol_or_raise(b, "(I - omega)")
    binv = np.linalg.inv(b)
    sigma = d[:, None] * binv * d[None, :]
    return 0.5 * (sigma + sigma.T)


def decompose_covariance(sigma):
    """Invert a covariance into (omega, delta, precision).

    omega_ij = -K_ij / sqrt(K_ii K_jj) and delta_i = K_ii^{-1/2} for the
    precision matrix K = sigma^{-1}.
    """
    sigma = np.asarray(sigma, dtype=float)
    _chol_or_raise(sigma, "covariance")
    k = np.linalg.inv(sigma)
    dk = np.sqrt(np.diag(k))
    omega = -k / np.outer(dk, dk)
    np.fill_diagonal(omega, 0.0)
    return 0.5 * (omega + omega.T), 1.0 / dk, k


def partial_correlations(sigma) -> np.ndarray:
    """Partial correlations -K_ij / sqrt(K_ii K_jj) from a covariance matrix."""
    return decompose_covariance(sigma)[0]


def sample_covariance(residuals: ResidualDataset, time):
    """Unbiased covariance and mean of one time point's residual scores.

    Requires at least n_beliefs + 1 persons; warns when the result is
    rank deficient (fits may still proceed from a ridge-regularized start).
    """
    t = time if isinstance(time, int) else residuals.time_points.index(time)
    x = residuals.at_time(t)
    n, p = x.shape
    if n < p + 1:
        raise DimensionError(f"need >= {p + 1} persons at time {time!r}, got {n}")
    m = x.mean(axis=0)
    xc = x - m
    s = xc.T @ xc / (n - 1)
    eig = np.linalg.eigvalsh(s)
    if eig.min() < 1e-12 * max(eig.max(), 1e-300):
        warnings.warn(f"sample covariance at time {time!r} is rank deficient")
    return s, m


def moments_from_residuals(residuals: ResidualDataset) -> list[Moments]:
    out = []
    for t in range(residuals.n_times):
        x = residuals.at_time(t)
        n = x.shape[0]
        m = x.mean(axis=0)
        xc = x - m
        out.append(Moments(n=n, mean=m, cov=xc.T @ xc / n))
    return out


def free_dense_param_count(p: int, n_times: int) -> int:
    """Parameter count of the all-free dense specification."""
    return n_times * (p * (p - 1) // 2 + 2 * p)


# ---------------------------------------------------------------------------
# likelihood machinery


class _Layout:
    """Maps the packed parameter vector onto (omega blocks, mu, log delta)."""

    def __init__(self, spec: ModelSpec, p: int, n_times: int, supports):
        self.spec = spec
        self.p = p
        self.n_times = n_times
        self.n_blocks = 1 if spec.equal_network else n_times
        if len(supports) != self.n_blocks:
            raise DimensionError(
                f"{self.n_blocks} support blocks expected, got {len(supports)}"
            )
        iu, ju = np.triu_indices(p, 1)
        self.edge_rows, self.edge_cols, self.edge_offset = [], [], [0]
        for sup in supports:
            keep = sup[iu, ju]
            self.edge_rows.append(iu[keep])
            self.edge_cols.append(ju[keep])
            self.edge_offset.append(self.edge_offset[-1] + int(keep.sum()))
        self.supports = [np.asarray(s, dtype=bool) for s in supports]
        self.n_edges = self.edge_offset[-1]
        self.n_mu = p if spec.equal_intercepts else n_times * p
        self.n_delta = p if spec.equal_scaling else n_times * p
        self.mu_start = self.n_edges
        self.delta_start = self.n_edges + self.n_mu
        self.size = self.n_edges + self.n_mu + self.n_delta

    def block_of(self, t: int) -> int:
        return 0 if self.spec.equal_network else t

    def edge_slice(self, block: int) -> slice:
        return slice(self.edge_offset[block], self.edge_offset[block + 1])

    def mu_slice(self, t: int) -> slice:
        if self.spec.equal_intercepts:
            return slice(self.mu_start, self.mu_start + self.p)
        return slice(self.mu_start + t * self.p, self.mu_start + (t + 1) * self.p)

    def delta_slice(self, t: int) -> slice:
        if self.spec.equal_scaling:
            return slice(self.delta_start, self.delta_start + self.p)
        return slice(self.delta_start + t * self.p, self.delta_start + (t + 1) * self.p)

    def omega_block(self, x, block: int) -> np.ndarray:
        w = np.zeros((self.p, self.p))
        vals = x[self.edge_slice(block)]
        r, c = self.edge_rows[block], self.edge_cols[block]
        w[r, c] = vals
        w[c, r] = vals
        return w

    def pack(self, omegas, mus, log_deltas) -> np.ndarray:
        x = np.empty(self.size)
        for b in range(self.n_blocks):
            r, c = self.edge_rows[b], self.edge_cols[b]
            x[self.edge_slice(b)] = omegas[b][r, c]
        if self.spec.equal_intercepts:
            x[self.mu_slice(0)] = mus[0]
        else:
            for t in range(self.n_times):
                x[self.mu_slice(t)] = mus[t]
        if self.spec.equal_scaling:
            x[self.delta_slice(0)] = log_deltas[0]
        else:
            for t in range(self.n_times):
                x[self.delta_slice(t)] = log_deltas[t]
        return x


def _nll_and_grad(x, layout: _Layout, moments):
    """Negative multi-group Gaussian log-likelihood and its gradient.

    Returns (+inf, None-gradient) when any (I - omega) block loses positive
    definiteness so the line search can back off.
    """
    p = layout.p
    eye = np.eye(p)
    blocks = {}
    for b in range(layout.n_blocks):
        w = layout.omega_block(x, b)
        mat = eye - w
        try:
            c = np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(x)
        blocks[b] = (mat, c)
    f = 0.0
    grad = np.zeros_like(x)
    for t, mom in enumerate(moments):
        b = layout.block_of(t)
        bmat, c = blocks[b]
        mu = x[layout.mu_slice(t)]
        log_delta = x[layout.delta_slice(t)]
        delta = np.exp(log_delta)
        dinv = 1.0 / delta
        logdet_b = 2.0 * np.log(np.diag(c)).sum()
        k = dinv[:, None] * bmat * dinv[None, :]
        d = mom.mean - mu
        a = mom.cov + np.outer(d, d)
        tr_ak = float((a * k).sum())
        f += 0.5 * mom.n * (p * LOG_2PI + 2.0 * log_delta.sum() - logdet_b + tr_ak)
        binv = cho_solve((c, True), eye)
        w_grad = mom.n * (binv - dinv[:, None] * a * dinv[None, :])
        r, cc = layout.edge_rows[b], layout.edge_cols[b]
        grad[layout.edge_slice(b)] += w_grad[r, cc]
        grad[layout.mu_slice(t)] += -mom.n * (k @ d)
        grad[layout.delta_slice(t)] += mom.n * (1.0 - np.diag(k @ a))
    return f, grad


def _initial_point(layout: _Layout, moments, ridge=1e-8):
    """Closed-form start from inverted (ridge-regularized) sample covariances.

    Free blocks start from their own time point. Shared blocks average the
    per-time decompositions: couplings are scale-free, so averaging their
    per-time estimates conditions far better than decomposing a pooled
    covariance when the waves differ in scale, and the average stays
    feasible because each (I - omega_t) is positive definite.
    """
    p = layout.p
    n_total = sum(m.n for m in moments)
    mean_pooled = sum(m.n * m.mean for m in moments) / n_total

    def decompose(cov):
        k = np.linalg.inv(cov + ridge * np.eye(p))
        dk = np.sqrt(np.diag(k))
        w = -k / np.outer(dk, dk)
        np.fill_diagonal(w, 0.0)
        return 0.5 * (w + w.T), 1.0 / dk

    per_time = [decompose(m.cov) for m in moments]
    weights = np.array([m.n for m in moments], dtype=float) / n_total
    omega_avg = sum(wt * w for wt, (w, _) in zip(weights, per_time))
    log_delta_avg = sum(wt * np.log(d) for wt, (_, d) in zip(weights, per_time))

    omegas = []
    for b in range(layout.n_blocks):
        w = omega_avg if layout.spec.equal_network else per_time[b][0]
        omegas.append(w * layout.supports[b])
    if layout.spec.equal_intercepts:
        mus = [mean_pooled]
    else:
        mus = [m.mean for m in moments]
    if layout.spec.equal_scaling:
        log_deltas = [log_delta_avg]
    else:
        log_deltas = [np.log(d) for _, d in per_time]
    return layout.pack(omegas, mus, log_deltas)


def _make_feasible(x, layout: _Layout, max_shrink=200):
    """Shrink edge weights toward zero until every (I - omega) block is PD."""
    x = x.copy()
    eye = np.eye(layout.p)
    for _ in range(max_shrink):
        ok = True
        for b in range(layout.n_blocks):
            try:
                np.linalg.cholesky(eye - layout.omega_block(x, b))
            except np.linalg.LinAlgError:
                ok = False
                break
        if ok:
            return x
        x[: layout.n_edges] *= 0.9
    raise FitError("could not find a positive-definite starting point")


# ---------------------------------------------------------------------------
# fitted model


@dataclass
class FittedModel:
    """A fitted specification: couplings, intercepts, scalings, fit indices.

    Arrays are stored expanded per time point even when a constraint makes
    them equal; `spec` records which blocks are shared. `bic` satisfies
    -2 * log_likelihood + n_params * ln(n_obs) exactly.
    """

    spec: ModelSpec
    time_points: tuple[str, ...]
    beliefs: tuple[str, ...]
    omega: np.ndarray
    support: np.ndarray
    mu: np.ndarray
    delta: np.ndarray
    log_likelihood: float
    n_params: int
    n_obs: int
    bic: float
    grad_max: float = float("nan")
    n_iter: int = 0
    moments: list[Moments] | None = field(default=None, repr=False, compare=False)

    @property
    def n_times(self) -> int:
        return len(self.time_points)

    @property
    def n_beliefs(self) -> int:
        return len(self.beliefs)

    def df_constrained(self) -> int:
        """Constraint count relative to the all-free dense specification."""
        return free_dense_param_count(self.n_beliefs, self.n_times) - self.n_params

    def coupling(self, time: int = 0) -> CouplingMatrix:
        return CouplingMatrix(self.omega[time], self.support[time])

    def implied_sigma(self, time: int) -> np.ndarray:
        return implied_covariance(self.omega[time], self.delta[time])

    def precision(self, time: int) -> np.ndarray:
        dinv = 1.0 / self.delta[time]
        return dinv[:, None] * (np.eye(self.n_beliefs) - self.omega[time]) * dinv[None, :]

    def edge_rows(self):
        """Edge list rows (time, source, target, weight); time is 'all' when shared."""
        rows = []
        iu, ju = np.triu_indices(self.n_beliefs, 1)
        times = ("all",) if self.spec.equal_network else self.time_points
        for ti, tlabel in enumerate(times):
            sup = self.support[0 if self.spec.equal_network else ti]
            w = self.omega[0 if self.spec.equal_network else ti]
            for i, j in zip(iu, ju):
                if sup[i, j]:
                    rows.append(
                        (tlabel, self.beliefs[i], self.beliefs[j], float(w[i, j]))
                    )
        return rows

    def to_dict(self) -> dict:
        return {
            "spec": {
                "equal_network": self.spec.equal_network,
                "equal_intercepts": self.spec.equal_intercepts,
                "equal_scaling": self.spec.equal_scaling,
                "sparse": self.spec.sparse,
                "label": self.spec.label,
            },
            "time_points": list(self.time_points),
            "beliefs": list(self.beliefs),
            "edges": [
                {"time": t, "source": s, "target": g, "weight": w}
                for t, s, g, w in self.edge_rows()
            ],
            "delta": [list(map(float, row)) for row in self.delta],
            "mu": [list(map(float, row)) for row in self.mu],
            "log_likelihood": float(self.log_likelihood),
            "n_params": int(self.n_params),
            "n_obs": int(self.n_obs),
            "bic": float(self.bic),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FittedModel":
        spec = ModelSpec(
            equal_network=data["spec"]["equal_network"],
            equal_intercepts=data["spec"]["equal_intercepts"],
            equal_scaling=data["spec"]["equal_scaling"],
            sparse=data["spec"]["sparse"],
        )
        beliefs = tuple(data["beliefs"])
        times = tuple(data["time_points"])
        p, nt = len(beliefs), len(times)
        bidx = {b: i for i, b in enumerate(beliefs)}
        tidx = {t: i for i, t in enumerate(times)}
        omega = np.zeros((nt, p, p))
        support = np.zeros((nt, p, p), dtype=bool)
        for e in data["edges"]:
            targets = range(nt) if e["time"] == "all" else [tidx[e["time"]]]
            i, j = bidx[e["source"]], bidx[e["target"]]
            for t in targets:
                omega[t, i, j] = omega[t, j, i] = e["weight"]
                support[t, i, j] = support[t, j, i] = True
        if not spec.sparse:
            support[:] = ~np.eye(p, dtype=bool)[None, :, :]
        return cls(
            spec=spec,
            time_points=times,
            beliefs=beliefs,
            omega=omega,
            support=support,
            mu=np.asarray(data["mu"], dtype=float),
            delta=np.asarray(data["delta"], dtype=float),
            log_likelihood=float(data["log_likelihood"]),
            n_params=int(data["n_params"]),
            n_obs=int(data["n_obs"]),
            bic=float(data["bic"]),
        )


def _expand(layout: _Layout, x, n_times):
    omega = np.stack([layout.omega_block(x, layout.block_of(t)) for t in range(n_times)])
    support = np.stack(
        [layout.supports[layout.block_of(t)] for t in range(n_times)]
    )
    mu = np.stack([x[layout.mu_slice(t)] for t in range(n_times)])
    delta = np.stack([np.exp(x[layout.delta_slice(t)]) for t in range(n_times)])
    return omega, support, mu, delta


def fit_from_moments(
    moments,
    spec: ModelSpec,
    supports=None,
    beliefs=None,
    time_points=None,
    x0=None,
    gtol=1e-8,
    ftol=1e-11,
    max_iter=1000,
) -> FittedModel:
    """Maximum-likelihood fit of one specification from per-time moments.

    `supports` gives one boolean edge mask per network block (a single
    block when the spec shares the network); omitted masks mean dense.
    """
    n_times = len(moments)
    if n_times == 0:
        raise DimensionError("no time points")
    p = moments[0].cov.shape[0]
    for t, m in enumerate(moments):
        if m.cov.shape != (p, p) or m.mean.shape != (p,):
            raise DimensionError(f"moments at time {t} have inconsistent shapes")
        if m.n < p + 1:
            raise DimensionError(f"time {t}: need >= {p + 1} observations, got {m.n}")
    n_blocks = 1 if spec.equal_network else n_times
    if supports is None:
        dense = ~np.eye(p, dtype=bool)
        supports = [dense.copy() for _ in range(n_blocks)]
    layout = _Layout(spec, p, n_times, supports)
    if x0 is None:
        x0 = _initial_point(layout, moments)
    x0 = _make_feasible(np.asarray(x0, dtype=float), layout)
    result = minimize_feasible(
        lambda x: _nll_and_grad(x, layout, moments),
        x0,
        gtol=gtol,
        ftol=ftol,
        max_iter=max_iter,
    )
    omega, support, mu, delta = _expand(layout, result.x, n_times)
    ll = -result.fun
    n_obs = int(sum(m.n for m in moments))
    k = layout.size
    model = FittedModel(
        spec=spec,
        time_points=tuple(time_points) if time_points else tuple(f"t{t}" for t in range(n_times)),
        beliefs=tuple(beliefs) if beliefs else tuple(f"b{i}" for i in range(p)),
        omega=omega,
        support=support,
        mu=mu,
        delta=delta,
        log_likelihood=ll,
        n_params=k,
        n_obs=n_obs,
        bic=-2.0 * ll + k * np.log(n_obs),
        grad_max=result.grad_max,
        n_iter=result.n_iter,
        moments=list(moments),
    )
    return model


def fit_spec(residuals: ResidualDataset, spec: ModelSpec, **kwargs) -> FittedModel:
    """Fit one specification to residualized panel data (see fit_from_moments)."""
    moments = moments_from_residuals(residuals)
    return fit_from_moments(
        moments,
        spec,
        beliefs=residuals.beliefs,
        time_points=residuals.time_points,
        **kwargs,
    )


# ---------------------------------------------------------------------------
# Wald tests, prune-step-up, model selection


def _model_layout(model: FittedModel) -> _Layout:
    n_blocks = 1 if model.spec.equal_network else model.n_times
    supports = [model.support[0 if model.spec.equal_network else b] for b in range(n_blocks)]
    return _Layout(model.spec, model.n_beliefs, model.n_times, supports)


def _packed_params(model: FittedModel, layout: _Layout) -> np.ndarray:
    omegas = [model.omega[0 if model.spec.equal_network else b] for b in range(layout.n_blocks)]
    if model.spec.equal_intercepts:
        mus = [model.mu[0]]
    else:
        mus = list(model.mu)
    if model.spec.equal_scaling:
        log_deltas = [np.log(model.delta[0])]
    else:
        log_deltas = [np.log(d) for d in model.delta]
    return layout.pack(omegas, mus, log_deltas)


def wald_edge_tests(model: FittedModel):
    """Wald z-tests for every free edge of a fitted model.

    Returns a list of dicts (block, i, j, omega, se, z, p) in the packed
    parameter order. Requires the model to carry its fitting moments.
    """
    if model.moments is None:
        raise FitError("model carries no moments; refit before testing edges")
    layout = _model_layout(model)
    x = _packed_params(model, layout)
    hess = hessian_fd(lambda v: _nll_and_grad(v, layout, model.moments), x)
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(hess)
    se_all = np.sqrt(np.maximum(np.diag(cov), 0.0))
    out = []
    for b in range(layout.n_blocks):
        sl = layout.edge_slice(b)
        rows, cols = layout.edge_rows[b], layout.edge_cols[b]
        for pos, (i, j) in enumerate(zip(rows, cols)):
            idx = sl.start + pos
            w = x[idx]
            se = se_all[idx]
            z = w / se if se > 0 else np.inf * np.sign(w)
            out.append(
                {
                    "block": b,
                    "i": int(i),
                    "j": int(j),
                    "omega": float(w),
                    "se": float(se),
                    "z": float(z),
                    "p": float(2.0 * _norm.sf(abs(z))),
                }
            )
    return out


def _refit_with_supports(model: FittedModel, supports, warm=True, **fit_kwargs) -> FittedModel:
    spec = replace(model.spec, sparse=True)
    layout = _Layout(spec, model.n_beliefs, model.n_times, supports)
    x0 = None
    if warm:
        omegas = [
            model.omega[0 if model.spec.equal_network else b] * supports[b]
            for b in range(layout.n_blocks)
        ]
        mus = [model.mu[0]] if spec.equal_intercepts else list(model.mu)
        log_deltas = (
            [np.log(model.delta[0])]
            if spec.equal_scaling
            else [np.log(d) for d in model.delta]
        )
        x0 = layout.pack(omegas, mus, log_deltas)
    return fit_from_moments(
        model.moments,
        spec,
        supports=supports,
        beliefs=model.beliefs,
        time_points=model.time_points,
        x0=x0,
        **fit_kwargs,
    )


def _zeroed_edge_scores(model: FittedModel, supports):
    """Score (Lagrange multiplier) statistic per structurally-zero edge.

    The gradient of the negative log-likelihood with respect to a zeroed
    edge, evaluated at the current fit, ranks how much restoring that edge
    can improve the likelihood. Evaluated on an all-edges layout whose
    packed vector carries the current parameters with zeros at the holes.
    """
    spec = model.spec
    n_blocks = len(supports)
    dense = [~np.eye(model.n_beliefs, dtype=bool)] * n_blocks
    layout = _Layout(spec, model.n_beliefs, model.n_times, dense)
    omegas = [model.omega[0 if spec.equal_network else b] for b in range(n_blocks)]
    mus = [model.mu[0]] if spec.equal_intercepts else list(model.mu)
    log_deltas = (
        [np.log(model.delta[0])] if spec.equal_scaling else [np.log(d) for d in model.delta]
    )
    x = layout.pack(omegas, mus, log_deltas)
    _, grad = _nll_and_grad(x, layout, model.moments)
    scores = {}
    for b in range(n_blocks):
        sl = layout.edge_slice(b)
        for pos, (i, j) in enumerate(zip(layout.edge_rows[b], layout.edge_cols[b])):
            if not supports[b][i, j]:
                scores[(b, int(i), int(j))] = abs(float(grad[sl.start + pos]))
    return scores


def prune_step_up(model: FittedModel, alpha: float = 0.01, screen: int | None = 12) -> FittedModel:
    """Sparse structure search: prune non-significant edges, then step up.

    All edges with Wald p >= alpha are set to structural zero and the model
    is refitted; afterwards the single zeroed edge whose restoration most
    improves BIC is restored repeatedly until no restoration improves BIC.
    Returns the dense model unchanged when nothing prunes or when the
    sparse search cannot beat the dense BIC.

    `screen` caps how many restoration candidates are refitted per step-up
    round: candidates are ranked by their score statistic (likelihood
    gradient at the zeroed edge), the top `screen` are tried, and the
    remainder are skipped only when an optimistic bound on their likelihood
    gain cannot beat the BIC penalty. Pass None to refit every candidate.
    """
    if model.spec.sparse:
        raise DomainError("prune_step_up expects a dense fitted model")
    tests = wald_edge_tests(model)
    n_blocks = 1 if model.spec.equal_network else model.n_times
    supports = [
        model.support[0 if model.spec.equal_network else b].copy()
        for b in range(n_blocks)
    ]
    pruned = []
    for row in tests:
        if row["p"] >= alpha:
            b, i, j = row["block"], row["i"], row["j"]
            supports[b][i, j] = supports[b][j, i] = False
            pruned.append((b, i, j))
    if not pruned:
        return model
    current = _refit_with_supports(model, supports)
    log_n = np.log(current.n_obs)

    def try_edge(edge):
        b, i, j = edge
        trial_supports = [s.copy() for s in supports]
        trial_supports[b][i, j] = trial_supports[b][j, i] = True
        try:
            # loose tolerance for screening; the accepted edge is refitted tightly
            trial = _refit_with_supports(current, trial_supports, gtol=1e-6)
        except FitError:
            return None
        return trial, trial_supports

    while True:
        scores = _zeroed_edge_scores(current, supports)
        if not scores:
            break
        order = sorted(scores, key=lambda e: -scores[e])
        best = None
        for rank, edge in enumerate(order):
            if screen is not None and rank >= screen:
                if best is not None:
                    break
                # optimistic gain bound 2*dLL <= score^2 / (0.1 n): skip the
                # tail only when even that cannot beat the BIC penalty
                if scores[edge] ** 2 / (0.1 * current.n_obs) < log_n:
                    break
            outcome = try_edge(edge)
            if outcome is None:
                continue
            trial, trial_supports = outcome
            if trial.bic < current.bic - 1e-9 and (best is None or trial.bic < best[0].bic):
                best = (trial, trial_supports)
        if best is None:
            break
        _, supports = best
        current = _refit_with_supports(current, supports)
    if current.bic > model.bic + 1e-9:
        return model
    return current


@dataclass
class RankingRow:
    """One line of the specification comparison table."""

    label: str
    df: int | None
    n_params: int | None
    log_likelihood: float | None
    bic: float | None
    error: str | None = None


@dataclass
class SelectionResult:
    best: FittedModel
    ranking: list[RankingRow]
    models: dict[str, FittedModel]


def select_model(
    residuals: ResidualDataset,
    specs=EIGHT_SPECS,
    prune_alpha: float = 0.01,
    max_workers: int | None = None,
) -> SelectionResult:
    """Fit the admissible specifications and pick the lowest BIC.

    Sparse specifications are derived from their dense parent via
    `prune_step_up`. Failed fits are recorded in the ranking with their
    error and excluded from the choice; BIC ties below 1e-9 break toward
    the more constrained specification.
    """
    moments = moments_from_residuals(residuals)
    if max_workers is None:
        max_workers = int(os.environ.get("BELIEFNET_THREADS", "1") or "1")
    dense_parents = []
    for spec in specs:
        parent = spec.dense_parent
        if parent not in dense_parents:
            dense_parents.append(parent)

    dense_fits: dict[ModelSpec, FittedModel | Exception] = {}

    def fit_dense(spec):
        return fit_from_moments(
            moments, spec, beliefs=residuals.beliefs, time_points=residuals.time_points
        )

    if max_workers > 1 and len(dense_parents) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = {spec: pool.submit(fit_dense, spec) for spec in dense_parents}
        for spec, fut in futures.items():
            try:
                dense_fits[spec] = fut.result()
            except (FitError, ModelDomainError, DimensionError) as exc:
                dense_fits[spec] = exc
    else:
        for spec in dense_parents:
            try:
                dense_fits[spec] = fit_dense(spec)
            except (FitError, ModelDomainError, DimensionError) as exc:
                dense_fits[spec] = exc

    ranking: list[RankingRow] = []
    models: dict[str, FittedModel] = {}
    for spec in specs:
        parent = dense_fits[spec.dense_parent]
        try:
            if isinstance(parent, Exception):
                raise parent
            fitted = parent if not spec.sparse else prune_step_up(parent, alpha=prune_alpha)
        except (FitError, ModelDomainError, DimensionError) as exc:
            warnings.warn(f"spec {spec.label!r} failed: {exc}")
            ranking.append(RankingRow(spec.label, None, None, None, None, str(exc)))
            continue
        models[spec.label] = fitted
        ranking.append(
            RankingRow(
                label=spec.label,
                df=fitted.df_constrained(),
                n_params=fitted.n_params,
                log_likelihood=fitted.log_likelihood,
                bic=fitted.bic,
            )
        )
    fitted_rows = [r for r in ranking if r.error is None]
    if not fitted_rows:
        raise AggregationError("all specifications failed to fit")
    best_bic = min(r.bic for r in fitted_rows)
    contenders = [r for r in fitted_rows if r.bic <= best_bic + 1e-9]
    winner = min(contenders, key=lambda r: r.n_params)
    return SelectionResult(best=models[winner.label], ranking=ranking, models=models)


def temperature_of(model: FittedModel, mode: str = "scaling-mean") -> TemperatureEstimate:
    """Network temperature per time point.

    ``scaling-mean`` (default) averages the per-belief scaling values
    delta_t; ``precision-diag-mean`` averages the diagonal of the implied
    precision matrix instead.
    """
    if mode == "scaling-mean":
        values = model.delta.mean(axis=1)
    elif mode == "precision-diag-mean":
        values = np.array(
            [np.diag(model.precision(t)).mean() for t in range(model.n_times)]
        )
    else:
        raise DomainError(f"unknown temperature mode {mode!r}")
    return TemperatureEstimate(
        time_points=model.time_points, values=values, mode=mode
    )
