"""Quasi-Newton minimizer with an infeasibility barrier and Newton polish.

The covariance-structure objective is undefined wherever (I - omega) loses
positive definiteness, so the objective returns +inf there and the line
search halves the step until it re-enters the feasible region. A BFGS
phase makes cheap global progress; a damped-Newton phase (Hessian from
central differences of the analytic gradient) then drives the gradient
max-norm to tolerance, which plain BFGS cannot reliably do once objective
differences fall below floating-point noise.
"""

from __future__ import annotations

import numpy as np

from .errors import FitError


class OptimResult:
    def __init__(self, x, fun, grad, n_iter, converged, trace):
        self.x = x
        self.fun = fun
        self.grad = grad
        self.n_iter = n_iter
        self.converged = converged
        self.trace = trace

    @property
    def grad_max(self) -> float:
        return float(np.max(np.abs(self.grad))) if self.grad.size else 0.0


def hessian_fd(fun, x, rel_step=1e-5):
    """Hessian from central differences of the analytic gradient.

    Steps shrink automatically when they would leave the feasible region.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    h = np.empty((n, n))
    for j in range(n):
        hj = rel_step * (1.0 + abs(x[j]))
        for _ in range(10):
            e = np.zeros(n)
            e[j] = hj
            f1, g1 = fun(x + e)
            f2, g2 = fun(x - e)
            if np.isfinite(f1) and np.isfinite(f2):
                break
            hj *= 0.25
        else:
            raise FitError("Hessian step could not stay feasible")
        h[:, j] = (g1 - g2) / (2.0 * hj)
    return 0.5 * (h + h.T)


def _newton_polish(fun, x, f, g, gtol, trace, max_iter=30, max_halvings=40):
    """Damped Newton iterations until the gradient max-norm meets gtol.

    Accepts steps on Armijo decrease or, in the floating-point noise
    regime, on a clear gradient reduction at (numerically) equal objective.
    """
    n = x.size
    for it in range(max_iter):
        gmax = float(np.max(np.abs(g)))
        if gmax < gtol:
            return x, f, g, it, True
        hess = hessian_fd(fun, x)
        lam = 0.0
        scale = max(1.0, float(np.trace(np.abs(hess))) / n)
        direction = None
        for _ in range(25):
            try:
                d = np.linalg.solve(hess + lam * np.eye(n), -g)
            except np.linalg.LinAlgError:
                lam = max(lam * 10.0, 1e-10 * scale)
                continue
            if g @ d < 0:
                direction = d
                break
            lam = max(lam * 10.0, 1e-10 * scale)
        if direction is None:
            return x, f, g, it, gmax < 1e2 * gtol
        slope = float(g @ direction)
        step = 1.0
        accepted = False
        for _ in range(max_halvings):
            x_new = x + step * direction
            f_new, g_new = fun(x_new)
            if not np.isfinite(f_new):
                step *= 0.5
                continue
            armijo = f_new <= f + 1e-4 * step * slope
            noise_ok = (
                f_new <= f + 1e-12 * max(1.0, abs(f))
                and float(np.max(np.abs(g_new))) < 0.9 * gmax
            )
            if armijo or noise_ok:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return x, f, g, it, gmax < 1e2 * gtol
        x, f, g = x_new, f_new, g_new
        trace.append(f)
    return x, f, g, max_iter, float(np.max(np.abs(g))) < 1e2 * gtol


def _bfgs_phase(fun, x, f, g, gtol, ftol, max_iter, max_halvings, trace):
    """One BFGS run; returns (x, f, g, iterations). Stops on gtol, ftol,
    a failed line search, or the iteration budget."""
    n = x.size
    ident = np.eye(n)
    h_inv = ident.copy()
    first = True
    for it in range(1, max_iter + 1):
        gmax = float(np.max(np.abs(g))) if n else 0.0
        if gmax < gtol:
            return x, f, g, it - 1
        d = -h_inv @ g
        slope = float(g @ d)
        if slope >= 0.0:  # stale curvature; restart from steepest descent
            h_inv = ident.copy()
            d = -g
            slope = float(g @ d)
        step = 1.0
        accepted = False
        for _ in range(max_halvings):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return x, f, g, it
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first:
                h_inv *= sy / float(y @ y)
                first = False
            rho = 1.0 / sy
            hy = h_inv @ y
            h_inv -= rho * (np.outer(s, hy) + np.outer(hy, s))
            h_inv += rho * rho * float(y @ hy) * np.outer(s, s)
            h_inv += rho * np.outer(s, s)
        rel_change = abs(f - f_new) / max(1.0, abs(f), abs(f_new))
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        if rel_change < ftol:
            return x, f, g, it
    return x, f, g, max_iter


def minimize_feasible(fun, x0, gtol=1e-8, ftol=1e-11, max_iter=1000, max_halvings=60):
    """Minimize `fun` (returning (value, gradient)) from a feasible `x0`.

    Alternates BFGS phases (cheap global progress, stopped by `ftol` or a
    stalled line search) with damped-Newton polish (drives the gradient
    max-norm to `gtol`, which BFGS cannot reliably do once objective
    differences fall under floating-point noise). Infeasible points must
    return +inf; the line searches halve the step back into the feasible
    region. Raises FitError when the gradient stays large after the phase
    budget.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun(x)
    if not np.isfinite(f):
        raise FitError("initial point is infeasible", ll_trace=[])
    trace = [f]
    n_iter = 0
    budget = max_iter
    for _ in range(3):
        x, f, g, used = _bfgs_phase(fun, x, f, g, gtol, ftol, budget, max_halvings, trace)
        n_iter += used
        budget = max(budget - used, 50)
        if float(np.max(np.abs(g))) < gtol:
            return OptimResult(x, f, g, n_iter, True, trace)
        x, f, g, used, ok = _newton_polish(fun, x, f, g, gtol, trace)
        n_iter += used
        if float(np.max(np.abs(g))) < gtol:
            return OptimResult(x, f, g, n_iter, True, trace)
    if ok:  # within the relaxed band 1e2 * gtol after all phases
        return OptimResult(x, f, g, n_iter, True, trace)
    gmax = float(np.max(np.abs(g)))
    raise FitError(
        f"no convergence after {n_iter} iterations (grad max {gmax:.3e})",
        ll_trace=[-v for v in trace],
    )
