"""Riemannian trust-region minimizer with a truncated-CG subproblem solver.

Two entry points are provided: :func:`minimize` (second order, the default
whenever a Hessian-vector product is available) and
:func:`minimize_first_order` (gradient descent with Armijo backtracking
along retractions, for objectives whose exact Hessian is unavailable).
Both operate on the ambient-array point representation of
:mod:`riemann_oracle.manifolds`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .manifolds import Manifold, real_inner, real_norm

GRAD_TOL = "grad_tol"
MAX_ITER = "max_iter"
STAGNATION = "stagnation"


class DerivativeCheckError(RuntimeError):
    """Supplied gradient disagrees with finite differences of the objective."""


@dataclass
class Objective:
    """Callable bundle for one smooth objective on a manifold.

    ``f`` maps a point to a finite real value, ``egrad`` returns the Euclidean
    gradient in the ambient space under the Re<., .> pairing, and
    ``ehess_vec(x, w)`` (optional) applies the Euclidean Hessian at ``x`` to
    an ambient direction ``w``.
    """

    f: Callable[[np.ndarray], float]
    egrad: Callable[[np.ndarray], np.ndarray]
    ehess_vec: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None


@dataclass
class TRConfig:
    grad_tol: float = 1e-8
    max_iter: int = 200
    initial_radius: float = 1.0
    max_radius: float = 2.0**10
    acceptance_threshold: float = 0.1  # rho' in (0, 1/4)
    cg_max_iter: int | None = None  # default: ambient real dimension
    cg_theta: float = 1.0
    cg_kappa: float = 0.1
    check_derivatives: bool = True
    min_radius: float = 1e-14
    reject_limit: int = 10
    # first-order path only
    armijo_decrease: float = 1e-4
    armijo_contraction: float = 0.5
    max_line_search: int = 40

    def __post_init__(self):
        if not 0 < self.acceptance_threshold < 0.25:
            raise ValueError("acceptance_threshold must lie in (0, 1/4)")
        for name in ("grad_tol", "initial_radius", "max_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TRReport:
    final_point: np.ndarray
    final_f: float
    final_grad_norm: float
    iterations: int
    f_history: list[float] = field(default_factory=list)
    status: str = MAX_ITER


def truncated_cg(
    grad: np.ndarray,
    hess_op: Callable[[np.ndarray], np.ndarray],
    radius: float,
    cfg: TRConfig,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Steihaug-Toint truncated CG for the trust-region subproblem.

    Minimizes the model m(s) = <grad, s> + 0.5 <s, H s> over ||s|| <= radius,
    exiting on negative curvature, on the boundary, or once the residual
    drops below ||grad|| * min(kappa, ||grad||^theta).  Returns the step, the
    accumulated H s (so the caller can price the model without an extra
    Hessian application), and whether the boundary was hit.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    s = np.zeros_like(grad)
    hs = np.zeros_like(grad)
    r = grad.copy()
    d = -r
    r0 = real_norm(r)
    if r0 == 0.0:
        return s, hs, False
    rtol = r0 * min(cfg.cg_kappa, r0**cfg.cg_theta)
    rr = r0**2
    max_iter = cfg.cg_max_iter if cfg.cg_max_iter is not None else max(10, 2 * grad.size)

    def to_boundary(s, d):
        # positive root of ||s + sigma d||^2 = radius^2
        dd = real_inner(d, d)
        sd = real_inner(s, d)
        ss = real_inner(s, s)
        disc = sd**2 + dd * (radius**2 - ss)
        return (-sd + np.sqrt(max(disc, 0.0))) / dd

    for _ in range(max_iter):
        hd = hess_op(d)
        curv = real_inner(d, hd)
        if curv <= 0:
            sigma = to_boundary(s, d)
            return s + sigma * d, hs + sigma * hd, True
        alpha = rr / curv
        s_next = s + alpha * d
        if real_norm(s_next) >= radius:
            sigma = to_boundary(s, d)
            return s + sigma * d, hs + sigma * hd, True
        s = s_next
        hs = hs + alpha * hd
        r = r + alpha * hd
        rr_next = real_inner(r, r)
        if np.sqrt(rr_next) <= rtol:
            return s, hs, False
        d = -r + (rr_next / rr) * d
        rr = rr_next
    return s, hs, False


def _derivative_check(obj: Objective, manifold: Manifold, x0, f0, egrad0) -> None:
    """Compare <egrad, w> with central differences of f o retract at x0."""
    rng = np.random.default_rng(0x5EED)
    w = manifold.random_tangent(x0, rng)
    ip = real_inner(egrad0, w)
    t = 1e-6
    fd = (obj.f(manifold.retract(x0, t * w)) - obj.f(manifold.retract(x0, -t * w))) / (2 * t)
    scale = max(abs(fd), abs(ip))
    if scale <= 1e-8 * max(1.0, abs(f0)):
        return  # direction is flat to working precision; nothing to compare
    if abs(fd - ip) / scale > 1e-4:
        raise DerivativeCheckError(
            f"gradient/finite-difference mismatch: <egrad, w>={ip:.6e}, "
            f"central difference={fd:.6e}"
        )


def minimize(obj: Objective, manifold: Manifold, x0: np.ndarray, cfg: TRConfig) -> TRReport:
    """Trust-region minimization of ``obj`` over ``manifold`` from ``x0``.

    Falls back to :func:`minimize_first_order` when no Hessian-vector
    product is supplied.  Accepted iterates never increase the objective.
    """
    if obj.ehess_vec is None:
        return minimize_first_order(obj, manifold, x0, cfg)

    x = np.asarray(x0)
    f = float(obj.f(x))
    eg = obj.egrad(x)
    if not np.isfinite(f) or not np.all(np.isfinite(eg)):
        raise ValueError("objective or gradient not finite at the initial point")
    if cfg.check_derivatives:
        _derivative_check(obj, manifold, x, f, eg)

    radius = cfg.initial_radius
    history = [f]
    rejections = 0
    g = manifold.riemannian_gradient(x, eg)
    gnorm = real_norm(g)

    for it in range(1, cfg.max_iter + 1):
        if gnorm <= cfg.grad_tol:
            return TRReport(x, f, gnorm, it - 1, history, GRAD_TOL)

        def hess_op(w, _x=x, _eg=eg):
            return manifold.riemannian_hessian_vec(_x, _eg, obj.ehess_vec(_x, w), w)

        s, hs, hit_boundary = truncated_cg(g, hess_op, radius, cfg)
        model_decrease = -(real_inner(g, s) + 0.5 * real_inner(s, hs))
        x_new = manifold.retract(x, s)
        f_new = float(obj.f(x_new))

        if np.isfinite(f_new) and model_decrease > 0:
            rho = (f - f_new) / model_decrease
        else:
            rho = -np.inf
        if rho < 0.25:
            radius = 0.25 * radius
        elif rho > 0.75 and hit_boundary:
            radius = min(2.0 * radius, cfg.max_radius)

        if rho > cfg.acceptance_threshold and f_new <= f:
            x, f = x_new, f_new
            history.append(f)
            eg = obj.egrad(x)
            if not np.all(np.isfinite(eg)):
                return TRReport(x, f, gnorm, it, history, STAGNATION)
            g = manifold.riemannian_gradient(x, eg)
            gnorm = real_norm(g)
            rejections = 0
        else:
            rejections += 1
            if rejections >= cfg.reject_limit and radius < cfg.min_radius:
                return TRReport(x, f, gnorm, it, history, STAGNATION)

    return TRReport(x, f, gnorm, cfg.max_iter, history, MAX_ITER)


def minimize_first_order(
    obj: Objective, manifold: Manifold, x0: np.ndarray, cfg: TRConfig
) -> TRReport:
    """Gradient descent with Armijo backtracking along retractions."""
    x = np.asarray(x0)
    f = float(obj.f(x))
    eg = obj.egrad(x)
    if not np.isfinite(f) or not np.all(np.isfinite(eg)):
        raise ValueError("objective or gradient not finite at the initial point")
    if cfg.check_derivatives:
        _derivative_check(obj, manifold, x, f, eg)

    history = [f]
    f_prev = None
    alpha = None

    for it in range(1, cfg.max_iter + 1):
        g = manifold.riemannian_gradient(x, eg)
        gnorm = real_norm(g)
        if gnorm <= cfg.grad_tol:
            return TRReport(x, f, gnorm, it - 1, history, GRAD_TOL)
        d = -g
        slope = -(gnorm**2)
        # warm-started initial step, Barzilai-Borwein flavoured
        if f_prev is not None and f < f_prev:
            alpha = 4.0 * (f - f_prev) / slope
        else:
            alpha = 1.0 / max(gnorm, 1.0)

        accepted = False
        for _ in range(cfg.max_line_search):
            x_try = manifold.retract(x, alpha * d)
            f_try = float(obj.f(x_try))
            if np.isfinite(f_try) and f_try <= f + cfg.armijo_decrease * alpha * slope:
                accepted = True
                break
            alpha *= cfg.armijo_contraction
        if not accepted:
            return TRReport(x, f, gnorm, it, history, STAGNATION)

        f_prev = f
        x, f = x_try, f_try
        history.append(f)
        eg = obj.egrad(x)
        if not np.all(np.isfinite(eg)):
            return TRReport(x, f, gnorm, it, history, STAGNATION)

    g = manifold.riemannian_gradient(x, eg)
    return TRReport(x, f, real_norm(g), cfg.max_iter, history, MAX_ITER)
