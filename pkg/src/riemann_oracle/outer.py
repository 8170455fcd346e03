"""Outer continuation solvers around the regularized inner oracle.

The penalty loop repeatedly minimizes f_eps over the manifold while driving
eps -> 0; the augmented-Lagrangian variant additionally carries a multiplier
y, updated after every inner solve by the ascent step

    y  <-  y + eps^{-1} (A + Delta_*) v_*  =  -z,

where the right-hand form follows from the stationarity of the inner solve
and is used verbatim because it is cancellation-free at small eps.  The
penalty method is the same engine with y frozen at zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .manifolds import Grassmann, Manifold
from .oracle import ExactEvaluation, InnerEvaluation
from .trust_region import Objective, TRConfig, minimize, minimize_first_order


class SolverError(RuntimeError):
    """Every multistart replica failed; carries the best partial trace."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace or []


@dataclass
class AdaptiveEps:
    """Back-off schedule for the regularization parameter.

    The candidate eps_{k+1} = eps_k * rho1 is accepted unless the new value
    f_{eps_{k+1}}(v_k) exceeds C_f * f_k, in which case eps_{k+1} is moved up
    by factors of rho2 until the jump is acceptable or the accumulated
    increase passes C_rho.
    """

    rho1: float = 0.1
    rho2: float = 2.0
    c_f: float = 2.0
    c_rho: float = 16.0

    def __post_init__(self):
        if not self.rho1 < 1.0 < self.rho2:
            raise ValueError("need rho1 < 1 < rho2")
        if self.c_f <= 1.0:
            raise ValueError("need C_f > 1")


@dataclass
class SolverConfig:
    eps0: float = 1.0
    mu: float = 0.7
    grad_tol: float = 1e-8
    max_outer: int = 80
    mode: str = "penalty"  # "penalty" | "auglag"
    adaptive: Optional[AdaptiveEps] = None
    eta0: float = 1e-2  # inner gradient tolerance schedule eta_k = max(tau, eta0 * decay^k)
    eta_decay: float = 0.5
    multistart: int = 1
    seed: int = 0
    inner: TRConfig = field(default_factory=TRConfig)
    spectral_start: bool = True
    freeze_multiplier: bool = False  # diagnostic: auglag with the y-update disabled

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError("need 0 < mu < 1")
        if self.eps0 <= 0 or self.grad_tol <= 0:
            raise ValueError("eps0 and grad_tol must be positive")
        if self.mode not in ("penalty", "auglag"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")


@dataclass
class TraceRecord:
    outer_iter: int
    eps: float
    y_norm: float
    f_eps: float
    f_exact: float
    constraint_norm: float
    inner_iters: int
    sigma_min_M: float
    wall_time_ms: float

    FIELDS = (
        "outer_iter",
        "eps",
        "y_norm",
        "f_eps",
        "f_exact",
        "constraint_norm",
        "inner_iters",
        "sigma_min_M",
        "wall_time_ms",
    )


@dataclass
class Solution:
    delta: np.ndarray  # structure-space coordinates of the reported perturbation
    Delta: np.ndarray  # the perturbation in its natural matrix representation
    v: np.ndarray  # reported kernel vector / block
    distance: float
    residual: float  # ||(A + Delta) v|| of the reported pair
    feasible: bool
    trace: list[TraceRecord]
    lambda_star: Optional[complex] = None
    warnings: list[str] = field(default_factory=list)


class _CachedObjective:
    """Objective adapter with a one-slot evaluation cache per point."""

    def __init__(self, oracle, eps: float, y):
        self.oracle = oracle
        self.eps = eps
        self.y = y
        self._key = None
        self._ev: Optional[InnerEvaluation] = None

    def _evaluation(self, v) -> InnerEvaluation:
        key = v.tobytes()
        if self._key != key:
            self._ev = self.oracle.evaluate(v, self.eps, self.y)
            self._key = key
        return self._ev

    def f(self, v) -> float:
        return self._evaluation(v).value

    def egrad(self, v):
        return self.oracle.gradient(v, self.eps, self.y, self._evaluation(v))

    def ehess_vec(self, v, w):
        return self.oracle.hessian_vec(v, self.eps, self.y, self._evaluation(v), w)


def adapt_epsilon(oracle, v, y, eps_k: float, f_k: float, params: AdaptiveEps) -> float:
    """One adaptive update of the regularization parameter after an inner solve."""
    cand = eps_k * params.rho1
    fbar = oracle.evaluate(v, cand, y).value
    acc = 1.0
    while fbar > params.c_f * f_k:
        acc *= params.rho2
        cand = eps_k * acc
        if acc > params.c_rho:
            return cand
        fbar = oracle.evaluate(v, cand, y).value
    return cand


def feasibility_refine(oracle, v_star, ev: InnerEvaluation):
    """Post-process a converged point onto the numerically feasible set.

    Returns the refined point and the exact value there.  Raises when the
    refinement is undefined for the problem at hand (non-square or singular
    A).
    """
    v_reg = oracle.refine_feasibility(v_star, ev)
    if v_reg is None:
        raise ValueError("feasibility refinement requires a square nonsingular target matrix")
    ex = oracle.exact_solution(v_reg, None)
    return v_reg, ex.value


def _initial_points(oracle, manifold: Manifold, cfg: SolverConfig) -> list[np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    points: list[np.ndarray] = []
    if cfg.spectral_start:
        ell = manifold.shape[1] if isinstance(manifold, Grassmann) else 1
        start = oracle.spectral_start(ell)
        if start is not None:
            start = np.asarray(start, dtype=manifold.dtype)
            if start.shape == manifold.shape:
                points.append(start)
    while len(points) < cfg.multistart:
        points.append(manifold.random_point(rng))
    return points[: cfg.multistart]


def _constraint_vector(ev: InnerEvaluation, y, eps: float) -> np.ndarray:
    # (A + Delta_*) v = -eps (z + y), exact at the inner minimizer
    z = ev.z
    if y is not None:
        z = z + np.asarray(y).reshape(-1, order="F")
    return -eps * z


def _run_one(oracle, manifold: Manifold, cfg: SolverConfig, v0, update_y: bool):
    v = np.asarray(v0, dtype=manifold.dtype)
    y = None
    eps = cfg.eps0
    trace: list[TraceRecord] = []
    t0 = time.perf_counter()
    ev = None
    for k in range(1, cfg.max_outer + 1):
        eta_k = max(cfg.grad_tol, cfg.eta0 * cfg.eta_decay**k)
        inner_cfg = replace(
            cfg.inner,
            grad_tol=eta_k,
            check_derivatives=cfg.inner.check_derivatives and k == 1,
        )
        objective = _CachedObjective(oracle, eps, y)
        if oracle.has_hessian:
            report = minimize(
                Objective(objective.f, objective.egrad, objective.ehess_vec),
                manifold,
                v,
                inner_cfg,
            )
        else:
            report = minimize_first_order(
                Objective(objective.f, objective.egrad, None), manifold, v, inner_cfg
            )
        v = report.final_point
        ev = oracle.evaluate(v, eps, y)
        exact = oracle.exact_solution(v, ev)
        cons = float(np.linalg.norm(_constraint_vector(ev, y, eps)))
        trace.append(
            TraceRecord(
                outer_iter=k,
                eps=eps,
                y_norm=0.0 if y is None else float(np.linalg.norm(y)),
                f_eps=ev.value,
                f_exact=exact.g_value,
                constraint_norm=cons,
                inner_iters=report.iterations,
                sigma_min_M=ev.sigma_min,
                wall_time_ms=(time.perf_counter() - t0) * 1e3,
            )
        )
        if update_y and not cfg.freeze_multiplier:
            y = -ev.z.copy()
        if k < cfg.max_outer:
            if cfg.adaptive is not None:
                eps = adapt_epsilon(oracle, v, y, eps, ev.value, cfg.adaptive)
            else:
                eps = eps * cfg.mu
    return v, ev, trace


def _finalize(oracle, v, ev: InnerEvaluation, trace, y_used) -> Solution:
    candidates: list[tuple[np.ndarray, ExactEvaluation]] = []
    v_reg = oracle.refine_feasibility(v, ev)
    if v_reg is not None:
        candidates.append((v_reg, oracle.exact_solution(v_reg, None)))
    candidates.append((v, oracle.exact_solution(v, ev)))
    candidates.sort(key=lambda c: (not c[1].feasible, c[1].g_value, c[1].residual))
    v_best, ex_best = candidates[0]
    scale = oracle.distance_scale
    lam = getattr(ev, "lambda_star", None)
    if ex_best.feasible:
        return Solution(
            delta=ex_best.delta_star,
            Delta=ex_best.Delta_star,
            v=v_best,
            distance=scale * float(np.linalg.norm(ex_best.delta_star)),
            residual=ex_best.residual,
            feasible=True,
            trace=trace,
            lambda_star=lam,
        )
    # fall back on the last regularized perturbation with an explicit flag
    cons = trace[-1].constraint_norm if trace else np.inf
    return Solution(
        delta=ev.delta_star,
        Delta=ev.Delta_star,
        v=v,
        distance=scale * float(np.linalg.norm(ev.delta_star)),
        residual=cons,
        feasible=False,
        trace=trace,
        lambda_star=lam,
        warnings=["no feasible exact solution found; reporting the regularized minimizer"],
    )


def _solve(oracle, manifold: Manifold, cfg: SolverConfig, update_y: bool) -> Solution:
    solutions: list[Solution] = []
    failures: list[Exception] = []
    best_failed_trace: list[TraceRecord] = []
    for v0 in _initial_points(oracle, manifold, cfg):
        try:
            v, ev, trace = _run_one(oracle, manifold, cfg, v0, update_y)
        except (ValueError, RuntimeError) as exc:  # inner solver failure; try next start
            failures.append(exc)
            continue
        solutions.append(_finalize(oracle, v, ev, trace, update_y))
    if not solutions:
        raise SolverError(
            f"all {cfg.multistart} starts failed; last error: {failures[-1]}",
            best_failed_trace,
        )
    solutions.sort(key=lambda s: (not s.feasible, s.distance, s.residual))
    return solutions[0]


def penalty_solve(oracle, manifold: Manifold, cfg: SolverConfig) -> Solution:
    """Penalty continuation: minimize f_eps while decreasing eps, warm-started."""
    if cfg.mode != "penalty":
        raise ValueError("config mode must be 'penalty'")
    return _solve(oracle, manifold, cfg, update_y=False)


def auglag_solve(oracle, manifold: Manifold, cfg: SolverConfig) -> Solution:
    """Augmented-Lagrangian continuation with multiplier ascent."""
    if cfg.mode != "auglag":
        raise ValueError("config mode must be 'auglag'")
    return _solve(oracle, manifold, cfg, update_y=True)


def solve(oracle, manifold: Manifold, cfg: SolverConfig) -> Solution:
    """Dispatch on cfg.mode."""
    if cfg.mode == "penalty":
        return penalty_solve(oracle, manifold, cfg)
    return auglag_solve(oracle, manifold, cfg)
