"""Two-phase derivative-free maximization over a bounded parameter box.

Phase one samples the box with a seeded low-discrepancy (Halton) sequence;
phase two repeatedly fits a Gaussian-process surrogate (RBF kernel, one
length scale chosen by marginal likelihood over a small grid) to all
evaluations and picks the next point by maximizing expected improvement
with a multi-start local search. Integer-flagged parameters are rounded
when handed to the objective but stay continuous inside the surrogate.

Everything is deterministic given (seed, space, objective); repeated
parameter sets are served from a cache but still appear in the trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sciopt
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.stats import norm, qmc

from .types import ParamSpace, param_key

EXPLORE = "explore"
EXPLOIT = "exploit"

LENGTH_SCALES = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)


@dataclass(frozen=True)
class OptimizeBudget:
    total: int = 100
    explore: int = 30
    exploit: int = 70
    seed: int = 0

    def __post_init__(self):
        if self.explore + self.exploit != self.total:
            raise ValueError("explore + exploit must equal total")
        if self.explore < 1 or self.exploit < 0:
            raise ValueError("bad phase budget")


@dataclass
class TracePoint:
    params: dict[str, float]
    score: float
    phase: str


@dataclass
class OptimizeResult:
    best_params: dict[str, float]
    best_score: float
    trace: list[TracePoint] = field(default_factory=list)


class _CachedObjective:
    """Rounds integral axes, enforces the box, caches evaluations."""

    def __init__(self, space: ParamSpace, fn):
        self.space = space
        self.fn = fn
        self.cache: dict[tuple, float] = {}

    def __call__(self, params: dict[str, float]) -> tuple[dict[str, float], float]:
        clipped = self.space.clip(params)
        key = param_key(clipped)
        if key not in self.cache:
            self.cache[key] = float(self.fn(clipped))
        return clipped, self.cache[key]


def _unit_to_params(space: ParamSpace, u: np.ndarray) -> dict[str, float]:
    out = {}
    for k, name in enumerate(space.names):
        lo, hi = space.bounds[name]
        out[name] = lo + float(u[k]) * (hi - lo)
    return out


class _Surrogate:
    """GP with an RBF kernel on the unit cube; y standardized internally."""

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.x = x
        self.y_mean = float(y.mean())
        self.y_std = float(y.std())
        self.flat = self.y_std < 1e-14
        ys = np.zeros_like(y) if self.flat else (y - self.y_mean) / self.y_std
        self.ys = ys
        best_nll = np.inf
        for ell in LENGTH_SCALES:
            fit = self._fit(ell)
            if fit is not None and fit[0] < best_nll:
                best_nll, self.ell, self.chol, self.alpha = fit[0], ell, fit[1], fit[2]
        if not np.isfinite(best_nll):
            raise RuntimeError("surrogate fit failed at every length scale")

    def _kernel(self, a: np.ndarray, b: np.ndarray, ell: float) -> np.ndarray:
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        return np.exp(-0.5 * d2 / (ell * ell))

    def _fit(self, ell: float):
        n = len(self.x)
        k = self._kernel(self.x, self.x, ell)
        for jitter in (1e-8, 1e-6, 1e-4, 1e-2):
            try:
                chol = cho_factor(k + jitter * np.eye(n), lower=True)
            except np.linalg.LinAlgError:
                continue
            alpha = cho_solve(chol, self.ys)
            nll = 0.5 * float(self.ys @ alpha) + float(np.log(np.diag(chol[0])).sum())
            return nll, chol, alpha
        return None

    def predict(self, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        kq = self._kernel(xq, self.x, self.ell)
        mu = kq @ self.alpha
        v = solve_triangular(self.chol[0], kq.T, lower=True)
        var = np.clip(1.0 - (v * v).sum(axis=0), 0.0, None)
        sd = np.sqrt(var)
        if self.flat:
            return np.full(len(xq), self.y_mean), sd
        return self.y_mean + self.y_std * mu, self.y_std * sd

    def expected_improvement(self, xq: np.ndarray, best_y: float) -> np.ndarray:
        mu, sd = self.predict(xq)
        imp = mu - best_y
        out = np.where(imp > 0, imp, 0.0)
        ok = sd > 1e-12
        z = np.zeros_like(imp)
        z[ok] = imp[ok] / sd[ok]
        out = np.where(ok, imp * norm.cdf(z) + sd * norm.pdf(z), out)
        return out


def _propose(surrogate: _Surrogate, best_y: float, best_x: np.ndarray, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Maximize expected improvement: seeded candidates plus local polish."""
    cands = rng.uniform(0.0, 1.0, size=(256, dim))
    local = np.clip(best_x + rng.normal(0.0, 0.05, size=(32, dim)), 0.0, 1.0)
    cands = np.vstack([cands, local])
    ei = surrogate.expected_improvement(cands, best_y)
    starts = cands[np.argsort(-ei)[:2]]

    def neg_ei(u: np.ndarray) -> float:
        return -float(surrogate.expected_improvement(u[None, :], best_y)[0])

    best_u, best_v = starts[0], -ei.max()
    for s in starts:
        res = sciopt.minimize(neg_ei, s, method="L-BFGS-B", bounds=[(0.0, 1.0)] * dim, options={"maxiter": 40})
        if res.fun < best_v:
            best_u, best_v = np.clip(res.x, 0.0, 1.0), float(res.fun)
    if best_v >= 0.0:
        # flat acquisition (e.g. constant objective): fall back to the most
        # uncertain candidate for exploration
        _, sd = surrogate.predict(cands)
        best_u = cands[int(np.argmax(sd))]
    return best_u


def optimize(space: ParamSpace, objective, budget: OptimizeBudget = OptimizeBudget(), method: str = "surrogate") -> OptimizeResult:
    """Maximize objective(params) over the space box.

    method="surrogate" is the two-phase scheme described above;
    method="random" replaces exploitation with seeded uniform sampling
    (differential-testing baseline). The trace has exactly budget.total
    entries, each inside the box.
    """
    if budget.total < 2:
        raise ValueError("budget must be >= 2")
    if space.dim == 0 or space.volume_degenerate():
        raise ValueError("search space has zero volume")
    if method not in ("surrogate", "random"):
        raise ValueError(f"unknown method {method!r}")

    names = space.names
    dim = space.dim
    seeds = np.random.SeedSequence(budget.seed).spawn(2)
    rng = np.random.Generator(np.random.PCG64(seeds[1]))
    cached = _CachedObjective(space, objective)

    trace: list[TracePoint] = []
    xs: list[np.ndarray] = []
    ys: list[float] = []

    halton = qmc.Halton(d=dim, scramble=True, seed=np.random.Generator(np.random.PCG64(seeds[0])))
    for u in halton.random(budget.explore):
        params, score = cached(_unit_to_params(space, u))
        trace.append(TracePoint(params=params, score=score, phase=EXPLORE))
        xs.append(np.asarray(u, dtype=float))
        ys.append(score)

    for _ in range(budget.exploit):
        if method == "random":
            u = rng.uniform(0.0, 1.0, size=dim)
        else:
            surrogate = _Surrogate(np.vstack(xs), np.asarray(ys))
            k_best = int(np.argmax(ys))
            u = _propose(surrogate, ys[k_best], xs[k_best], dim, rng)
        params, score = cached(_unit_to_params(space, u))
        trace.append(TracePoint(params=params, score=score, phase=EXPLOIT))
        xs.append(np.asarray(u, dtype=float))
        ys.append(score)

    k = int(np.argmax([t.score for t in trace]))
    return OptimizeResult(best_params=dict(trace[k].params), best_score=trace[k].score, trace=trace)


def phase_best(result: OptimizeResult) -> tuple[float, float]:
    """(best exploration score, best overall score) from a trace."""
    explore = [t.score for t in result.trace if t.phase == EXPLORE]
    return max(explore), max(t.score for t in result.trace)


def space_from_json(payload: dict) -> ParamSpace:
    """Bounds file format: {"name": [lo, hi]} or [lo, hi, "int"]."""
    bounds = {}
    integral = set()
    for name, spec in payload.items():
        lo, hi = float(spec[0]), float(spec[1])
        bounds[name] = (lo, hi)
        if len(spec) > 2 and spec[2] == "int":
            integral.add(name)
    return ParamSpace(bounds=bounds, integral=frozenset(integral))
