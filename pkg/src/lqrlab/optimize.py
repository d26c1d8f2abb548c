"""Exact policy gradient descent, projected variants, and constraint sets."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import LqrInstance, exact_cost, exact_gradient, solve_riccati
from .errors import Diverged, EmptySet, NotInSet, StepSizeUnderflow, ZeroOptimalCost

_MEMBER_TOL = 1e-9


@dataclass
class DescentConfig:
    eta: float
    iters: int
    line_search: bool = False
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    eta_floor: float = 1e-15
    divergence_factor: float = 1e12
    target_error: float | None = None  # stop when normalized error falls below


@dataclass
class DescentTrace:
    """Per-iteration records.  Extra per-column arrays may be attached by
    estimator-driven loops (samples m, radius r, estimated gradient norm)."""

    columns: list[str]
    rows: list[list[float]] = field(default_factory=list)

    def append(self, *vals: float) -> None:
        self.rows.append([float(v) for v in vals])

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(self.columns)
            w.writerows(self.rows)


@dataclass(frozen=True)
class ProjectionSet:
    """Per-time constraint set on gains.

    kinds:
      "unconstrained"
      "box":          lo <= K_t entries <= hi
      "liquidation":  k = 1, d = 2; per t the row (k1, k2) must satisfy
                      gamma_bar*k1 + k2 >= -1 + zeta, k1 <= 0, k2 <= 0.
    """

    kind: str = "unconstrained"
    lo: float = -np.inf
    hi: float = np.inf
    gamma_bar: float = 0.0
    zeta: float = 0.0

    def __post_init__(self):
        if self.kind == "box" and self.lo > self.hi:
            raise EmptySet("box has lo > hi")
        if self.kind == "liquidation":
            if self.zeta > 1.0:
                raise EmptySet("liquidation set requires zeta <= 1")
            if self.gamma_bar <= 0.0:
                raise EmptySet("liquidation set requires gamma_bar > 0")

    def contains(self, policy, tol: float = _MEMBER_TOL) -> bool:
        K = np.asarray(policy, dtype=float)
        if self.kind == "unconstrained":
            return True
        if self.kind == "box":
            return bool(np.all(K >= self.lo - tol) and np.all(K <= self.hi + tol))
        k1, k2 = K[:, 0, 0], K[:, 0, 1]
        return bool(
            np.all(self.gamma_bar * k1 + k2 >= -1.0 + self.zeta - tol)
            and np.all(k1 <= tol)
            and np.all(k2 <= tol)
        )

    def project(self, policy) -> np.ndarray:
        K = np.asarray(policy, dtype=float)
        if self.kind == "unconstrained":
            return K.copy()
        if self.kind == "box":
            return np.clip(K, self.lo, self.hi)
        if K.shape[1:] != (1, 2):
            raise ValueError("liquidation set applies to 1x2 gains")
        pts = K[:, 0, :]
        return _project_halfplane_triangle(pts, self.gamma_bar, self.zeta)[:, None, :]


def _project_halfplane_triangle(pts: np.ndarray, gamma_bar: float, zeta: float) -> np.ndarray:
    """Euclidean projection of (n, 2) points onto the triangle
    {g*x + y >= c, x <= 0, y <= 0} with c = zeta - 1 <= 0, g = gamma_bar > 0.

    Active-set enumeration over candidate points (input, three edge feet,
    three vertices); ties broken lexicographically (smaller x, then smaller y).
    """
    g, c = gamma_bar, zeta - 1.0
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n = pts.shape[0]
    cands = np.empty((7, n, 2))
    cands[0] = pts
    # foot of perpendicular on the line g*x + y = c
    resid = (g * pts[:, 0] + pts[:, 1] - c) / (g * g + 1.0)
    cands[1] = pts - resid[:, None] * np.array([g, 1.0])
    cands[2] = np.stack([np.zeros(n), pts[:, 1]], axis=1)  # edge x = 0
    cands[3] = np.stack([pts[:, 0], np.zeros(n)], axis=1)  # edge y = 0
    cands[4] = np.array([0.0, 0.0])
    cands[5] = np.array([0.0, c])
    cands[6] = np.array([c / g, 0.0])
    tol = 1e-12 * (1.0 + np.abs(c))
    feas = (
        (g * cands[..., 0] + cands[..., 1] >= c - tol)
        & (cands[..., 0] <= tol)
        & (cands[..., 1] <= tol)
    )
    d2 = ((cands - pts[None]) ** 2).sum(axis=-1)
    d2 = np.where(feas, d2, np.inf)
    # lexicographic tie-break among near-minimal candidates
    best = d2.min(axis=0)
    close = d2 <= best[None] + 1e-30
    x_key = np.where(close, cands[..., 0], np.inf)
    y_key = np.where(close, cands[..., 1], np.inf)
    order = np.lexsort((y_key, x_key), axis=0)[0]
    out = cands[order, np.arange(n)]
    # clip exact zeros so membership holds without tolerance games
    out[:, 0] = np.minimum(out[:, 0], 0.0)
    out[:, 1] = np.minimum(out[:, 1], 0.0)
    # rounding in the foot/vertex formulas can leave g*x + y an ulp below c;
    # nudge the violated rows up (y first, then x) until membership is exact
    for _ in range(64):
        bad = g * out[:, 0] + out[:, 1] < c
        if not bad.any():
            break
        bump_y = bad & (out[:, 1] < 0.0)
        out[bump_y, 1] = np.nextafter(out[bump_y, 1], 0.0)
        bump_x = bad & ~bump_y
        out[bump_x, 0] = np.nextafter(out[bump_x, 0], 0.0)
    return out


def normalized_error(instance: LqrInstance, policy, *, optimal_cost: float | None = None) -> float:
    """(C(K) - C(K*)) / C(K*) against the Riccati solution."""
    cstar = solve_riccati(instance).optimal_cost if optimal_cost is None else optimal_cost
    if abs(cstar) <= 1e-12:
        raise ZeroOptimalCost("optimal cost ~ 0; normalized error undefined")
    return (exact_cost(instance, policy) - cstar) / cstar


TRACE_COLUMNS = ["iter", "cost", "normalized_error", "grad_fro_norm", "eta"]


def _grad_norm(grads: np.ndarray) -> float:
    return float(np.sqrt((grads**2).sum()))


def run_exact_pg(instance: LqrInstance, policy0, cfg: DescentConfig):
    """Plain gradient descent on the gains with exact gradients."""
    return _descent(instance, policy0, cfg, projection=None)


def run_exact_ppg(instance: LqrInstance, policy0, cfg: DescentConfig, constraint: ProjectionSet):
    """Projected gradient descent; trace gains a gradient-mapping norm column."""
    if not constraint.contains(policy0):
        raise NotInSet("initial policy violates the constraint set")
    return _descent(instance, policy0, cfg, projection=constraint)


def _descent(instance: LqrInstance, policy0, cfg: DescentConfig, projection: ProjectionSet | None):
    K = np.array(policy0, dtype=float)
    cstar = solve_riccati(instance).optimal_cost
    cols = list(TRACE_COLUMNS) + (["gradmap_sq"] if projection is not None else [])
    trace = DescentTrace(columns=cols)
    cost = exact_cost(instance, K)
    guard = cfg.divergence_factor * max(abs(cost), 1.0)
    for n in range(cfg.iters):
        grads = exact_gradient(instance, K)
        gnorm = _grad_norm(grads)
        err = (cost - cstar) / cstar
        eta = cfg.eta
        if cfg.line_search:
            eta = _armijo(instance, K, grads, cost, cfg, projection)
        step = K - eta * grads
        K_next = projection.project(step) if projection is not None else step
        row = [n, cost, err, gnorm, eta]
        if projection is not None:
            gm = (K_next - K) / (2.0 * eta)
            row.append(float((gm**2).sum()))
        trace.append(*row)
        K = K_next
        cost = exact_cost(instance, K)
        if abs(cost) > guard:
            raise Diverged(f"cost {cost:g} exceeded divergence guard at iteration {n}")
        if cfg.target_error is not None and (cost - cstar) / cstar <= cfg.target_error:
            break
    err = (cost - cstar) / cstar
    final = [len(trace.rows), cost, err, _grad_norm(exact_gradient(instance, K)), cfg.eta]
    if projection is not None:
        final.append(np.nan)
    trace.append(*final)
    return K, trace


def _armijo(instance, K, grads, cost, cfg: DescentConfig, projection) -> float:
    gsq = float((grads**2).sum())
    eta = cfg.eta
    while eta >= cfg.eta_floor:
        step = K - eta * grads
        cand = projection.project(step) if projection is not None else step
        if projection is None:
            sufficient = cost - cfg.armijo_c * eta * gsq
        else:
            # for projected steps require decrease against the gradient mapping
            gm_sq = float(((cand - K) ** 2).sum()) / (4.0 * eta**2)
            sufficient = cost - cfg.armijo_c * eta * gm_sq
        if exact_cost(instance, cand) <= sufficient:
            return eta
        eta *= cfg.backtrack
    raise StepSizeUnderflow(f"line search fell below {cfg.eta_floor:g}")
