"""Model-free policy gradient via sphere-smoothed zeroth-order estimates.

The learner touches the system only through a simulator handle exposing
rollout(policy, seed) -> realized cost.  For each time slot t it perturbs
K_t by a matrix U drawn uniformly from the Frobenius sphere of radius r,
rolls one full trajectory under the perturbed policy, and averages

    ghat_t = (D / r^2) * mean_i  cost_i * U_i,        D = k * d.

All randomness is keyed by counter tuples (seed, iteration, t, i) so runs
are reproducible and independent of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    LqrInstance,
    exact_cost,
    exact_gradient,
    make_rng,
    simulate_trajectory,
    solve_riccati,
)
from .errors import DegenerateDraw, Diverged, NotInSet
from .optimize import DescentConfig, DescentTrace, ProjectionSet, _grad_norm

ZO_TRACE_COLUMNS = [
    "iter",
    "cost",
    "normalized_error",
    "grad_fro_norm",
    "eta",
    "m",
    "r",
    "est_grad_fro_norm",
]


@dataclass(frozen=True)
class SmoothingConfig:
    radius: float  # Frobenius radius r of the perturbation sphere
    samples: int  # m rollouts per time slot


@dataclass
class GradientEstimate:
    grads: np.ndarray  # (T, k, d)
    mean_costs: np.ndarray  # (T,) average rollout cost per slot
    samples: int
    radius: float


def sample_sphere(shape: tuple[int, int], radius: float, seed) -> np.ndarray:
    """Uniform draw from the Frobenius sphere of the given radius."""
    rng = make_rng(seed)
    for _ in range(100):
        g = rng.standard_normal(shape)
        nrm = float(np.sqrt((g**2).sum()))
        if nrm > 1e-30:
            return (radius / nrm) * g
    raise DegenerateDraw("could not normalize a sphere draw")


def sample_sphere_batch(n: int, shape: tuple[int, int], radius: float, seed) -> np.ndarray:
    """(n, *shape) independent sphere draws from a single stream (test utility)."""
    rng = make_rng(seed)
    g = rng.standard_normal((n, *shape))
    nrm = np.sqrt((g**2).sum(axis=(1, 2), keepdims=True))
    nrm[nrm <= 1e-30] = 1.0
    return radius * g / nrm


class LqrSimulator:
    """Opaque rollout interface over an LqrInstance.

    Optimization loops use only T, k, d and the rollout methods, never the
    instance matrices.  rollout_perturbed_batch vectorizes the dynamics but
    replays exactly the per-trajectory noise streams simulate_trajectory
    would consume for seeds (*key, i, 1).
    """

    def __init__(self, instance: LqrInstance):
        self._inst = instance
        self.T = instance.T
        self.k = instance.k
        self.d = instance.d

    def rollout(self, policy, seed) -> float:
        return simulate_trajectory(self._inst, policy, seed).realized_cost

    def rollout_perturbed_batch(self, policy, t: int, U: np.ndarray, key) -> np.ndarray:
        inst = self._inst
        T, d = self.T, self.d
        m = U.shape[0]
        x0 = np.empty((m, d))
        w = np.empty((m, T, d))
        for i in range(m):
            rng = make_rng([*key, i, 1])
            x0[i] = inst.init.draw(rng)
            w[i] = inst.noise.draw(rng, T, d)
        K = np.asarray(policy, dtype=float)
        Kt = K[t][None] + U  # (m, k, d)
        x = x0
        cost = np.zeros(m)
        for s in range(T):
            if s == t:
                u = -np.einsum("ikd,id->ik", Kt, x)
            else:
                u = -(x @ K[s].T)
            cost += np.einsum("id,de,ie->i", x, inst.Q[s], x)
            cost += np.einsum("ik,kl,il->i", u, inst.R[s], u)
            x = x @ inst.A.T + u @ inst.B.T + w[:, s]
        cost += np.einsum("id,de,ie->i", x, inst.Q[T], x)
        return cost


def _default_batch(sim, policy, t, U, key):
    """Fallback batch rollout for handles exposing only rollout()."""
    K = np.asarray(policy, dtype=float)
    costs = np.empty(U.shape[0])
    for i in range(U.shape[0]):
        pert = K.copy()
        pert[t] = pert[t] + U[i]
        costs[i] = sim.rollout(pert, [*key, i, 1])
    return costs


def estimate_gradient(sim, policy, cfg: SmoothingConfig, seed, iteration: int = 0) -> GradientEstimate:
    """Zeroth-order gradient estimate from m single-trajectory rollouts per slot."""
    if isinstance(sim, LqrInstance):
        sim = LqrSimulator(sim)
    T, k, d = sim.T, sim.k, sim.d
    D = k * d
    r, m = cfg.radius, cfg.samples
    grads = np.empty((T, k, d))
    mean_costs = np.empty(T)
    batch = getattr(sim, "rollout_perturbed_batch", None)
    for t in range(T):
        key = [seed, iteration, t]
        U = np.empty((m, k, d))
        for i in range(m):
            U[i] = sample_sphere((k, d), r, [*key, i, 0])
        costs = batch(policy, t, U, key) if batch is not None else _default_batch(sim, policy, t, U, key)
        grads[t] = (D / r**2) * np.einsum("i,ikd->kd", costs, U) / m
        mean_costs[t] = costs.mean()
    return GradientEstimate(grads=grads, mean_costs=mean_costs, samples=m, radius=r)


def smoothed_gradient_reference(instance: LqrInstance, policy, t: int, radius: float, n_samples: int, seed) -> np.ndarray:
    """Monte Carlo estimate of the smoothed gradient at slot t using exact
    costs instead of single-trajectory rollouts (the intermediate oracle
    between the sampled estimator and the exact gradient)."""
    K = np.asarray(policy, dtype=float)
    k, d = K.shape[1], K.shape[2]
    D = k * d
    U = sample_sphere_batch(n_samples, (k, d), radius, seed)
    acc = np.zeros((k, d))
    pert = K.copy()
    base = exact_cost(instance, K)  # E[U] = 0, so subtracting it only cuts variance
    for i in range(n_samples):
        pert[t] = K[t] + U[i]
        acc += (exact_cost(instance, pert) - base) * U[i]
    return (D / radius**2) * acc / n_samples


def run_modelfree_pg(sim, policy0, cfg: DescentConfig, smoothing: SmoothingConfig, seed, *, cost_oracle=None, constraint: ProjectionSet | None = None, use_exact_gradient: bool = False):
    """Gradient descent driven by zeroth-order estimates (projected when a
    constraint set is given).

    cost_oracle(policy) -> exact cost is used only for trace reporting; when
    sim is an LqrInstance it defaults to the closed-form evaluation and the
    normalized-error column is filled from the Riccati solution.
    """
    instance = sim if isinstance(sim, LqrInstance) else None
    if isinstance(sim, LqrInstance):
        sim = LqrSimulator(sim)
        instance = sim._inst
    if use_exact_gradient and instance is None:
        raise ValueError("exact-gradient mode needs an LqrInstance")
    if constraint is not None and not constraint.contains(policy0):
        raise NotInSet("initial policy violates the constraint set")
    cstar = solve_riccati(instance).optimal_cost if instance is not None else np.nan
    if cost_oracle is None and instance is not None:
        cost_oracle = lambda K: exact_cost(instance, K)
    K = np.array(policy0, dtype=float)
    trace = DescentTrace(columns=list(ZO_TRACE_COLUMNS))
    cost = cost_oracle(K) if cost_oracle is not None else np.nan
    guard = 1e12 * max(abs(cost), 1.0) if np.isfinite(cost) else np.inf
    for n in range(cfg.iters):
        if use_exact_gradient:
            ghat = exact_gradient(instance, K)
            est = GradientEstimate(ghat, np.full(sim.T, np.nan), 0, smoothing.radius)
        else:
            est = estimate_gradient(sim, K, smoothing, seed, iteration=n)
        err = (cost - cstar) / cstar if np.isfinite(cost) else np.nan
        gnorm = _grad_norm(exact_gradient(instance, K)) if instance is not None else np.nan
        trace.append(n, cost, err, gnorm, cfg.eta, est.samples, est.radius, _grad_norm(est.grads))
        step = K - cfg.eta * est.grads
        K = constraint.project(step) if constraint is not None else step
        cost = cost_oracle(K) if cost_oracle is not None else np.nan
        if np.isfinite(cost) and abs(cost) > guard:
            raise Diverged(f"cost {cost:g} exceeded divergence guard at iteration {n}")
        if cfg.target_error is not None and np.isfinite(cost) and (cost - cstar) / cstar <= cfg.target_error:
            break
    err = (cost - cstar) / cstar if np.isfinite(cost) else np.nan
    gnorm = _grad_norm(exact_gradient(instance, K)) if instance is not None else np.nan
    trace.append(len(trace.rows), cost, err, gnorm, cfg.eta, smoothing.samples, smoothing.radius, np.nan)
    return K, trace


def run_modelfree_ppg(sim, policy0, cfg: DescentConfig, smoothing: SmoothingConfig, seed, constraint: ProjectionSet, **kw):
    """Projected variant: every iterate is projected back onto the set."""
    return run_modelfree_pg(sim, policy0, cfg, smoothing, seed, constraint=constraint, **kw)
