"""Canonical benchmark instances used by the experiments and tests."""

from __future__ import annotations

import numpy as np

from .core import InitialStateModel, LqrInstance, NoiseModel, constant_instance
from .liquidation import AcParams

# (beta, gamma, sigma) calibrated per stock from one trading day of quotes
STOCK_PARAMS = {
    "AAPL": (1.03e-5, 7.27e-6, 0.107),
    "FB": (1.30e-5, 1.40e-5, 0.115),
    "IBM": (2.65e-5, 4.60e-5, 0.082),
    "JPM": (9.28e-6, 1.65e-5, 0.059),
    "AAL": (3.27e-5, 1.3310e-5, 0.042),
}


def scalar_benchmark() -> LqrInstance:
    """d = k = 1, T = 5 test problem: A = 1, B = 0.2, Q_t = 0.2, Q_T = 0.4,
    R_t = 0.1 (t+1), Gaussian noise and initial state with scale 0.1."""
    T = 5
    Q = np.full((T + 1, 1, 1), 0.2)
    Q[T] = 0.4
    R = (0.1 * np.arange(1, T + 1)).reshape(T, 1, 1)
    return LqrInstance(
        np.eye(1),
        np.full((1, 1), 0.2),
        Q,
        R,
        NoiseModel("gaussian", 0.1),
        InitialStateModel("gaussian", np.zeros(1), 0.1),
    )


def four_state_benchmark() -> LqrInstance:
    """d = 4, k = 2, T = 10 benchmark with diagonal noise covariance
    diag(0.1, 0.5, 0.2, 0.3) and independent Gaussian initial coordinates."""
    A = np.array([
        [0.5, 0.05, 0.1, 0.2],
        [0.0, 0.2, 0.3, 0.1],
        [0.06, 0.1, 0.2, 0.4],
        [0.05, 0.2, 0.15, 0.1],
    ])
    B = np.array([
        [-0.05, -0.01],
        [-0.005, -0.01],
        [-1.0, -0.01],
        [-0.01, -0.9],
    ])
    Q = np.array([
        [1.0, 0.2, -0.05, 0.015],
        [0.2, 1.1, 0.15, 0.0],
        [-0.05, 0.15, 0.9, -0.08],
        [0.015, 0.0, -0.08, 0.88],
    ])
    R = np.array([[0.4, -0.25], [-0.25, 0.7]])
    noise = NoiseModel("gaussian", 1.0, np.diag(np.sqrt([0.1, 0.5, 0.2, 0.3])))
    init = InitialStateModel("gaussian", np.array([5.0, 2.0, 8.0, 5.0]), 1.0, np.diag([0.1, 0.3, 1.0, 0.5]))
    return constant_instance(A, B, Q, R, Q, 10, noise, init)


def stock_liquidation(ticker: str = "AAPL", *, phi: float = 5e-6, epsilon: float = 1e-8, T: int = 10) -> AcParams:
    beta, gamma, sigma = STOCK_PARAMS[ticker]
    return AcParams(beta=beta, gamma=gamma, sigma=sigma, phi=phi, epsilon=epsilon, T=T)
