"""Power-law fit of training loss against model size and step count.

The loss surface is L(N, S) = (N_c / N)^alpha_N + (S_c / S)^alpha_S and
the fit minimizes the sum of squared log-loss residuals with a
multi-start Nelder-Mead search over log-parameters (16 log-uniform
starts, seed-deterministic).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

N_STARTS = 16


@dataclass(frozen=True)
class LossObservation:
    N: float  # model parameter count
    S: float  # training step index
    L: float  # observed loss

    def __post_init__(self):
        if self.N <= 0 or self.S <= 0 or self.L <= 0:
            raise ValueError(f"loss observations must be positive, got {self}")


@dataclass(frozen=True)
class ScalingLawParams:
    alpha_N: float
    alpha_S: float
    N_c: float
    S_c: float

    def __post_init__(self):
        for name in ("alpha_N", "alpha_S", "N_c", "S_c"):
            if getattr(self, name) <= 0:
                raise ValueError(f"scaling-law parameter {name} must be strictly positive")


def predict_loss(params: ScalingLawParams, N: float | np.ndarray, S: float | np.ndarray):
    return (params.N_c / np.asarray(N)) ** params.alpha_N + (params.S_c / np.asarray(S)) ** params.alpha_S


def log_residual(params: ScalingLawParams, observations: list[LossObservation]) -> float:
    N = np.array([o.N for o in observations])
    S = np.array([o.S for o in observations])
    L = np.array([o.L for o in observations])
    return float(np.sum((np.log(predict_loss(params, N, S)) - np.log(L)) ** 2))


def fit_scaling_law(
    observations: list[LossObservation],
    seed: int = 0,
    n_starts: int = N_STARTS,
) -> tuple[ScalingLawParams, float]:
    """Best-fit parameters and their final sum of squared log residuals."""
    if len(observations) < 8:
        raise ValueError(f"need at least 8 observations, got {len(observations)}")
    n_values = {o.N for o in observations}
    if len(n_values) < 2:
        raise ValueError("need observations spanning at least 2 distinct model sizes")

    N = np.array([o.N for o in observations])
    S = np.array([o.S for o in observations])
    logL = np.log(np.array([o.L for o in observations]))

    def objective(u: np.ndarray) -> float:
        alpha_n, alpha_s, nc, sc = np.exp(u)
        # Extreme start points overflow to inf; that is a legal "reject
        # this region" answer, not an error.
        with np.errstate(over="ignore", invalid="ignore"):
            pred = (nc / N) ** alpha_n + (sc / S) ** alpha_s
            value = float(np.sum((np.log(pred) - logL) ** 2))
        return value if np.isfinite(value) else np.inf

    rng = np.random.default_rng(seed)
    lo = np.log(
        [0.1, 0.1, max(N.min() * 1e-4, 1e-12), max(S.min() * 1e-4, 1e-12)]
    )
    hi = np.log([5.0, 5.0, N.max() * 10.0, S.max() * 10.0])
    starts = rng.uniform(lo, hi, size=(n_starts, 4))

    best_u = None
    best_val = np.inf
    for u0 in starts:
        res = minimize(
            objective,
            u0,
            method="Nelder-Mead",
            options={"maxiter": 4000, "xatol": 1e-12, "fatol": 1e-16},
        )
        if res.fun < best_val:
            best_val = float(res.fun)
            best_u = res.x
    # One polish pass from the best point; can only improve the residual.
    res = minimize(
        objective,
        best_u,
        method="Nelder-Mead",
        options={"maxiter": 4000, "xatol": 1e-12, "fatol": 1e-16},
    )
    if res.fun < best_val:
        best_val = float(res.fun)
        best_u = res.x

    alpha_n, alpha_s, nc, sc = np.exp(best_u)
    params = ScalingLawParams(alpha_N=float(alpha_n), alpha_S=float(alpha_s), N_c=float(nc), S_c=float(sc))
    return params, best_val


def load_loss_csv(path: str | Path) -> list[LossObservation]:
    """Read observations from a CSV with N,S,L columns."""
    observations = []
    with open(path, newline="", encoding="utf-8") as fp:
        reader = csv.DictReader(fp)
        if reader.fieldnames is None or {"N", "S", "L"} - set(reader.fieldnames):
            raise ValueError(f"{path}: loss CSV needs N,S,L columns, got {reader.fieldnames}")
        for row in reader:
            observations.append(LossObservation(N=float(row["N"]), S=float(row["S"]), L=float(row["L"])))
    return observations
