"""Simplified muscle layer: linear force law and activation recovery.

Forces are F_max * a with configuration-independent moment arms, so torque
generation is linear in the activation vector and recovering activations is
a box-constrained minimum-norm least-squares problem. That problem is solved
through its dual: a(lam) = clip(B^T lam, 0, 1) turns the stationarity
condition into the piecewise-linear equation B a(lam) = tau, handled by a
semismooth Newton iteration with an SLSQP fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize


class MuscleError(Exception):
    pass


class InfeasibleActivation(MuscleError):
    """Requested torque lies outside the torque polytope."""


@dataclass(frozen=True)
class MuscleSet:
    names: tuple[str, ...]
    moment_arms: np.ndarray  # (n_muscles, n_actuated), meters
    f_max: np.ndarray  # (n_muscles,), Newtons

    def __post_init__(self):
        arms = np.asarray(self.moment_arms, dtype=np.float64)
        fmax = np.asarray(self.f_max, dtype=np.float64)
        object.__setattr__(self, "moment_arms", arms)
        object.__setattr__(self, "f_max", fmax)
        if arms.ndim != 2 or arms.shape[0] != len(self.names):
            raise MuscleError("moment_arms must be (n_muscles, n_actuated)")
        if fmax.shape != (len(self.names),) or (fmax <= 0).any():
            raise MuscleError("f_max must be positive per muscle")

    @property
    def n_muscles(self) -> int:
        return len(self.names)

    @property
    def n_actuated(self) -> int:
        return self.moment_arms.shape[1]

    @property
    def torque_map(self) -> np.ndarray:
        """B with tau = B a: (n_actuated, n_muscles)."""
        return self.moment_arms.T * self.f_max[None, :]


def muscle_to_torque(ms: MuscleSet, a: np.ndarray) -> np.ndarray:
    """Torques over actuated DoFs produced by activations in [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-1] != ms.n_muscles:
        raise MuscleError(f"expected {ms.n_muscles} activations, got {a.shape[-1]}")
    if (a < -1e-12).any() or (a > 1.0 + 1e-12).any():
        raise MuscleError("activations must lie in [0, 1]")
    return a @ ms.torque_map.T


def _newton_solve(b: np.ndarray, tau: np.ndarray, lam0: np.ndarray, iters: int = 120):
    lam = lam0.copy()
    n = b.shape[0]
    for _ in range(iters):
        u = b.T @ lam
        a = np.clip(u, 0.0, 1.0)
        r = b @ a - tau
        if np.abs(r).max() < 1e-12:
            return a, r
        # generalized Jacobian: inclusive mask so the kink at exact bounds
        # still yields a useful Newton direction
        free = (u >= 0.0) & (u <= 1.0)
        jac = (b[:, free] @ b[:, free].T) if free.any() else np.zeros((n, n))
        jac = jac + 1e-10 * np.eye(n)
        try:
            d = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            break
        # backtracking on the residual norm
        t, phi0 = 1.0, float(r @ r)
        improved = False
        while t > 1e-8:
            trial = lam - t * d
            rt = b @ np.clip(b.T @ trial, 0.0, 1.0) - tau
            if float(rt @ rt) < phi0 * (1.0 - 1e-4 * t):
                lam = trial
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    u = b.T @ lam
    a = np.clip(u, 0.0, 1.0)
    return a, b @ a - tau


def solve_activations(ms: MuscleSet, tau_target: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Minimum-norm activations reproducing tau_target, or a loud failure.

    Requires at least as many muscles as actuated DoFs and a full-row-rank
    moment-arm matrix; infeasible targets raise InfeasibleActivation instead
    of being clipped.
    """
    tau = np.asarray(tau_target, dtype=np.float64)
    b = ms.torque_map
    n, k = b.shape
    if tau.shape != (n,):
        raise MuscleError(f"tau_target must be ({n},)")
    if k < n:
        raise MuscleError("need at least as many muscles as actuated DoFs")
    if np.linalg.matrix_rank(b) < n:
        raise MuscleError("moment-arm matrix is not full row rank")

    gram = b @ b.T
    lam0 = np.linalg.solve(gram, tau)
    scale = max(1.0, float(np.abs(tau).max()))
    a_free = b.T @ lam0
    if (a_free >= 0.0).all() and (a_free <= 1.0).all():
        return a_free  # unconstrained minimum-norm solution already in the box

    a, r = _newton_solve(b, tau, lam0)
    if np.abs(r).max() <= tol * scale:
        return a

    # restarts from random multipliers, then a guarded SLSQP polish
    rng = np.random.default_rng(0)
    for _ in range(4):
        a2, r2 = _newton_solve(b, tau, rng.normal(scale=1.0 / scale, size=n))
        if np.abs(r2).max() < np.abs(r).max():
            a, r = a2, r2
        if np.abs(r).max() <= tol * scale:
            return a
    res = minimize(
        lambda x: 0.5 * float(x @ x),
        np.clip(a, 0.0, 1.0),
        jac=lambda x: x,
        bounds=[(0.0, 1.0)] * k,
        constraints=[{"type": "eq", "fun": lambda x: b @ x - tau, "jac": lambda x: b}],
        method="SLSQP",
        options={"maxiter": 300, "ftol": 1e-14},
    )
    if res.success:
        a3 = np.clip(res.x, 0.0, 1.0)
        if np.abs(b @ a3 - tau).max() <= tol * scale:
            return a3
    raise InfeasibleActivation(
        f"torque outside the achievable polytope (residual {np.abs(r).max():.3e})"
    )


def synth_emg(
    a_sequence: np.ndarray,
    fps: float,
    noise_seed: int | None = 0,
    time_constant: float = 0.040,
    mult_sigma: float = 0.10,
    add_sigma: float = 0.02,
) -> np.ndarray:
    """Surface-EMG-like channels from an activation trajectory.

    First-order low-pass (exact zero-order-hold discretization, one frame of
    transport delay) plus multiplicative and additive Gaussian noise, clamped
    at zero. Pass noise_seed=None to disable noise.
    """
    a = np.asarray(a_sequence, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if (a < -1e-12).any() or (a > 1 + 1e-12).any():
        raise MuscleError("activations must lie in [0, 1]")
    alpha = 1.0 - np.exp(-1.0 / (fps * time_constant))
    y = np.empty_like(a)
    y[0] = a[0]
    for t in range(1, a.shape[0]):
        y[t] = (1.0 - alpha) * y[t - 1] + alpha * a[t - 1]
    if noise_seed is not None:
        rng = np.random.default_rng(noise_seed)
        y = y * (1.0 + mult_sigma * rng.standard_normal(y.shape))
        y = y + add_sigma * rng.standard_normal(y.shape)
    return np.maximum(y, 0.0)
