"""Transformation layer between the chemical field c and the drift field v.

The substitution v = -(1/mu) * grad(ln c) removes the logarithmic
singularity of the chemotactic sensitivity and gives v a spatial structure.
The chemical ODE c_t = -mu*u*c is integrated with exact exponential
(integrating-factor) updates, which preserve positivity unconditionally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Grid, ScalarField, VectorField, gradient

# Below this value the chemical is treated as extinct: taking ln c and
# further exponential decay would underflow to non-finite fields.
C_FLOOR = 1e-300


@dataclass(frozen=True)
class ChemistryParams:
    """Physical coefficients; chi = mu * xi is the transport strength.

    chi = 0 (equivalently xi = 0) is admitted as the decoupled heat-equation
    limit used by the verification studies; the degradation rate mu must
    stay positive.
    """

    chi: float = 1.0
    mu: float = 1.0
    xi: float = 1.0

    def __post_init__(self):
        if self.chi < 0 or self.mu <= 0 or self.xi < 0:
            raise ValueError("require chi >= 0, xi >= 0 and mu > 0")
        if abs(self.chi - self.mu * self.xi) > 1e-14 * max(1.0, abs(self.chi)):
            raise ValueError(
                f"inconsistent coefficients: chi={self.chi} != mu*xi={self.mu * self.xi}")


def forward_transform(c: ScalarField, params: ChemistryParams) -> VectorField:
    """v = -(1/mu) * grad(ln c); rejects fields at or below the extinction floor."""
    vals = c.values
    cmin = vals.min()
    if cmin <= C_FLOOR:
        i, j = np.unravel_index(int(vals.argmin()), vals.shape)
        raise ValueError(
            f"chemical concentration {cmin} at cell ({i}, {j}) is at or below "
            f"the floor {C_FLOOR}; ln c is not representable")
    g = gradient(ScalarField(c.grid, np.log(vals), check=False))
    return VectorField(c.grid, -g.values / params.mu, check=False)


def c_step(c: ScalarField, u: ScalarField, mu: float, dt: float,
           u_next: ScalarField | None = None) -> ScalarField:
    """Advance c_t = -mu*u*c by dt with the exponential update.

    Uses the midpoint-in-time average of u when both endpoint fields are
    supplied, the left endpoint otherwise.  Positivity is exact.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u_avg = u.values if u_next is None else 0.5 * (u.values + u_next.values)
    return ScalarField(c.grid, c.values * np.exp(-mu * dt * u_avg), check=False)


def reconstruct_c(u_history, c0: ScalarField, mu: float) -> ScalarField:
    """c(T) = c0 * exp(-mu * int_0^T u dt), trapezoid on the stored history.

    ``u_history`` is a sequence of (t, ScalarField) pairs in increasing time
    order; the first entry anchors the lower integration limit.
    """
    history = list(u_history)
    if not history:
        raise ValueError("u_history is empty")
    acc = np.zeros_like(c0.values)
    for (t_prev, u_prev), (t_cur, u_cur) in zip(history, history[1:]):
        acc += 0.5 * (t_cur - t_prev) * (u_prev.values + u_cur.values)
    return ScalarField(c0.grid, c0.values * np.exp(-mu * acc), check=False)


def log_c_floor() -> float:
    """ln of the extinction floor, for log-space comparisons."""
    return float(np.log(C_FLOOR))
