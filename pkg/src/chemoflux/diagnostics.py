"""Effective-flux identities, weighted energy functionals, and decay fits.

The combined diffusive-plus-chemotactic flux F = grad(u) + chi*u*v ties the
time derivative of the cell density to a divergence, and its scalar curl to
a transport term; both relations are algebraic at the discrete level when
the fields live in the dealias band, so their residuals act as exacting
structural self-checks on a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import (ScalarField, VectorField, curl2d, divergence, gradient,
                     laplacian, lp_norm, perp_gradient, product_dot,
                     product_scalar_vector)

# CSV schema, fixed order.  The diagnostics record carries two extra
# measured norms (ut_l2, grad_ut_l2) used by the energy recomputation;
# they are not part of the file schema.
CSV_COLUMNS = (
    "t", "sigma",
    "u_l2", "grad_u_l2", "u_linf",
    "v_l2", "v_l4", "v_lp0", "v_linf", "c_linf",
    "flux_l2", "flux_div_residual", "flux_curl_residual",
    "a1", "a2", "a3", "blowup_integral", "gn_ratio",
)

SCHEMA_VERSION = "chemoflux-diagnostics-v1"


def sigma_weight(t: float) -> float:
    """Initial-layer discount min(1, t)."""
    return min(1.0, t)


@dataclass
class DiagnosticsRecord:
    t: float
    sigma: float
    u_l2: float
    grad_u_l2: float
    u_linf: float
    v_l2: float
    v_l4: float
    v_lp0: float
    v_linf: float
    c_linf: float
    flux_l2: float
    flux_div_residual: float
    flux_curl_residual: float
    a1: float
    a2: float
    a3: float
    blowup_integral: float
    gn_ratio: float
    ut_l2: float = 0.0
    grad_ut_l2: float = 0.0

    def csv_row(self) -> str:
        return ",".join(format(getattr(self, c), ".17g") for c in CSV_COLUMNS)


@dataclass
class DecayFit:
    """Log-linear fit of a positive time series on [t_lo, t_hi]."""

    t_lo: float
    t_hi: float
    quantity: str
    rate: float        # positive means decay
    prefactor: float
    residual: float    # rms residual of the fit in log space
    n_samples: int


def effective_flux(u: ScalarField, v: VectorField, chi: float) -> VectorField:
    """F = grad(u) + chi * u*v with the product dealiased."""
    g = gradient(u)
    if chi == 0.0:
        return g
    p = product_scalar_vector(u, v)
    return VectorField(u.grid, g.values + chi * p.values, check=False)


def assemble_rhs_ut(u: ScalarField, v: VectorField, chi: float) -> ScalarField:
    """Right-hand side of the density equation, lap(u) + chi*div(u*v)."""
    out = laplacian(u).values
    if chi != 0.0:
        out = out + chi * divergence(product_scalar_vector(u, v)).values
    return ScalarField(u.grid, out, check=False)


def flux_divergence_residual(u: ScalarField, v: VectorField, chi: float,
                             rhs_ut: ScalarField) -> float:
    """|| div(F) - u_t ||_2 where u_t is the assembled right-hand side."""
    if rhs_ut.values.shape != u.values.shape:
        raise ValueError("rhs_ut shape does not match state")
    d = divergence(effective_flux(u, v, chi))
    return lp_norm(ScalarField(u.grid, d.values - rhs_ut.values, check=False), 2)


def curl_flux_residual(u: ScalarField, v: VectorField, chi: float) -> float:
    """|| curl(F) - chi * perp_grad(u).v ||_2 (product dealiased).

    Small whenever v itself is (numerically) curl-free.
    """
    lhs = curl2d(effective_flux(u, v, chi))
    rhs = product_dot(perp_gradient(u), v)
    return lp_norm(ScalarField(u.grid, lhs.values - chi * rhs.values, check=False), 2)


def gn_ratio(f: ScalarField) -> float:
    """Interpolation-inequality sample ||f||_4^2 / (||f||_2 ||grad f||_2)."""
    gnorm = lp_norm(gradient(f), 2)
    if gnorm == 0.0:
        raise ValueError("gn_ratio undefined for fields with vanishing gradient")
    return lp_norm(f, 4) ** 2 / (lp_norm(f, 2) * gnorm)


def jacobian_frobenius(w: VectorField) -> ScalarField:
    """Pointwise Frobenius magnitude of the spectral Jacobian of w."""
    gx = gradient(ScalarField(w.grid, w.values[0], check=False))
    gy = gradient(ScalarField(w.grid, w.values[1], check=False))
    mag = np.sqrt(gx.values[0] ** 2 + gx.values[1] ** 2
                  + gy.values[0] ** 2 + gy.values[1] ** 2)
    return ScalarField(w.grid, mag, check=False)


def lemma33_ratio(u: ScalarField, v: VectorField, ut: ScalarField, p: float,
                  chi: float = 1.0):
    """||grad F||_p / (||u_t||_p + ||perp_grad(u).v||_p).

    Returns None (skip flag) when the denominator is degenerate.  The
    empirical supremum of this ratio across runs measures the constant in
    the gradient-flux bound; it blows up if v carries curl.
    """
    den = lp_norm(ut, p) + lp_norm(product_dot(perp_gradient(u), v), p)
    if den <= 1e-14:
        return None
    num = lp_norm(jacobian_frobenius(effective_flux(u, v, chi)), p)
    return num / den


def fit_decay(series, window, quantity: str = "") -> DecayFit:
    """Least-squares line on (t, ln value) over the window.

    Requires at least 10 samples, strictly positive values, and a window
    inside the settled regime t >= 1.
    """
    t_lo, t_hi = float(window[0]), float(window[1])
    if not (t_hi > t_lo >= 1.0):
        raise ValueError(f"window must satisfy t_hi > t_lo >= 1, got {window}")
    ts, vs = [], []
    for t, val in series:
        if t_lo <= t <= t_hi:
            ts.append(float(t))
            vs.append(float(val))
    if len(ts) < 10:
        raise ValueError(f"need >= 10 samples in window, got {len(ts)}")
    vs = np.asarray(vs)
    if (vs <= 0).any():
        raise ValueError("decay fit requires strictly positive values")
    ts = np.asarray(ts)
    logs = np.log(vs)
    slope, intercept = np.polyfit(ts, logs, 1)
    resid = float(np.sqrt(np.mean((logs - (slope * ts + intercept)) ** 2)))
    return DecayFit(t_lo=t_lo, t_hi=t_hi, quantity=quantity, rate=float(-slope),
                    prefactor=float(math.exp(intercept)), residual=resid,
                    n_samples=len(ts))


@dataclass
class NodeAux:
    """Per-time-node quantities feeding the running functionals."""

    u_sq: float        # ||u-1||_2^2
    v_sq: float        # ||v||_2^2
    grad_u_sq: float   # ||grad u||_2^2  (also ||v_t||_2^2, since v_t = grad u)
    ut_sq: float       # ||u_t||_2^2 with u_t the assembled right-hand side
    grad_ut_sq: float
    v4_4: float        # ||v||_4^4


class TrajectoryRecorder:
    """Accumulates the sigma-weighted functionals along a run.

    Integrals are trapezoid sums over every time node the stepper visits
    (not just recorded instants), which keeps them insensitive to the
    output cadence; suprema are tracked at every node as well.
    """

    def __init__(self, chi: float, p0: float):
        self.chi = chi
        self.p0 = p0
        self._prev = None          # (t, NodeAux)
        self.sup_e = 0.0           # sup ||u-1||^2 + ||v||^2
        self.sup_a2 = 0.0          # sup sigma*|grad u|^2 + sigma^2(|ut|^2 + |vt|^2)
        self.sup_v4 = 0.0          # sup ||v||_4^4
        self.int_grad_u = 0.0      # int |grad u|^2
        self.int_a2 = 0.0          # int sigma|ut|^2 + sigma^2|grad ut|^2
        self.int_v4 = 0.0          # int ||v||_4^4  (blow-up monitor)

    def on_node(self, t: float, aux: NodeAux) -> None:
        s = sigma_weight(t)
        self.sup_e = max(self.sup_e, aux.u_sq + aux.v_sq)
        self.sup_a2 = max(self.sup_a2,
                          s * aux.grad_u_sq + s * s * (aux.ut_sq + aux.grad_u_sq))
        self.sup_v4 = max(self.sup_v4, aux.v4_4)
        if self._prev is not None:
            t0, a0 = self._prev
            s0 = sigma_weight(t0)
            h = t - t0
            self.int_grad_u += 0.5 * h * (a0.grad_u_sq + aux.grad_u_sq)
            self.int_a2 += 0.5 * h * (
                (s0 * a0.ut_sq + s0 * s0 * a0.grad_ut_sq)
                + (s * aux.ut_sq + s * s * aux.grad_ut_sq))
            self.int_v4 += 0.5 * h * (a0.v4_4 + aux.v4_4)
        self._prev = (t, aux)

    @property
    def a1(self) -> float:
        return self.sup_e + self.int_grad_u

    @property
    def a2(self) -> float:
        return self.sup_a2 + self.int_a2

    @property
    def a3(self) -> float:
        return self.sup_v4 + self.int_v4

    @property
    def blowup_integral(self) -> float:
        return self.int_v4

    def make_record(self, t: float, u: ScalarField, v: VectorField,
                    c_linf: float) -> DiagnosticsRecord:
        grid = u.grid
        u_tilde = ScalarField(grid, u.values - 1.0, check=False)
        rhs_ut = assemble_rhs_ut(u, v, self.chi)
        flux = effective_flux(u, v, self.chi)
        grad_ut = gradient(rhs_ut)
        grad_u_norm = lp_norm(gradient(u_tilde), 2)
        if grad_u_norm > 0 and lp_norm(u_tilde, 2) > 0:
            gn = lp_norm(u_tilde, 4) ** 2 / (lp_norm(u_tilde, 2) * grad_u_norm)
        else:
            gn = 0.0  # degenerate sample (e.g. exact equilibrium)
        return DiagnosticsRecord(
            t=t,
            sigma=sigma_weight(t),
            u_l2=lp_norm(u_tilde, 2),
            grad_u_l2=grad_u_norm,
            u_linf=lp_norm(u_tilde, np.inf),
            v_l2=lp_norm(v, 2),
            v_l4=lp_norm(v, 4),
            v_lp0=lp_norm(v, self.p0),
            v_linf=lp_norm(v, np.inf),
            c_linf=c_linf,
            flux_l2=lp_norm(flux, 2),
            flux_div_residual=flux_divergence_residual(u, v, self.chi, rhs_ut),
            flux_curl_residual=curl_flux_residual(u, v, self.chi),
            a1=self.a1,
            a2=self.a2,
            a3=self.a3,
            blowup_integral=self.blowup_integral,
            gn_ratio=gn,
            ut_l2=lp_norm(rhs_ut, 2),
            grad_ut_l2=lp_norm(grad_ut, 2),
        )


def energy_functionals(records) -> tuple[float, float, float]:
    """Recompute (A1, A2, A3) from recorded rows alone.

    Trapezoid integrals and suprema are taken on the recording grid, so the
    result is cadence-limited; the running columns in the records themselves
    are accumulated on the stepping grid and are the sharper estimate.
    """
    rows = list(records)
    if not rows:
        raise ValueError("empty trajectory")
    sup_e = max(r.u_l2 ** 2 + r.v_l2 ** 2 for r in rows)
    sup_a2 = max(r.sigma * r.grad_u_l2 ** 2
                 + r.sigma ** 2 * (r.ut_l2 ** 2 + r.grad_u_l2 ** 2) for r in rows)
    sup_v4 = max(r.v_l4 ** 4 for r in rows)
    int_grad = int_a2 = int_v4 = 0.0
    for r0, r1 in zip(rows, rows[1:]):
        h = r1.t - r0.t
        int_grad += 0.5 * h * (r0.grad_u_l2 ** 2 + r1.grad_u_l2 ** 2)
        int_a2 += 0.5 * h * (
            (r0.sigma * r0.ut_l2 ** 2 + r0.sigma ** 2 * r0.grad_ut_l2 ** 2)
            + (r1.sigma * r1.ut_l2 ** 2 + r1.sigma ** 2 * r1.grad_ut_l2 ** 2))
        int_v4 += 0.5 * h * (r0.v_l4 ** 4 + r1.v_l4 ** 4)
    return sup_e + int_grad, sup_a2 + int_a2, sup_v4 + int_v4


def calibrate_energy_constant(records) -> float:
    """Smallest constant C making the discrete energy inequality
    dE <= -2*int |grad u|^2 + C*int ||u-1||^2 ||v||_4^4 hold on the rows."""
    rows = list(records)
    c_needed = 0.0
    for r0, r1 in zip(rows, rows[1:]):
        h = r1.t - r0.t
        de = (r1.u_l2 ** 2 + r1.v_l2 ** 2) - (r0.u_l2 ** 2 + r0.v_l2 ** 2)
        diss = h * (r0.grad_u_l2 ** 2 + r1.grad_u_l2 ** 2)  # 2 * trapezoid
        forcing = 0.5 * h * (r0.u_l2 ** 2 * r0.v_l4 ** 4
                             + r1.u_l2 ** 2 * r1.v_l4 ** 4)
        excess = de + diss
        if excess > 0 and forcing > 0:
            c_needed = max(c_needed, excess / forcing)
    return c_needed


def check_energy_inequality(records, constant: float, slack: float = 1e-12):
    """Return the times where the calibrated energy inequality fails."""
    rows = list(records)
    violations = []
    for r0, r1 in zip(rows, rows[1:]):
        h = r1.t - r0.t
        e0 = r0.u_l2 ** 2 + r0.v_l2 ** 2
        e1 = r1.u_l2 ** 2 + r1.v_l2 ** 2
        diss = h * (r0.grad_u_l2 ** 2 + r1.grad_u_l2 ** 2)
        forcing = 0.5 * h * (r0.u_l2 ** 2 * r0.v_l4 ** 4
                             + r1.u_l2 ** 2 * r1.v_l4 ** 4)
        if e1 - e0 > -diss + constant * forcing + slack * (1.0 + e0):
            violations.append(r1.t)
    return violations
