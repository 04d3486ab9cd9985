"""Time integration of the coupled density-drift and density-chemical systems.

Two solvers share one transport kernel:

* transformed mode evolves (u, v) with implicit (backward-Euler or
  trapezoidal) diffusion and explicit dealiased transport chi*div(u v);
  v is advanced by the trapezoid of grad(u) at both time levels, so it
  stays a spectral gradient at every step and curl-freeness is structural;
* original mode evolves (u, c) by Strang splitting around the exact
  exponential chemical update, with the drift recomputed from ln c.

A run projects its working state onto the dealias band once at start;
products then never alias back into the retained band, which is what makes
the flux identities machine-precision checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import diagnostics as diag
from .cole_hopf import C_FLOOR, ChemistryParams
from .fields import Grid, ScalarField, VectorField, gradient, lp_norm
from .initial_data import potential_of

_LOG_FLOOR = float(np.log(C_FLOOR))


class RunOutcome(Enum):
    COMPLETED = "completed"
    BLOWUP = "blowup"
    CHEMICAL_EXTINCTION = "chemical_extinction"


EXIT_CODES = {
    RunOutcome.COMPLETED: 0,
    RunOutcome.BLOWUP: 10,
    RunOutcome.CHEMICAL_EXTINCTION: 11,
}


class BlowUpError(RuntimeError):
    """Stepper produced a non-finite field."""

    def __init__(self, t: float, blowup_integral: float = float("nan")):
        super().__init__(f"non-finite state at t={t}; "
                         f"running drift-integral monitor = {blowup_integral}")
        self.t = t
        self.blowup_integral = blowup_integral


class ChemicalExtinctionError(RuntimeError):
    """Chemical concentration crossed the representability floor."""

    def __init__(self, t: float, c_min: float):
        super().__init__(f"chemical concentration {c_min} under floor at t={t}")
        self.t = t
        self.c_min = c_min


@dataclass
class SimState:
    """Snapshot advanced by the steppers; (u, v) or (u, c) depending on mode."""

    t: float
    u: ScalarField
    v: VectorField | None = None
    c: ScalarField | None = None
    mode: str = "transformed"

    def __post_init__(self):
        if self.mode == "transformed":
            if self.v is None:
                raise ValueError("transformed mode requires a drift field v")
        elif self.mode == "original":
            if self.c is None:
                raise ValueError("original mode requires a chemical field c")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.t < 0:
            raise ValueError("time must be nonnegative")


@dataclass
class StepperConfig:
    dt: float
    t_end: float
    dt_mode: str = "fixed"       # fixed | cfl (dt is the cap in cfl mode)
    cfl_number: float = 0.5
    scheme: str = "imex_cn"      # imex_be | imex_cn
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.t_end > 0 and self.dt > self.t_end:
            raise ValueError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if self.dt_mode not in ("fixed", "cfl"):
            raise ValueError(f"unknown dt_mode {self.dt_mode!r}")
        if not (0 < self.cfl_number <= 1):
            raise ValueError(f"cfl_number must be in (0, 1], got {self.cfl_number}")
        if self.scheme not in ("imex_be", "imex_cn"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")


@dataclass
class Trajectory:
    """Ordered diagnostics plus the structured terminal status of a run."""

    records: list
    outcome: RunOutcome
    final_state: SimState | None
    snapshots: list            # (t, {"u": array, ...}) pairs
    message: str = ""
    blowup_integral: float = 0.0
    field_history: list | None = None


def _ifft2r(ah):
    return np.fft.ifft2(ah).real


def _transport_hat(grid: Grid, u, vx, vy, chi: float):
    """chi * div(u v) in spectral space with the product dealiased."""
    mask = grid.dealias_mask
    pxh = np.fft.fft2(u * vx)
    pyh = np.fft.fft2(u * vy)
    pxh[~mask] = 0.0
    pyh[~mask] = 0.0
    return chi * (1j * grid._kx_deriv * pxh + 1j * grid._ky_deriv * pyh)


def _advance_transformed(grid, u, vx, vy, uh, vxh, vyh, dt, chi, scheme, t_hat):
    """One IMEX step; t_hat is the transport term at the current node."""
    k2 = grid._k_squared
    ikx = 1j * grid._kx_deriv
    iky = 1j * grid._ky_deriv
    if scheme == "imex_be":
        uh1 = (uh + dt * t_hat) / (1.0 + dt * k2)
    else:
        den = 1.0 + 0.5 * dt * k2
        explicit = (1.0 - 0.5 * dt * k2) * uh
        uh_p = (explicit + dt * t_hat) / den
        vxh_p = vxh + 0.5 * dt * (ikx * uh + ikx * uh_p)
        vyh_p = vyh + 0.5 * dt * (iky * uh + iky * uh_p)
        t_hat_p = _transport_hat(grid, _ifft2r(uh_p), _ifft2r(vxh_p),
                                 _ifft2r(vyh_p), chi)
        uh1 = (explicit + 0.5 * dt * (t_hat + t_hat_p)) / den
    vxh1 = vxh + 0.5 * dt * (ikx * uh + ikx * uh1)
    vyh1 = vyh + 0.5 * dt * (iky * uh + iky * uh1)
    return uh1, vxh1, vyh1


def _drift_from_log_chemical(grid, s_vals, mu):
    """v = -(1/mu) grad(s) for s = ln c, returned as physical components."""
    sh = np.fft.fft2(s_vals)
    vx = _ifft2r(-(1.0 / mu) * 1j * grid._kx_deriv * sh)
    vy = _ifft2r(-(1.0 / mu) * 1j * grid._ky_deriv * sh)
    return vx, vy


def _advance_original(grid, u, s, uh, dt, params, scheme):
    """Strang step: half chemical decay, full density step, half decay.

    The chemical is carried as s = ln c, so positivity is structural and
    the extinction check is an exact comparison in log space.
    """
    mu, chi = params.mu, params.chi
    k2 = grid._k_squared
    s_half = s - (0.5 * dt * mu) * u
    vx, vy = _drift_from_log_chemical(grid, s_half, mu)
    t_hat = _transport_hat(grid, u, vx, vy, chi)
    if scheme == "imex_be":
        uh1 = (uh + dt * t_hat) / (1.0 + dt * k2)
    else:
        den = 1.0 + 0.5 * dt * k2
        explicit = (1.0 - 0.5 * dt * k2) * uh
        uh_p = (explicit + dt * t_hat) / den
        t_hat_p = _transport_hat(grid, _ifft2r(uh_p), vx, vy, chi)
        uh1 = (explicit + 0.5 * dt * (t_hat + t_hat_p)) / den
    u1 = _ifft2r(uh1)
    s1 = s_half - (0.5 * dt * mu) * u1
    return u1, s1, uh1


def _node_aux(grid, uh, vxh, vyh, t_hat, vx, vy) -> diag.NodeAux:
    """Functional integrands at one node, via Parseval (no extra FFTs)."""
    n2 = grid.resolution ** 2
    w = grid.cell_area / n2
    k2d = grid._kx_deriv ** 2 + grid._ky_deriv ** 2
    abs_uh2 = np.abs(uh) ** 2
    mean_u = uh[0, 0].real / n2
    u_sq = w * (abs_uh2.sum() - abs_uh2[0, 0]) \
        + (mean_u - 1.0) ** 2 * grid.side_length ** 2
    v_sq = w * ((np.abs(vxh) ** 2).sum() + (np.abs(vyh) ** 2).sum())
    grad_u_sq = w * (k2d * abs_uh2).sum()
    ut_hat = -grid._k_squared * uh + t_hat
    abs_ut2 = np.abs(ut_hat) ** 2
    ut_sq = w * abs_ut2.sum()
    grad_ut_sq = w * (k2d * abs_ut2).sum()
    v4_4 = grid.cell_area * ((vx * vx + vy * vy) ** 2).sum()
    return diag.NodeAux(u_sq=float(u_sq), v_sq=float(v_sq),
                        grad_u_sq=float(grad_u_sq), ut_sq=float(ut_sq),
                        grad_ut_sq=float(grad_ut_sq), v4_4=float(v4_4))


def step_transformed(state: SimState, cfg: StepperConfig,
                     params: ChemistryParams, dt: float | None = None) -> SimState:
    """Advance a transformed-mode state by one step of size dt (default cfg.dt)."""
    if state.mode != "transformed":
        raise ValueError("step_transformed requires transformed mode")
    dt = cfg.dt if dt is None else dt
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid = state.u.grid
    u, vx, vy = state.u.values, state.v.values[0], state.v.values[1]
    uh = np.fft.fft2(u)
    vxh = np.fft.fft2(vx)
    vyh = np.fft.fft2(vy)
    t_hat = _transport_hat(grid, u, vx, vy, params.chi)
    uh1, vxh1, vyh1 = _advance_transformed(
        grid, u, vx, vy, uh, vxh, vyh, dt, params.chi, cfg.scheme, t_hat)
    u1 = _ifft2r(uh1)
    v1 = np.stack([_ifft2r(vxh1), _ifft2r(vyh1)])
    if not (np.isfinite(u1).all() and np.isfinite(v1).all()):
        raise BlowUpError(state.t + dt)
    return SimState(t=state.t + dt, u=ScalarField(grid, u1, check=False),
                    v=VectorField(grid, v1, check=False), mode="transformed")


def step_original(state: SimState, cfg: StepperConfig,
                  params: ChemistryParams, dt: float | None = None) -> SimState:
    """Advance an original-mode state (u, c) by one Strang-split step."""
    if state.mode != "original":
        raise ValueError("step_original requires original mode")
    dt = cfg.dt if dt is None else dt
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    c_min = state.c.values.min()
    if c_min <= C_FLOOR:
        raise ChemicalExtinctionError(state.t, c_min)
    grid = state.u.grid
    u = state.u.values
    s = np.log(state.c.values)
    uh = np.fft.fft2(u)
    u1, s1, _ = _advance_original(grid, u, s, uh, dt, params, cfg.scheme)
    if not np.isfinite(u1).all():
        raise BlowUpError(state.t + dt)
    if s1.min() <= _LOG_FLOOR:
        raise ChemicalExtinctionError(state.t + dt, float(np.exp(s1.min())))
    return SimState(t=state.t + dt, u=ScalarField(grid, u1, check=False),
                    c=ScalarField(grid, np.exp(s1), check=False), mode="original")


def choose_dt(state: SimState, cfg: StepperConfig, params: ChemistryParams) -> float:
    """Transport-limited step cfl * h / (|v|_inf chi + |grad u|_inf h), capped."""
    if cfg.dt_mode != "cfl":
        raise ValueError("choose_dt requires dt_mode == 'cfl'")
    grid = state.u.grid
    h = grid.spacing
    if state.mode == "transformed":
        v_inf = lp_norm(state.v, np.inf)
    else:
        vx, vy = _drift_from_log_chemical(grid, np.log(state.c.values), params.mu)
        v_inf = float(np.sqrt(vx * vx + vy * vy).max())
    grad_u_inf = float(gradient(state.u).magnitude().max())
    speed = max(1e-12, v_inf * params.chi + grad_u_inf * h)
    return min(cfg.cfl_number * h / speed, cfg.dt)


def run(u0: ScalarField, companion, cfg: StepperConfig, params: ChemistryParams,
        mode: str = "transformed", p0: float = 6.0, recorders=(),
        snapshot_times=(), log_c0: np.ndarray | None = None,
        keep_field_history: bool = False) -> Trajectory:
    """Advance matched initial data to t_end (or a halt) and record diagnostics.

    ``companion`` is the drift field v0 in transformed mode or the chemical
    c0 in original mode.  The working state is projected onto the dealias
    band once at start.  In transformed mode the chemical sup-norm is
    tracked through the accumulated time integral of u (log-space exact);
    ``log_c0`` overrides the reference ln c0 inferred from v0.

    Deterministic for a fixed configuration and single-threaded execution.
    Halts surface as the trajectory outcome, never as silent truncation.
    """
    grid = u0.grid
    mask = grid.dealias_mask
    mu, chi = params.mu, params.chi

    uh = np.fft.fft2(u0.values)
    uh[~mask] = 0.0
    u = _ifft2r(uh)

    s = None
    if mode == "transformed":
        if not isinstance(companion, VectorField):
            raise ValueError("transformed mode expects v0 as a VectorField")
        vxh = np.fft.fft2(companion.values[0])
        vyh = np.fft.fft2(companion.values[1])
        vxh[~mask] = 0.0
        vyh[~mask] = 0.0
        vx, vy = _ifft2r(vxh), _ifft2r(vyh)
        if log_c0 is None:
            v_band = VectorField(grid, np.stack([vx, vy]), check=False)
            if lp_norm(v_band, np.inf) > 0:
                log_c0 = -mu * potential_of(v_band).values
            else:
                log_c0 = np.zeros_like(u)
        u_time_integral = np.zeros_like(u)
    elif mode == "original":
        if not isinstance(companion, ScalarField):
            raise ValueError("original mode expects c0 as a ScalarField")
        c_min = companion.values.min()
        if c_min <= C_FLOOR:
            raise ChemicalExtinctionError(0.0, c_min)
        sh = np.fft.fft2(np.log(companion.values))
        sh[~mask] = 0.0
        s = _ifft2r(sh)
        vx, vy = _drift_from_log_chemical(grid, s, mu)
        vxh, vyh = np.fft.fft2(vx), np.fft.fft2(vy)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    recorder = diag.TrajectoryRecorder(chi=chi, p0=p0)
    records: list = []
    snapshots: list = []
    history: list | None = [] if keep_field_history else None
    pending_snaps = sorted(float(ts) for ts in snapshot_times)

    def current_state(t):
        if mode == "transformed":
            return SimState(t=t, u=ScalarField(grid, u.copy(), check=False),
                            v=VectorField(grid, np.stack([vx, vy]).copy(),
                                          check=False), mode=mode)
        return SimState(t=t, u=ScalarField(grid, u.copy(), check=False),
                        c=ScalarField(grid, np.exp(s), check=False), mode=mode)

    def chem_sup(t):
        if mode == "transformed":
            return float(np.exp((log_c0 - mu * u_time_integral).max()))
        return float(np.exp(s.max()))

    def emit(t):
        state = current_state(t)
        rec = recorder.make_record(
            t, state.u,
            state.v if mode == "transformed"
            else VectorField(grid, np.stack([vx, vy]), check=False),
            chem_sup(t))
        records.append(rec)
        for hook in recorders:
            hook(state, rec)
        if history is not None:
            history.append(state)
        while pending_snaps and t >= pending_snaps[0] - 1e-12:
            payload = {"u": u.copy()}
            if mode == "transformed":
                payload["v1"], payload["v2"] = vx.copy(), vy.copy()
            else:
                payload["c"] = np.exp(s)
            snapshots.append((t, payload))
            pending_snaps.pop(0)

    t = 0.0
    t_end = cfg.t_end
    outcome = RunOutcome.COMPLETED
    message = ""
    nstep = 0

    t_hat = _transport_hat(grid, u, vx, vy, chi)
    recorder.on_node(t, _node_aux(grid, uh, vxh, vyh, t_hat, vx, vy))
    emit(t)

    while t < t_end - 1e-12 * max(1.0, t_end):
        if cfg.dt_mode == "cfl":
            grad_u_inf = float(np.sqrt(
                _ifft2r(1j * grid._kx_deriv * uh) ** 2
                + _ifft2r(1j * grid._ky_deriv * uh) ** 2).max())
            v_inf = float(np.sqrt(vx * vx + vy * vy).max())
            speed = max(1e-12, v_inf * chi + grad_u_inf * grid.spacing)
            dt = min(cfg.cfl_number * grid.spacing / speed, cfg.dt)
        else:
            dt = cfg.dt
        dt = min(dt, t_end - t)

        u_prev = u
        if mode == "transformed":
            uh, vxh, vyh = _advance_transformed(
                grid, u, vx, vy, uh, vxh, vyh, dt, chi, cfg.scheme, t_hat)
            u, vx, vy = _ifft2r(uh), _ifft2r(vxh), _ifft2r(vyh)
            if not (np.isfinite(u).all() and np.isfinite(vx).all()
                    and np.isfinite(vy).all()):
                outcome = RunOutcome.BLOWUP
                message = (f"non-finite state at t={t + dt}; running "
                           f"drift-integral monitor = {recorder.blowup_integral}")
                break
            u_time_integral += 0.5 * dt * (u_prev + u)
        else:
            u, s, uh = _advance_original(grid, u, s, uh, dt, params, cfg.scheme)
            if not np.isfinite(u).all():
                outcome = RunOutcome.BLOWUP
                message = (f"non-finite state at t={t + dt}; running "
                           f"drift-integral monitor = {recorder.blowup_integral}")
                break
            if s.min() <= _LOG_FLOOR:
                outcome = RunOutcome.CHEMICAL_EXTINCTION
                message = (f"chemical under floor at t={t + dt} "
                           f"(min ln c = {s.min()})")
                break
            vx, vy = _drift_from_log_chemical(grid, s, mu)
            vxh, vyh = np.fft.fft2(vx), np.fft.fft2(vy)

        t += dt
        nstep += 1
        t_hat = _transport_hat(grid, u, vx, vy, chi)
        aux = _node_aux(grid, uh, vxh, vyh, t_hat, vx, vy)
        if not all(np.isfinite(x) for x in (aux.u_sq, aux.v_sq, aux.grad_u_sq,
                                            aux.ut_sq, aux.grad_ut_sq, aux.v4_4)):
            # norms overflowed double precision: the monitor has diverged
            outcome = RunOutcome.BLOWUP
            message = (f"diverging functionals at t={t}; last finite "
                       f"drift-integral monitor = {recorder.blowup_integral}")
            break
        recorder.on_node(t, aux)
        done = t >= t_end - 1e-12 * max(1.0, t_end)
        if nstep % cfg.record_every == 0 or done:
            emit(t)

    final_state = None
    if outcome is not RunOutcome.COMPLETED:
        pass  # fields at the halt are unusable; keep the last good records
    else:
        final_state = current_state(t)
    return Trajectory(records=records, outcome=outcome, final_state=final_state,
                      snapshots=snapshots, message=message,
                      blowup_integral=recorder.blowup_integral,
                      field_history=history)
