"""Swing dynamics: right-hand sides and trajectory integration.

Two models share the machine data. The full model keeps frequency
deviation as a state,

    J_m dw_m/dt = -D_m w_m + P*_m - sum_n K_mn sin(theta_m - theta_n)
    dtheta_m/dt = w_m

and the droop-only reduced model treats the frequency sub-system as
instantaneous,

    dtheta_m/dt = (P*_m - sum_n K_mn sin(theta_m - theta_n)) / D_m.

Integration is classical fixed-step RK4 with steps split exactly at the
scheduled coupling-matrix switches (an adaptive RK45 driver is available
through the config for cross-checks). In reduced mode the reported
frequency deviation is the algebraic value D_m w_m = P*_m - flow_m, so
full and reduced trajectories are directly comparable. Angles are kept
unwrapped so pole slips show up as monotone drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ValidationError
from .network import NetworkModel, validate_k_matrix

FULL = "full"
REDUCED = "reduced"


@dataclass
class SystemState:
    """Angles (rad) and frequency deviations (rad/s) at one instant."""

    theta: np.ndarray
    omega: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        if theta.shape != omega.shape or theta.ndim != 1:
            raise ValidationError(
                f"theta {theta.shape} and omega {omega.shape} must be equal-length vectors"
            )
        if not (np.isfinite(theta).all() and np.isfinite(omega).all()):
            raise ValidationError("state contains non-finite entries")
        self.theta = theta
        self.omega = omega

    @property
    def n(self) -> int:
        return self.theta.size

    @classmethod
    def at_rest(cls, theta, time: float = 0.0) -> "SystemState":
        theta = np.asarray(theta, dtype=float)
        return cls(theta=theta, omega=np.zeros_like(theta), time=time)


@dataclass(frozen=True)
class SwitchEvent:
    time: float
    k_matrix: np.ndarray
    label: str = "switch"


class SwitchSchedule:
    """Timed sequence of coupling-matrix replacements.

    Times must be non-decreasing; coincident entries collapse into a
    zero-length segment that integrates no steps (the later matrix
    wins), which is how a fault shrunk to zero duration degenerates to
    the unfaulted schedule. Every matrix must satisfy the structural
    coupling invariants; connectivity is deliberately not required
    here, because a during-fault topology may legitimately split the
    network (fault scenarios re-check connectivity of their pre- and
    post-fault matrices themselves).
    """

    def __init__(self, entries=()):
        evs = []
        for e in entries:
            if isinstance(e, SwitchEvent):
                evs.append(SwitchEvent(float(e.time), np.asarray(e.k_matrix, dtype=float), e.label))
            else:
                t, k = e[0], e[1]
                label = e[2] if len(e) > 2 else "switch"
                evs.append(SwitchEvent(float(t), np.asarray(k, dtype=float), label))
        for a, b in zip(evs, evs[1:]):
            if b.time < a.time:
                raise ValidationError(
                    f"switch times must be non-decreasing, got {a.time} then {b.time}"
                )
        self.entries = tuple(evs)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def validate(self, n: int):
        for ev in self.entries:
            validate_k_matrix(ev.k_matrix, n, require_connected=False)


@dataclass
class TrajectoryRecord:
    """Sampled trajectory with switch-event markers.

    Sample times are monotone and contain every switch instant exactly.
    ``diverged`` marks a run truncated at the last finite sample.
    """

    times: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    events: tuple = ()
    mode: str = FULL
    diverged: bool = False

    @property
    def n_samples(self) -> int:
        return self.times.size

    @property
    def n_machines(self) -> int:
        return self.theta.shape[1]

    def state(self, i: int) -> SystemState:
        return SystemState(theta=self.theta[i].copy(), omega=self.omega[i].copy(),
                           time=float(self.times[i]))

    def final_state(self) -> SystemState:
        return self.state(self.n_samples - 1)

    def first_index_at(self, t: float) -> int:
        """Index of the first sample with time >= t (within rounding)."""
        i = int(np.searchsorted(self.times, t - 1e-12))
        if i >= self.n_samples:
            raise ValidationError(f"trajectory ends at {self.times[-1]} before t = {t}")
        return i


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step sizes, sampling stride and optional adaptive mode."""

    step_full: float = 1e-4
    step_reduced: float = 1e-3
    record_stride_full: int = 10
    record_stride_reduced: int = 1
    method: str = "rk4"  # or "rk45" (scipy adaptive, cross-check path)
    rtol: float = 1e-8
    atol: float = 1e-10

    def __post_init__(self):
        if not (self.step_full > 0.0 and self.step_reduced > 0.0):
            raise ValidationError("integrator steps must be positive")
        if self.record_stride_full < 1 or self.record_stride_reduced < 1:
            raise ValidationError("record strides must be >= 1")
        if self.method not in ("rk4", "rk45"):
            raise ValidationError(f"unknown integration method {self.method!r}")
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise ValidationError("adaptive tolerances must be positive")

    def step(self, mode: str) -> float:
        return self.step_full if mode == FULL else self.step_reduced

    def stride(self, mode: str) -> int:
        return self.record_stride_full if mode == FULL else self.record_stride_reduced


def _check_dims(model: NetworkModel, theta, k):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.n,):
        raise ValidationError(
            f"angle vector has shape {theta.shape}, expected ({model.n},)"
        )
    k = model.k_matrix if k is None else np.asarray(k, dtype=float)
    if k.shape != (model.n, model.n):
        raise ValidationError(
            f"k matrix has shape {k.shape}, expected ({model.n}, {model.n})"
        )
    return theta, k


def coupling_flow(theta, k) -> np.ndarray:
    """Electric power each machine sends into the network."""
    theta = np.asarray(theta, dtype=float)
    return (k * np.sin(theta[:, None] - theta[None, :])).sum(axis=1)


def full_rhs(state: SystemState, model: NetworkModel, k=None):
    """Time derivatives (dtheta, domega) of the full model."""
    theta, k = _check_dims(model, state.theta, k)
    if (model.inertia <= 0.0).any():
        bad = model.ids[int(np.argmin(model.inertia))]
        raise ValidationError(
            f"machine {bad!r} has zero inertia; the full model is undefined, "
            "use reduced_rhs / reduced mode instead"
        )
    domega = (model.p_ref - model.droop * state.omega - coupling_flow(theta, k)) / model.inertia
    return state.omega.copy(), domega


def reduced_rhs(theta, model: NetworkModel, k=None) -> np.ndarray:
    """Angle velocities of the droop-only reduced model."""
    theta, k = _check_dims(model, theta, k)
    if (model.droop <= 0.0).any():
        bad = model.ids[int(np.argmin(model.droop))]
        raise ValidationError(f"machine {bad!r} has zero droop; reduced model undefined")
    return (model.p_ref - coupling_flow(theta, k)) / model.droop


def reduced_jacobian(theta, model: NetworkModel, k=None) -> np.ndarray:
    """Jacobian of reduced_rhs; rows sum to zero by uniform-shift symmetry."""
    theta, k = _check_dims(model, theta, k)
    if (model.droop <= 0.0).any():
        raise ValidationError("reduced Jacobian undefined for zero droop")
    cos = np.cos(theta[:, None] - theta[None, :])
    w = k * cos
    jac = w / model.droop[:, None]
    np.fill_diagonal(jac, 0.0)
    jac[np.diag_indices_from(jac)] = -jac.sum(axis=1)
    return jac


def algebraic_omega(theta, model: NetworkModel, k=None) -> np.ndarray:
    """Quasi-steady frequency deviation implied by the droop balance."""
    return reduced_rhs(theta, model, k)


def total_energy(theta, omega, model: NetworkModel, k=None) -> float:
    """Kinetic plus potential energy of the undamped full model.

    Conserved along full-model trajectories with zero droop and a fixed
    coupling matrix; used as an integration-quality diagnostic.
    """
    theta, k = _check_dims(model, theta, k)
    omega = np.asarray(omega, dtype=float)
    kinetic = 0.5 * (model.inertia * omega**2).sum()
    drive = (model.p_ref * theta).sum()
    iu, ju = np.triu_indices(len(theta), k=1)
    potential = (k[iu, ju] * (1.0 - np.cos(theta[iu] - theta[ju]))).sum()
    return float(kinetic - drive + potential)


def _segments(t0, t_end, schedule: SwitchSchedule, k0):
    """(t_start, t_stop, k) pieces covering [t0, t_end] plus event list."""
    pieces = []
    events = []
    current_k = k0
    t_cursor = t0
    for ev in schedule:
        if ev.time < t0 - 1e-15:
            raise ValidationError(
                f"switch at {ev.time} precedes initial time {t0}"
            )
        if ev.time > t_end + 1e-15:
            break
        pieces.append((t_cursor, min(ev.time, t_end), current_k))
        events.append((ev.time, ev.label))
        current_k = ev.k_matrix
        t_cursor = ev.time
    pieces.append((t_cursor, t_end, current_k))
    return pieces, events


def _integrate_rk45(model, state0, pieces, mode, config):
    """Adaptive cross-check path built on scipy's RK45."""
    from scipy.integrate import solve_ivp

    n = model.n
    times = [state0.time]
    thetas = [state0.theta.copy()]
    if mode == REDUCED:
        omegas = [reduced_rhs(state0.theta, model, pieces[0][2])]
    else:
        omegas = [state0.omega.copy()]
    theta = state0.theta.copy()
    omega = state0.omega.copy()
    h_rec = config.step(mode) * config.stride(mode)
    for (ta, tb, k) in pieces:
        if tb <= ta:
            continue
        n_rec = max(1, int(math.ceil((tb - ta) / h_rec - 1e-9)))
        grid = list(ta + (tb - ta) * np.arange(1, n_rec + 1) / n_rec)
        grid[-1] = tb
        if mode == FULL:
            def rhs(t, y, k=k):
                th, om = y[:n], y[n:]
                dom = (model.p_ref - model.droop * om - coupling_flow(th, k)) / model.inertia
                return np.concatenate([om, dom])
            sol = solve_ivp(rhs, (ta, tb), np.concatenate([theta, omega]),
                            method="RK45", t_eval=grid, rtol=config.rtol,
                            atol=config.atol)
            ys = sol.y.T
            theta, omega = ys[-1, :n].copy(), ys[-1, n:].copy()
            for trow, yrow in zip(sol.t, ys):
                times.append(float(trow))
                thetas.append(yrow[:n].copy())
                omegas.append(yrow[n:].copy())
        else:
            def rhs(t, y, k=k):
                return (model.p_ref - coupling_flow(y, k)) / model.droop
            sol = solve_ivp(rhs, (ta, tb), theta, method="RK45", t_eval=grid,
                            rtol=config.rtol, atol=config.atol)
            ys = sol.y.T
            theta = ys[-1].copy()
            for trow, yrow in zip(sol.t, ys):
                times.append(float(trow))
                thetas.append(yrow.copy())
                omegas.append(reduced_rhs(yrow, model, k))
        times[-1] = tb
    return times, thetas, omegas, False


def integrate(model: NetworkModel, initial: SystemState, schedule=None,
              t_end: float = 1.0, config: IntegratorConfig | None = None,
              mode: str = FULL) -> TrajectoryRecord:
    """Integrate through the switch schedule and record a trajectory.

    Steps never cross a switch instant: each constant-topology segment is
    integrated with a uniform sub-step chosen so the segment ends land
    exactly on the scheduled times, which therefore appear verbatim in
    the sample times. A non-finite state truncates the run and flags the
    record as diverged.
    """
    config = config or IntegratorConfig()
    if mode not in (FULL, REDUCED):
        raise ValidationError(f"unknown mode {mode!r}")
    schedule = schedule if isinstance(schedule, SwitchSchedule) else SwitchSchedule(schedule or ())
    if initial.n != model.n:
        raise ValidationError(
            f"initial state has {initial.n} machines, model has {model.n}"
        )
    schedule.validate(model.n)
    if mode == FULL and (model.inertia <= 0.0).any():
        raise ValidationError("full mode needs J > 0 on every machine; use reduced mode")
    if mode == REDUCED and (model.droop <= 0.0).any():
        raise ValidationError("reduced mode needs D > 0 on every machine")
    t0 = float(initial.time)
    if t_end <= t0:
        raise ValidationError(f"t_end = {t_end} must exceed initial time {t0}")
    if len(schedule) and schedule.entries[0].time < t0:
        raise ValidationError("initial time is after the first switch")

    pieces, events = _segments(t0, float(t_end), schedule, model.k_matrix)

    if config.method == "rk45":
        times, thetas, omegas, diverged = _integrate_rk45(model, initial, pieces, mode, config)
        return TrajectoryRecord(
            times=np.asarray(times), theta=np.asarray(thetas), omega=np.asarray(omegas),
            events=tuple(events), mode=mode, diverged=diverged,
        )

    h = config.step(mode)
    stride = config.stride(mode)
    theta = initial.theta.copy()
    omega = initial.omega.copy()
    times = [t0]
    theta_rows = [theta.copy()]
    if mode == REDUCED:
        omega_rows = [reduced_rhs(theta, model, pieces[0][2])]
    else:
        omega_rows = [omega.copy()]

    j = np.ascontiguousarray(model.inertia)
    d = np.ascontiguousarray(model.droop)
    p = np.ascontiguousarray(model.p_ref)
    diverged = False
    for (ta, tb, k) in pieces:
        if tb - ta <= 0.0:
            continue
        k = np.ascontiguousarray(k, dtype=float)
        n_steps = max(1, int(math.ceil((tb - ta) / h - 1e-9)))
        h_seg = (tb - ta) / n_steps
        n_rec = n_steps // stride + (1 if n_steps % stride else 0)
        out_t = np.empty(n_rec)
        out_theta = np.empty((n_rec, model.n))
        out_omega = np.empty((n_rec, model.n))
        if mode == FULL:
            rec, ok = _kernels.rk4_full_segment(
                theta, omega, j, d, p, k, ta, h_seg, n_steps, stride,
                out_t, out_theta, out_omega)
        else:
            rec, ok = _kernels.rk4_reduced_segment(
                theta, d, p, k, ta, h_seg, n_steps, stride,
                out_t, out_theta, out_omega)
        if rec:
            if ok:
                out_t[rec - 1] = tb  # exact landing, no step-sum rounding
            times.extend(out_t[:rec].tolist())
            theta_rows.extend(out_theta[:rec])
            omega_rows.extend(out_omega[:rec])
        if not ok:
            diverged = True
            break

    return TrajectoryRecord(
        times=np.asarray(times),
        theta=np.asarray(theta_rows),
        omega=np.asarray(omega_rows),
        events=tuple(events),
        mode=mode,
        diverged=diverged,
    )
