"""Time evolution along control schedules.

Both propagators use fixed-step classical RK4, segment-aligned: within a
segment the step is dt = min(dt_max, eta / max ||H|| over the segment
endpoints), which for affine H(lambda) bounds the norm over the whole
segment. exact_step provides an independent oracle (eigen/superoperator
exponential on a frozen-lambda step) that shares no code with the RK4
path.

Open-system runs integrate vec(rho) under the affine Liouvillian
L(lambda) = L0 + lambda*L1, assembled by applying master_rhs to the
matrix units; an affinity probe at lambda = 0.5 falls back to per-step
generic evaluation if the model's generator is not affine. Hermiticity
is restored each step (corrections logged), trace and positivity are
monitored at every sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .control import ControlSchedule, Hold, Jump, Ramp
from .errors import (
    HermiticityBreach,
    MissingBath,
    NormDrift,
    PositivityBreach,
    TraceDrift,
)
from .linalg import density_matrix, expm, pure_state
from .models import DiabaticBasis, Model, effective_hamiltonian, master_rhs

NORM_ABORT = 1e-6
TRACE_ABORT = 1e-6
HERM_ABORT = 1e-9
EIG_ABORT = -1e-3
EIG_WARN = -1e-6


@dataclass(frozen=True)
class IntegratorConfig:
    dt_max: float = 0.1
    eta: float = 0.01          # max ||H||*dt per step
    sample_stride: int = 10

    def __post_init__(self):
        if self.dt_max <= 0.0:
            raise ValueError(f"dt_max must be > 0, got {self.dt_max}")
        if not (0.0 < self.eta <= 0.1):
            raise ValueError(f"eta must be in (0, 0.1], got {self.eta}")
        if self.sample_stride < 1:
            raise ValueError(f"sample_stride must be >= 1, got {self.sample_stride}")


@dataclass(frozen=True, eq=False)
class EvolutionProblem:
    model: Model
    schedule: ControlSchedule
    initial: np.ndarray
    goal: np.ndarray
    diabatic: DiabaticBasis | None = None
    tau_scale: float = 1.0     # tau = t * tau_scale on the reported time axis
    config: IntegratorConfig = field(default_factory=IntegratorConfig)


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    tau: float
    lam: float
    fidelity: float
    purity: float
    populations: tuple[float, ...]
    trace_error: float
    min_eigenvalue: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    points: tuple[TrajectoryPoint, ...]
    final_state: np.ndarray
    meta: dict

    def __post_init__(self):
        ts = [p.t for p in self.points]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("trajectory times must be strictly increasing")


def _segment_endpoints(seg) -> tuple[float, float]:
    if isinstance(seg, Hold):
        return seg.lam, seg.lam
    return seg.lam_from, seg.lam_to


def _segment_dt(model: Model, seg, config: IntegratorConfig) -> tuple[int, float]:
    lam_a, lam_b = _segment_endpoints(seg)
    scale = max(np.linalg.norm(model.hamiltonian(lam_a), 2),
                np.linalg.norm(model.hamiltonian(lam_b), 2))
    dt = config.dt_max if scale == 0.0 else min(config.dt_max, config.eta / scale)
    n = max(1, math.ceil(seg.duration / dt))
    return n, seg.duration / n


def evolve_closed(problem: EvolutionProblem) -> Trajectory:
    """Schrodinger propagation of a pure state along the schedule."""
    model = problem.model
    config = problem.config
    basis = problem.diabatic.states if problem.diabatic is not None else np.eye(model.dim, dtype=complex)
    goal = problem.goal
    psi = pure_state(problem.initial).copy()
    b0 = -1j * model.h0
    b1 = -1j * model.h1

    points: list[TrajectoryPoint] = []
    states: list[np.ndarray] = []
    max_drift = 0.0

    def emit(t: float, lam: float):
        nonlocal max_drift
        nrm2 = float(np.real(np.vdot(psi, psi)))
        drift = abs(math.sqrt(nrm2) - 1.0)
        max_drift = max(max_drift, drift)
        if drift > NORM_ABORT:
            raise NormDrift(f"norm drift {drift:.3e} at t = {t}")
        f = float(abs(np.vdot(goal, psi)) ** 2)
        pops = tuple(float(x) for x in np.abs(basis.conj().T @ psi) ** 2)
        points.append(TrajectoryPoint(
            t=t, tau=t * problem.tau_scale, lam=lam, fidelity=f,
            purity=nrm2 * nrm2, populations=pops,
            trace_error=abs(nrm2 - 1.0), min_eigenvalue=0.0))
        states.append(psi.copy())

    bounds = problem.schedule.boundaries()
    emitted_initial = False
    lam_now = 0.0
    for seg, t0, t1 in zip(problem.schedule.segments, bounds[:-1], bounds[1:]):
        if isinstance(seg, Jump):
            lam_now = seg.lam_to
            continue
        lam_a, lam_b = _segment_endpoints(seg)
        if seg.duration == 0.0:
            lam_now = lam_b
            continue
        if not emitted_initial:
            emit(t0, lam_a)
            emitted_initial = True
        n, dt = _segment_dt(model, seg, config)
        span = lam_b - lam_a
        for k in range(n):
            la = lam_a + span * (k * dt / seg.duration)
            lm = lam_a + span * ((k + 0.5) * dt / seg.duration)
            lb = lam_a + span * ((k + 1) * dt / seg.duration)
            a1 = b0 + la * b1
            a2 = b0 + lm * b1
            a3 = b0 + lb * b1
            k1 = a1 @ psi
            k2 = a2 @ (psi + (0.5 * dt) * k1)
            k3 = a2 @ (psi + (0.5 * dt) * k2)
            k4 = a3 @ (psi + dt * k3)
            psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if k + 1 < n and (k + 1) % config.sample_stride == 0:
                emit(t0 + (k + 1) * dt, lam_a + span * ((k + 1) * dt / seg.duration))
        emit(t1, lam_b)
        lam_now = lam_b
    if not emitted_initial:
        emit(0.0, lam_now)
    meta = {"open": False, "schedule": problem.schedule, "model": model,
            "config": config, "states": states, "max_norm_drift": max_drift}
    return Trajectory(points=tuple(points), final_state=psi, meta=meta)


def _liouvillian(model: Model, lam: float) -> np.ndarray:
    """Matrix of master_rhs at fixed lambda, column-stacked convention."""
    d = model.dim
    L = np.empty((d * d, d * d), dtype=complex)
    for j in range(d * d):
        e = np.zeros((d, d), dtype=complex)
        e[j % d, j // d] = 1.0
        L[:, j] = master_rhs(model, lam, e).reshape(d * d, order="F")
    return L


def evolve_open(problem: EvolutionProblem) -> Trajectory:
    """Master-equation propagation of a density matrix along the schedule."""
    model = problem.model
    if model.bath is None:
        raise MissingBath("open evolution needs bath parameters")
    config = problem.config
    d = model.dim
    basis = problem.diabatic.states if problem.diabatic is not None else np.eye(d, dtype=complex)
    goal = problem.goal
    rho = density_matrix(problem.initial)
    v = rho.reshape(d * d, order="F").copy()

    L0 = _liouvillian(model, 0.0)
    L1 = _liouvillian(model, 1.0) - L0
    probe = _liouvillian(model, 0.5)
    affine = bool(np.max(np.abs(L0 + 0.5 * L1 - probe)) <= 1e-9)

    points: list[TrajectoryPoint] = []
    max_trace_err = 0.0
    max_herm_corr = 0.0
    min_eig_seen = math.inf
    warnings = 0

    def emit(t: float, lam: float):
        nonlocal max_trace_err, min_eig_seen, warnings
        r = v.reshape(d, d, order="F")
        tr_err = abs(float(np.real(np.trace(r))) - 1.0)
        max_trace_err = max(max_trace_err, tr_err)
        if tr_err > TRACE_ABORT:
            raise TraceDrift(f"trace error {tr_err:.3e} at t = {t}")
        low = float(np.min(np.linalg.eigvalsh(r)))
        min_eig_seen = min(min_eig_seen, low)
        if low < EIG_ABORT:
            raise PositivityBreach(f"eigenvalue {low:.3e} at t = {t}")
        if low < EIG_WARN:
            warnings += 1
        f = float(np.real(np.vdot(goal, r @ goal)))
        pops = tuple(float(np.real(np.vdot(basis[:, k], r @ basis[:, k])))
                     for k in range(d))
        points.append(TrajectoryPoint(
            t=t, tau=t * problem.tau_scale, lam=lam, fidelity=f,
            purity=float(np.real(np.trace(r @ r))), populations=pops,
            trace_error=tr_err, min_eigenvalue=low))

    def rhs_generic(lam: float, vec: np.ndarray) -> np.ndarray:
        return master_rhs(model, lam, vec.reshape(d, d, order="F")).reshape(d * d, order="F")

    bounds = problem.schedule.boundaries()
    emitted_initial = False
    lam_now = 0.0
    for seg, t0, t1 in zip(problem.schedule.segments, bounds[:-1], bounds[1:]):
        if isinstance(seg, Jump):
            lam_now = seg.lam_to
            continue
        lam_a, lam_b = _segment_endpoints(seg)
        if seg.duration == 0.0:
            lam_now = lam_b
            continue
        if not emitted_initial:
            emit(t0, lam_a)
            emitted_initial = True
        n, dt = _segment_dt(model, seg, config)
        span = lam_b - lam_a
        for k in range(n):
            la = lam_a + span * (k * dt / seg.duration)
            lm = lam_a + span * ((k + 0.5) * dt / seg.duration)
            lb = lam_a + span * ((k + 1) * dt / seg.duration)
            if affine:
                a1 = L0 + la * L1
                a2 = L0 + lm * L1
                a3 = L0 + lb * L1
                k1 = a1 @ v
                k2 = a2 @ (v + (0.5 * dt) * k1)
                k3 = a2 @ (v + (0.5 * dt) * k2)
                k4 = a3 @ (v + dt * k3)
            else:
                k1 = rhs_generic(la, v)
                k2 = rhs_generic(lm, v + (0.5 * dt) * k1)
                k3 = rhs_generic(lm, v + (0.5 * dt) * k2)
                k4 = rhs_generic(lb, v + dt * k3)
            v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            r = v.reshape(d, d, order="F")
            corr = 0.5 * float(np.max(np.abs(r - r.conj().T)))
            if corr > max_herm_corr:
                max_herm_corr = corr
                if corr > HERM_ABORT:
                    raise HermiticityBreach(
                        f"Hermiticity correction {corr:.3e} at step {k} of segment at t = {t0}")
            r = 0.5 * (r + r.conj().T)
            v = r.reshape(d * d, order="F")
            if k + 1 < n and (k + 1) % config.sample_stride == 0:
                emit(t0 + (k + 1) * dt, lam_a + span * ((k + 1) * dt / seg.duration))
        emit(t1, lam_b)
        lam_now = lam_b
    if not emitted_initial:
        emit(0.0, lam_now)
    meta = {"open": True, "schedule": problem.schedule, "model": model,
            "config": config, "affine": affine,
            "max_trace_error": max_trace_err, "max_herm_correction": max_herm_corr,
            "min_eigenvalue": min_eig_seen, "positivity_warnings": warnings}
    return Trajectory(points=tuple(points),
                      final_state=v.reshape(d, d, order="F"), meta=meta)


def exact_step(model: Model, lam: float, state: np.ndarray, dt: float,
               open_system: bool = False) -> np.ndarray:
    """Frozen-lambda propagation by exponentiating the full generator.

    Independent of the RK4 path and of master_rhs: the open-system
    superoperator is assembled here from the kron identities
    vec(A rho B) = (B^T x A) vec(rho).
    """
    if not open_system:
        return expm(-1j * dt * model.hamiltonian(lam)) @ np.asarray(state, dtype=complex)
    if model.bath is None:
        raise MissingBath("open exact step needs bath parameters")
    b = model.bath
    d = model.dim
    eye = np.eye(d, dtype=complex)
    C = b.coupling
    Y = 1j * (b.tunneling @ C)
    h_eff = effective_hamiltonian(model, lam)
    CC = C @ C
    L = -1j * (np.kron(eye, h_eff) - np.kron(h_eff.conj(), eye))
    L -= 0.5 * b.gamma0 * b.temperature * (
        np.kron(eye, CC) - 2.0 * np.kron(C.T, C) + np.kron(CC.T, eye))
    L += 0.25j * b.gamma0 * b.renorm_gap * (np.kron(C.T, Y) - np.kron(Y.T, C))
    vec = np.asarray(state, dtype=complex).reshape(d * d, order="F")
    out = expm(dt * L) @ vec
    return out.reshape(d, d, order="F")


def sweep_gamma(make_problem: Callable[[float], EvolutionProblem],
                gammas: list[float]) -> list[dict]:
    """Run evolve_open at each coupling; failures annotate the row and continue."""
    rows = []
    for g in gammas:
        row: dict = {"gamma0": g, "fidelity": None, "error": None}
        try:
            traj = evolve_open(make_problem(g))
            row["fidelity"] = traj.points[-1].fidelity
        except Exception as exc:  # annotated, sweep continues
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows
