"""Control schedules and protocol compilation.

A schedule is a flat sequence of primitive segments (hold, linear ramp,
instantaneous jump) in the control parameter lambda. A protocol is the
higher-level description: an ordered list of crossing traversals, each
either swept through (diabatically fast or adiabatically slow) or handled
by a sudden switch (jump to the crossing, hold, jump out). compile turns
a protocol into a schedule with explicit durations.

Time-optimality bookkeeping lives here too: qsl_time gives the
Mandelstam-Tamm minimum time for a state transfer under a frozen
Hamiltonian, and mt_report checks each hold of a closed trajectory
against that bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    DegenerateGap,
    NonpositiveSpeed,
    NotPureTrajectory,
    OutOfRange,
    UnreachablePath,
    ZeroSpan,
    ZeroVariance,
)
from .linalg import fidelity
from .models import AvoidedCrossing, half_width, local_critical_velocity

# ----------------------------------------------------------------- segments

@dataclass(frozen=True)
class Hold:
    lam: float
    duration: float


@dataclass(frozen=True)
class Ramp:
    lam_from: float
    lam_to: float
    duration: float


@dataclass(frozen=True)
class Jump:
    lam_to: float

    @property
    def duration(self) -> float:
        return 0.0


Segment = Union[Hold, Ramp, Jump]


def ramp(lam_from: float, lam_to: float, speed: float) -> Ramp:
    """Linear ramp between two lambda values at the given |dlambda/dt|."""
    if speed <= 0.0:
        raise NonpositiveSpeed(f"ramp speed must be > 0, got {speed}")
    if lam_to == lam_from:
        raise ZeroSpan("ramp endpoints coincide")
    return Ramp(lam_from=lam_from, lam_to=lam_to,
                duration=abs(lam_to - lam_from) / speed)


def sudden_switch(lambda_star: float, gap: float, fraction: float = 1.0,
                  exit_lambda: float | None = None) -> tuple[Segment, ...]:
    """Jump to a crossing, hold for fraction * pi/gap, optionally jump out.

    A full fraction transfers the population across the gap; fraction f
    rotates by f*pi/2 on the Bloch sphere of the two crossing states.
    """
    if gap <= 1e-9:
        raise DegenerateGap(f"gap {gap} too small for a finite hold")
    segs: list[Segment] = [Jump(lambda_star), Hold(lambda_star, fraction * math.pi / gap)]
    if exit_lambda is not None:
        segs.append(Jump(exit_lambda))
    return tuple(segs)


# ---------------------------------------------------------------- schedules

@dataclass(frozen=True)
class ControlSchedule:
    segments: tuple[Segment, ...]

    @property
    def total_duration(self) -> float:
        return math.fsum(s.duration for s in self.segments)

    def boundaries(self) -> list[float]:
        """Cumulative segment end times, starting with 0.0."""
        out = [0.0]
        acc: list[float] = []
        for s in self.segments:
            acc.append(s.duration)
            out.append(math.fsum(acc))
        return out

    def lambda_at(self, t: float) -> float:
        """Control value at time t, right-continuous across boundaries."""
        total = self.total_duration
        if t < 0.0 or t > total:
            raise OutOfRange(f"t = {t} outside [0, {total}]")
        bounds = self.boundaries()
        lam = _segment_start_lambda(self.segments[0]) if self.segments else 0.0
        for seg, t0, t1 in zip(self.segments, bounds[:-1], bounds[1:]):
            if isinstance(seg, Jump):
                lam = seg.lam_to
                continue
            if t < t1 or (t == t1 == total):
                if isinstance(seg, Hold):
                    return seg.lam
                frac = 0.0 if t1 == t0 else (min(t, t1) - t0) / (t1 - t0)
                return seg.lam_from + frac * (seg.lam_to - seg.lam_from)
            lam = seg.lam if isinstance(seg, Hold) else seg.lam_to
        return lam


def _segment_start_lambda(seg: Segment) -> float:
    if isinstance(seg, Hold):
        return seg.lam
    if isinstance(seg, Ramp):
        return seg.lam_from
    return seg.lam_to


def serialize_schedule(schedule: ControlSchedule) -> str:
    """One segment per line; floats use shortest round-trip decimals."""
    lines = []
    for s in schedule.segments:
        if isinstance(s, Hold):
            lines.append(f"HOLD {s.lam!r} {s.duration!r}")
        elif isinstance(s, Ramp):
            lines.append(f"RAMP {s.lam_from!r} {s.lam_to!r} {s.duration!r}")
        else:
            lines.append(f"JUMP {s.lam_to!r}")
    return "\n".join(lines) + "\n"


def parse_schedule(text: str) -> ControlSchedule:
    segs: list[Segment] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        kind, args = parts[0], [float(x) for x in parts[1:]]
        if kind == "HOLD" and len(args) == 2:
            segs.append(Hold(args[0], args[1]))
        elif kind == "RAMP" and len(args) == 3:
            segs.append(Ramp(args[0], args[1], args[2]))
        elif kind == "JUMP" and len(args) == 1:
            segs.append(Jump(args[0]))
        else:
            raise ValueError(f"bad schedule line: {raw!r}")
    return ControlSchedule(tuple(segs))


# ---------------------------------------------------------------- protocols

@dataclass(frozen=True)
class Diabatic:
    """Sweep through the crossing fast: speed = multiple * local v_c."""
    crossing: AvoidedCrossing
    multiple: float = 100.0

    def __post_init__(self):
        if self.multiple < 10.0:
            raise ValueError(f"diabatic multiple must be >= 10, got {self.multiple}")


@dataclass(frozen=True)
class Adiabatic:
    """Sweep through the crossing slowly: speed = fraction * local v_c."""
    crossing: AvoidedCrossing
    fraction: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.fraction <= 0.1):
            raise ValueError(f"adiabatic fraction must be in (0, 0.1], got {self.fraction}")


@dataclass(frozen=True)
class Swap:
    """Sudden switch at the crossing: jump in, hold fraction * pi/gap, jump out."""
    crossing: AvoidedCrossing
    fraction: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError(f"swap fraction must be in (0, 1], got {self.fraction}")


ProtocolStep = Union[Diabatic, Adiabatic, Swap]


@dataclass(frozen=True)
class ProtocolSpec:
    start_label: int
    goal_label: int
    steps: tuple[ProtocolStep, ...]
    lambda_start: float
    lambda_end: float


def default_lambda0(crossings: list[AvoidedCrossing], margin: float = 20.0) -> float:
    """Asymptotic window edge: margin half-widths beyond every crossing."""
    return max(abs(ac.lambda_star) + margin * half_width(ac) for ac in crossings)


def _sign(x: float) -> float:
    return 1.0 if x > 0.0 else (-1.0 if x < 0.0 else 0.0)


def compile_protocol(protocol: ProtocolSpec, margin: float = 10.0,
                     transit_speed: float | None = None,
                     settle: float = 1e-6, start_hold: float = 1e-6) -> ControlSchedule:
    """Lower a protocol to an explicit segment schedule.

    Sweep steps enter and leave each crossing margin half-widths away;
    stretches between crossings are covered by transit ramps (default
    speed: 100x the smallest local critical velocity, deep in the
    diabatic regime everywhere). Swap exits jump margin half-widths past
    the crossing, or directly to lambda_end on the final step.
    """
    steps = protocol.steps
    if transit_speed is None:
        if steps:
            transit_speed = 100.0 * min(local_critical_velocity(s.crossing) for s in steps)
        elif protocol.lambda_end != protocol.lambda_start:
            raise ValueError("transit_speed required for a protocol with no steps")
    segs: list[Segment] = [Hold(protocol.lambda_start, start_hold)]
    pos = protocol.lambda_start
    for i, step in enumerate(steps):
        ac = step.crossing
        w = margin * half_width(ac)
        lam = ac.lambda_star
        if isinstance(step, Swap):
            d = _sign(lam - pos)
            if d == 0.0:
                d = _sign(protocol.lambda_end - lam) or 1.0
            exit_lam = protocol.lambda_end if i == len(steps) - 1 else lam + d * w
            segs.extend(sudden_switch(lam, ac.gap, step.fraction, exit_lam))
            pos = exit_lam
        else:
            d = _sign(lam - pos)
            if d == 0.0:
                raise UnreachablePath(
                    f"sweep step at lambda = {lam} starts on top of the crossing")
            entry = lam - d * w
            if entry != pos:
                segs.append(ramp(pos, entry, transit_speed))
            v_c = local_critical_velocity(ac)
            speed = (step.multiple if isinstance(step, Diabatic) else step.fraction) * v_c
            segs.append(ramp(entry, lam + d * w, speed))
            pos = lam + d * w
    if pos != protocol.lambda_end:
        segs.append(ramp(pos, protocol.lambda_end, transit_speed))
    segs.append(Hold(protocol.lambda_end, settle))
    return ControlSchedule(tuple(segs))


# ------------------------------------------------------------- speed limits

def qsl_time(initial: np.ndarray, goal: np.ndarray, hamiltonian: np.ndarray) -> float:
    """Mandelstam-Tamm minimum time to reach the goal overlap under a frozen H.

    Returns arccos(sqrt(F)) / spread(H). A vanishing energy spread with
    distinct states means the transfer never happens (inf); asking for
    the bound between identical states with no spread is degenerate.
    """
    f = fidelity(initial, goal)
    h_psi = hamiltonian @ initial
    mean = float(np.real(np.vdot(initial, h_psi)))
    mean_sq = float(np.real(np.vdot(h_psi, h_psi)))
    spread = math.sqrt(max(mean_sq - mean ** 2, 0.0))
    if spread < 1e-12:
        if f > 1.0 - 1e-12:
            raise ZeroVariance("identical states with zero energy spread")
        return math.inf
    return math.acos(math.sqrt(min(max(f, 0.0), 1.0))) / spread


@dataclass(frozen=True)
class HoldBound:
    t_start: float
    duration: float
    lam: float
    bound: float
    slack: float


def mt_report(trajectory) -> list[HoldBound]:
    """Per-hold Mandelstam-Tamm check over a closed trajectory.

    Each hold of the driving schedule is compared against the minimum
    time needed to cover the overlap change that actually occurred
    during it. slack = duration - bound >= 0 always; slack ~ 0 means the
    hold is time-optimal for what it did.
    """
    meta = trajectory.meta
    if meta.get("open", False) or "states" not in meta:
        raise NotPureTrajectory("hold bounds need stored pure states")
    schedule: ControlSchedule = meta["schedule"]
    model = meta["model"]
    times = [p.t for p in trajectory.points]
    states = meta["states"]

    def state_at(t: float) -> np.ndarray:
        for tk, sk in zip(times, states):
            if abs(tk - t) <= 1e-12 * max(1.0, abs(t)):
                return sk
        raise NotPureTrajectory(f"no stored state at t = {t}")

    out = []
    bounds = schedule.boundaries()
    for seg, t0, t1 in zip(schedule.segments, bounds[:-1], bounds[1:]):
        if not isinstance(seg, Hold):
            continue
        psi0 = state_at(t0)
        psi1 = state_at(t1)
        h = model.hamiltonian(seg.lam)
        f = fidelity(psi1 / np.linalg.norm(psi1), psi0 / np.linalg.norm(psi0))
        h_psi = h @ psi0
        mean = float(np.real(np.vdot(psi0, h_psi)))
        mean_sq = float(np.real(np.vdot(h_psi, h_psi)))
        spread = math.sqrt(max(mean_sq - mean ** 2, 0.0))
        angle = math.acos(math.sqrt(min(max(f, 0.0), 1.0)))
        bound = 0.0 if angle < 1e-12 else (math.inf if spread < 1e-12 else angle / spread)
        out.append(HoldBound(t_start=t0, duration=seg.duration, lam=seg.lam,
                             bound=bound, slack=seg.duration - bound))
    return out
