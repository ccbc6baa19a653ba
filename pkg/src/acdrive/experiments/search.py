"""Exhaustive protocol search over the crossing graph.

Candidates are generated by walking the diabatic lines along monotone
lambda sweeps that start at the left asymptote, with at most one
direction reversal. At every crossing the current line participates in,
the walk branches: pass through diabatically (D), swap to the partner
line and keep going (S), swap and terminate at the near asymptote
(S, only when continuing would meet further crossings; otherwise it
duplicates the continued walk's own ending), or swap and reverse
direction (S, at most once per walk).

A walk ends when no crossing lies ahead on its line, or when max_steps
actions have been taken. Every ending is counted in `explored`; only
endings whose line carries the goal label are compiled and evolved.
The best candidate is the highest closed fidelity, ties broken by
shorter total time, then fewer swaps.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..control import (
    ControlSchedule,
    Diabatic,
    ProtocolSpec,
    ProtocolStep,
    Swap,
    compile_protocol,
    default_lambda0,
)
from ..dynamics import EvolutionProblem, IntegratorConfig, evolve_closed
from ..errors import NoPathFound
from ..linalg import pure_state
from ..models import (
    AvoidedCrossing,
    DiabaticBasis,
    Model,
    crossing_participants,
    half_width,
)


@dataclass(frozen=True)
class SearchResult:
    protocol: ProtocolSpec
    closed_fidelity: float
    total_time: float
    explored: int


@dataclass(frozen=True)
class Candidate:
    actions: tuple[str, ...]
    protocol: ProtocolSpec
    schedule: ControlSchedule
    fidelity: float
    total_time: float
    n_swaps: int


@dataclass(frozen=True)
class _Leaf:
    actions: tuple[str, ...]
    crossings: tuple[AvoidedCrossing, ...]
    label: int
    lambda_end: float


def _enumerate(crossings: list[AvoidedCrossing],
               participants: list[tuple[int, int]],
               start_label: int, max_steps: int,
               lambda0: float, margin: float) -> list[_Leaf]:
    leaves: list[_Leaf] = []

    def encounters(label: int, pos: float, direction: float) -> list[int]:
        hits = [(direction * (crossings[i].lambda_star - pos), i)
                for i in range(len(crossings))
                if label in participants[i]
                and direction * (crossings[i].lambda_star - pos) > 0.0]
        hits.sort()
        return [i for _, i in hits]

    def walk(label: int, pos: float, direction: float, reversals: int,
             actions: tuple[str, ...], acs: tuple[AvoidedCrossing, ...]):
        ahead = encounters(label, pos, direction)
        if not ahead or len(actions) >= max_steps:
            leaves.append(_Leaf(actions=actions, crossings=acs, label=label,
                                lambda_end=direction * lambda0))
            return
        i = ahead[0]
        ac = crossings[i]
        w = margin * half_width(ac)
        exit_pos = ac.lambda_star + direction * w
        a, b = participants[i]
        partner = b if label == a else a
        # D: pass through on the same line
        walk(label, exit_pos, direction, reversals,
             actions + ("D",), acs + (ac,))
        # S: swap and keep sweeping
        walk(partner, exit_pos, direction, reversals,
             actions + ("S",), acs + (ac,))
        # S, terminating jump to the near asymptote; distinct from the
        # continued swap only when the continuation still has work to do
        if encounters(partner, exit_pos, direction) and len(actions) + 1 < max_steps:
            leaves.append(_Leaf(actions=actions + ("S",), crossings=acs + (ac,),
                                label=partner, lambda_end=direction * lambda0))
        # S, reversing the sweep direction
        if reversals < 1:
            walk(partner, exit_pos, -direction, reversals + 1,
                 actions + ("S",), acs + (ac,))

    walk(start_label, -lambda0, 1.0, 0, (), ())
    return leaves


def _compile_leaf(leaf: _Leaf, start_label: int, lambda0: float,
                  multiple: float, margin: float, settle: float) -> tuple[ProtocolSpec, ControlSchedule]:
    steps: list[ProtocolStep] = []
    for action, ac in zip(leaf.actions, leaf.crossings):
        if action == "D":
            steps.append(Diabatic(crossing=ac, multiple=multiple))
        else:
            steps.append(Swap(crossing=ac))
    protocol = ProtocolSpec(start_label=start_label, goal_label=leaf.label,
                            steps=tuple(steps), lambda_start=-lambda0,
                            lambda_end=leaf.lambda_end)
    return protocol, compile_protocol(protocol, margin=margin, settle=settle)


def enumerate_candidates(model: Model, crossings: list[AvoidedCrossing],
                         basis: DiabaticBasis, start_label: int, goal_label: int,
                         max_steps: int, multiple: float = 400.0,
                         margin: float = 10.0, settle: float = 1e-6,
                         config: IntegratorConfig | None = None) -> tuple[list[Candidate], int]:
    """All goal-reaching candidates, evolved and ranked; plus the leaf count."""
    if config is None:
        config = IntegratorConfig()
    participants = [crossing_participants(model, basis, ac) for ac in crossings]
    lambda0 = default_lambda0(crossings)
    leaves = _enumerate(crossings, participants, start_label, max_steps,
                        lambda0, margin)
    initial = pure_state(basis.state(start_label))
    goal = pure_state(basis.state(goal_label))
    candidates = []
    for leaf in leaves:
        if leaf.label != goal_label:
            continue
        protocol, schedule = _compile_leaf(leaf, start_label, lambda0,
                                           multiple, margin, settle)
        traj = evolve_closed(EvolutionProblem(
            model=model, schedule=schedule, initial=initial, goal=goal,
            diabatic=basis, config=config))
        candidates.append(Candidate(
            actions=leaf.actions, protocol=protocol, schedule=schedule,
            fidelity=traj.points[-1].fidelity,
            total_time=schedule.total_duration,
            n_swaps=sum(1 for a in leaf.actions if a == "S")))
    candidates.sort(key=lambda c: (-c.fidelity, c.total_time, c.n_swaps, c.actions))
    return candidates, len(leaves)


def path_search(model: Model, crossings: list[AvoidedCrossing],
                basis: DiabaticBasis, start_label: int, goal_label: int,
                max_steps: int = 4, threshold: float = 0.95,
                multiple: float = 400.0, margin: float = 10.0,
                settle: float = 1e-6,
                config: IntegratorConfig | None = None) -> SearchResult:
    """Best protocol joining two diabatic labels, by exhaustive enumeration."""
    if max_steps > 6:
        raise ValueError(f"max_steps must be <= 6, got {max_steps}")
    if start_label == goal_label:
        lambda0 = default_lambda0(crossings)
        empty = ProtocolSpec(start_label=start_label, goal_label=goal_label,
                             steps=(), lambda_start=-lambda0, lambda_end=-lambda0)
        return SearchResult(protocol=empty, closed_fidelity=1.0,
                            total_time=0.0, explored=0)
    candidates, explored = enumerate_candidates(
        model, crossings, basis, start_label, goal_label, max_steps,
        multiple=multiple, margin=margin, settle=settle, config=config)
    if not candidates or candidates[0].fidelity < threshold:
        best = candidates[0].fidelity if candidates else None
        raise NoPathFound(
            f"no candidate reaches fidelity {threshold} "
            f"(best: {best if best is not None else 'none evolved'})")
    top = candidates[0]
    return SearchResult(protocol=top.protocol, closed_fidelity=top.fidelity,
                        total_time=top.total_time, explored=explored)
