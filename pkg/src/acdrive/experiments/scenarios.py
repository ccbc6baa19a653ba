"""Scenario runners behind the CLI.

Each runner builds its models and schedules from a resolved RunSpec,
evolves, and emits CSV files plus a plain-text report of every resolved
parameter (defaults marked) and the run's invariant diagnostics. Reports
and CSVs contain no timestamps or environment state: repeated runs of
the same config are byte-identical.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..control import (
    Adiabatic,
    ControlSchedule,
    Diabatic,
    ProtocolSpec,
    Swap,
    compile_protocol,
    default_lambda0,
    mt_report,
    ramp,
    serialize_schedule,
)
from ..dynamics import (
    EvolutionProblem,
    IntegratorConfig,
    Trajectory,
    evolve_closed,
    evolve_open,
    sweep_gamma,
)
from ..errors import NoPathFound
from ..linalg import hermitian_eigen
from ..models import (
    LZParams,
    TwoSpinParams,
    crossing_participants,
    critical_velocity,
    dephasing_bath,
    diabatic_basis,
    find_avoided_crossings,
    lz_model,
    lz_probability,
    scan_spectrum,
    spin_a_bath,
    two_spin_model,
)
from .config import RunSpec
from .csvio import (
    gamma_table_csv_text,
    spectrum_csv_text,
    trajectory_csv_text,
    write_text,
)
from .search import enumerate_candidates


def _param_lines(spec: RunSpec) -> list[str]:
    lines = [f"scenario = {spec.scenario}"]
    defaults = set(spec.defaults_applied)
    for sec, table in spec.sections.items():
        for key, value in table.items():
            mark = "  (default)" if f"{sec}.{key}" in defaults else ""
            lines.append(f"{sec}.{key} = {value!r}{mark}")
    return lines


def _diag_lines(tag: str, traj: Trajectory) -> list[str]:
    meta = traj.meta
    last = traj.points[-1]
    lines = [
        f"{tag}final_fidelity = {last.fidelity!r}",
        f"{tag}final_purity = {last.purity!r}",
        f"{tag}total_time = {last.t!r}",
    ]
    if meta.get("open", False):
        lines += [
            f"{tag}max_trace_error = {meta['max_trace_error']!r}",
            f"{tag}max_herm_correction = {meta['max_herm_correction']!r}",
            f"{tag}min_eigenvalue = {meta['min_eigenvalue']!r}",
            f"{tag}positivity_warnings = {meta['positivity_warnings']}",
        ]
    else:
        lines.append(f"{tag}max_norm_drift = {meta['max_norm_drift']!r}")
    return lines


def _chunked_sweep(lam_from: float, lam_to: float, speed: float,
                   chunks: int = 64) -> ControlSchedule:
    """Split one long ramp so the integrator can adapt dt to local ||H||."""
    edges = np.linspace(lam_from, lam_to, chunks + 1)
    return ControlSchedule(tuple(
        ramp(float(a), float(b), speed) for a, b in zip(edges[:-1], edges[1:])))


def _integrator(spec: RunSpec) -> IntegratorConfig:
    table = spec.sections["integrator"]
    return IntegratorConfig(dt_max=table["dt_max"], eta=table["eta"],
                            sample_stride=table["sample_stride"])


# ---------------------------------------------------------------- scenarios

def _run_spectrum(spec: RunSpec, out: Path, prefix: str, written: list[Path]):
    m = spec.sections["model"]
    model = two_spin_model(TwoSpinParams(delta_a=m["delta_a"],
                                         delta_b=m["delta_b"],
                                         coupling=m["coupling"]))
    scan = scan_spectrum(model, -m["lambda0"], m["lambda0"], m["samples"])
    crossings = find_avoided_crossings(model, -m["lambda0"], m["lambda0"],
                                       m["samples"])
    written.append(write_text(out / f"{prefix}.csv", spectrum_csv_text(scan)))
    lines = _param_lines(spec) + [""]
    lines.append(f"crossings = {len(crossings)}")
    for i, ac in enumerate(crossings, start=1):
        lines.append(f"crossing.{i}.lambda_star = {ac.lambda_star!r}")
        lines.append(f"crossing.{i}.gap = {ac.gap!r}")
        lines.append(f"crossing.{i}.lower_level = {ac.lower_level}")
        lines.append(f"crossing.{i}.slopes = {ac.slopes[0]!r}, {ac.slopes[1]!r}")
    lines += ["", "final_fidelity = none", "total_time = none"]
    return lines


def _run_lz_check(spec: RunSpec, out: Path, prefix: str, written: list[Path]):
    m = spec.sections["model"]
    params = LZParams(alpha=m["alpha"], delta=m["delta"])
    model = lz_model(params)
    lam0 = m["lambda0"]
    crossings = find_avoided_crossings(model, -lam0, lam0)
    basis = diabatic_basis(model, crossings, -lam0)
    start = hermitian_eigen(model.hamiltonian(-lam0)).vectors[:, 0]
    goal = hermitian_eigen(model.hamiltonian(lam0)).vectors[:, 0]
    vc = critical_velocity(params)
    config = _integrator(spec)
    lines = _param_lines(spec) + ["", f"critical_velocity = {vc!r}"]
    for mult in spec.sections["schedule"]["v_multiples"]:
        v = mult * vc
        schedule = _chunked_sweep(-lam0, lam0, v)
        traj = evolve_closed(EvolutionProblem(
            model=model, schedule=schedule, initial=start, goal=goal,
            diabatic=basis, tau_scale=params.delta, config=config))
        written.append(write_text(out / f"{prefix}_v{mult!r}.csv",
                                  trajectory_csv_text(traj)))
        measured = traj.points[-1].fidelity
        predicted = lz_probability(v, params)
        lines += [
            f"lz.v{mult!r}.velocity = {v!r}",
            f"lz.v{mult!r}.measured_p1 = {measured!r}",
            f"lz.v{mult!r}.predicted_p1 = {predicted!r}",
            f"lz.v{mult!r}.abs_error = {abs(measured - predicted)!r}",
        ]
        lines += _diag_lines(f"lz.v{mult!r}.", traj)
    return lines


def _run_two_level_ss(spec: RunSpec, out: Path, prefix: str, written: list[Path]):
    m = spec.sections["model"]
    params = LZParams(alpha=m["alpha"], delta=m["delta"])
    model = lz_model(params)
    lam0 = m["lambda0"]
    sched_par = spec.sections["schedule"]
    crossings = find_avoided_crossings(model, -lam0, lam0)
    basis = diabatic_basis(model, crossings, -lam0)
    protocol = ProtocolSpec(
        start_label=1, goal_label=2,
        steps=(Swap(crossing=crossings[0], fraction=sched_par["swap_fraction"]),),
        lambda_start=lam0, lambda_end=lam0)
    schedule = compile_protocol(protocol, settle=sched_par["settle"])
    config = _integrator(spec)
    initial = np.array([1.0, 0.0], dtype=complex)
    goal = np.array([0.0, 1.0], dtype=complex)
    closed = evolve_closed(EvolutionProblem(
        model=model, schedule=schedule, initial=initial, goal=goal,
        diabatic=basis, tau_scale=params.delta, config=config))
    written.append(write_text(out / f"{prefix}_closed.csv",
                              trajectory_csv_text(closed)))
    # fidelity exactly when the central hold ends
    bounds = schedule.boundaries()
    hold_end = bounds[3]
    at_end = [p for p in closed.points if p.t == hold_end][0]
    lines = _param_lines(spec) + [""]
    lines.append(f"switch_hold_duration = {schedule.segments[2].duration!r}")
    lines.append(f"fidelity_at_switch_end = {at_end.fidelity!r}")
    for i, hb in enumerate(mt_report(closed), start=1):
        lines += [
            f"mt.hold{i}.duration = {hb.duration!r}",
            f"mt.hold{i}.bound = {hb.bound!r}",
            f"mt.hold{i}.slack = {hb.slack!r}",
        ]
    lines += _diag_lines("closed.", closed)
    temperature = spec.sections["bath"]["temperature"]
    for g in spec.sections["bath"]["gamma_list"]:
        bath = dephasing_bath(g, temperature, params.delta)
        open_model = lz_model(params, bath)
        rho0 = np.outer(initial, initial.conj())
        traj = evolve_open(EvolutionProblem(
            model=open_model, schedule=schedule, initial=rho0, goal=goal,
            diabatic=basis, tau_scale=params.delta, config=config))
        written.append(write_text(out / f"{prefix}_open_g{g!r}.csv",
                                  trajectory_csv_text(traj)))
        lines += _diag_lines(f"open.g{g!r}.", traj)
    return lines


def _run_two_level_adiabatic(spec: RunSpec, out: Path, prefix: str,
                             written: list[Path]):
    m = spec.sections["model"]
    params = LZParams(alpha=m["alpha"], delta=m["delta"])
    lam0 = m["lambda0"]
    g = spec.sections["bath"]["gamma0"]
    bath = dephasing_bath(g, spec.sections["bath"]["temperature"], params.delta)
    model = lz_model(params, bath)
    crossings = find_avoided_crossings(model, -lam0, lam0)
    basis = diabatic_basis(model, crossings, -lam0)
    v = spec.sections["schedule"]["fraction"] * critical_velocity(params)
    schedule = _chunked_sweep(-lam0, lam0, v)
    rho0 = np.zeros((2, 2), dtype=complex)
    rho0[0, 0] = 1.0
    goal = np.array([0.0, 1.0], dtype=complex)
    traj = evolve_open(EvolutionProblem(
        model=model, schedule=schedule, initial=rho0, goal=goal,
        diabatic=basis, tau_scale=params.delta, config=_integrator(spec)))
    written.append(write_text(out / f"{prefix}.csv", trajectory_csv_text(traj)))
    lines = _param_lines(spec) + ["", f"sweep_velocity = {v!r}"]
    lines += _diag_lines("open.", traj)
    return lines


def _four_level_setup(spec: RunSpec):
    m = spec.sections["model"]
    params = TwoSpinParams(delta_a=m["delta_a"], delta_b=m["delta_b"],
                           coupling=m["coupling"])
    model = two_spin_model(params)
    # scan out to twice the outermost diabatic line intersection
    reach = 2.0 * (math.hypot(params.delta_a, params.coupling)
                   + params.delta_b) / params.delta_a
    crossings = find_avoided_crossings(model, -reach, reach)
    outermost = max(abs(ac.lambda_star) for ac in crossings)
    basis = diabatic_basis(model, crossings, -3.0 * outermost)
    return params, model, crossings, basis


def _other(pair: tuple[int, int], label: int) -> int:
    return pair[1] if label == pair[0] else pair[0]


def _paper_path_steps(model, crossings, basis, start_label: int,
                      multiple: float, swap_fraction: float,
                      adiabatic_fraction: float | None = None):
    """The reference route: sweep through the first crossing on the start
    line, transfer at the far side crossing, sweep back, transfer at the
    remaining central crossing. Swap transfers become slow crossings when
    adiabatic_fraction is given."""
    parts = {i: crossing_participants(model, basis, ac)
             for i, ac in enumerate(crossings)}
    centrals = [i for i, ac in enumerate(crossings)
                if abs(ac.lambda_star) < 0.5 * max(abs(a.lambda_star)
                                                   for a in crossings)]
    sides = [i for i in range(len(crossings)) if i not in centrals]
    first = [i for i in centrals if start_label in parts[i]][0]
    far = [i for i in sides if crossings[i].lambda_star > 0
           and start_label in parts[i]][0]
    after_far = _other(parts[far], start_label)
    second = [i for i in centrals if after_far in parts[i]][0]
    goal_label = _other(parts[second], after_far)

    def transfer(i):
        if adiabatic_fraction is None:
            return Swap(crossing=crossings[i], fraction=swap_fraction)
        return Adiabatic(crossing=crossings[i], fraction=adiabatic_fraction)

    steps = (Diabatic(crossing=crossings[first], multiple=multiple),
             transfer(far),
             Diabatic(crossing=crossings[far], multiple=multiple),
             transfer(second))
    return steps, goal_label


def _run_four_level(spec: RunSpec, out: Path, prefix: str, written: list[Path]):
    params, model, crossings, basis = _four_level_setup(spec)
    sched_par = spec.sections["schedule"]
    steps, goal_label = _paper_path_steps(
        model, crossings, basis, 1,
        sched_par["multiple"], sched_par["swap_fraction"])
    lam0 = default_lambda0(crossings)
    protocol = ProtocolSpec(start_label=1, goal_label=goal_label, steps=steps,
                            lambda_start=-lam0, lambda_end=-lam0)
    schedule = compile_protocol(protocol, margin=sched_par["margin"],
                                settle=sched_par["settle"])
    written.append(write_text(out / f"{prefix}_schedule.txt",
                              serialize_schedule(schedule)))
    config = _integrator(spec)
    delta_ref = spec.sections["model"]["delta_ref"]
    initial = basis.state(1)
    goal = basis.state(goal_label)
    closed = evolve_closed(EvolutionProblem(
        model=model, schedule=schedule, initial=initial, goal=goal,
        diabatic=basis, tau_scale=delta_ref, config=config))
    written.append(write_text(out / f"{prefix}_closed.csv",
                              trajectory_csv_text(closed)))
    b = spec.sections["bath"]
    bath = spin_a_bath(b["gamma0"], b["temperature"], params.delta_a)
    open_model = two_spin_model(params, bath)
    rho0 = np.outer(initial, initial.conj())
    opened = evolve_open(EvolutionProblem(
        model=open_model, schedule=schedule, initial=rho0, goal=goal,
        diabatic=basis, tau_scale=delta_ref, config=config))
    written.append(write_text(out / f"{prefix}_open.csv",
                              trajectory_csv_text(opened)))
    lines = _param_lines(spec) + [""]
    lines.append(f"goal_label = {goal_label}")
    lines.append(f"lambda0 = {lam0!r}")
    lines.append(f"total_time = {schedule.total_duration!r}")
    lines.append(f"total_tau = {schedule.total_duration * delta_ref!r}")
    lines += _diag_lines("closed.", closed)
    lines += _diag_lines("open.", opened)
    return lines


def _run_gamma_sweep(spec: RunSpec, out: Path, prefix: str, written: list[Path]):
    params, model, crossings, basis = _four_level_setup(spec)
    sched_par = spec.sections["schedule"]
    lam0 = default_lambda0(crossings)
    config = _integrator(spec)
    b = spec.sections["bath"]
    variants = []
    for method, adiabatic_fraction in (("S-D", None), ("A-D", sched_par["fraction"])):
        steps, goal_label = _paper_path_steps(
            model, crossings, basis, 1, sched_par["multiple"],
            sched_par["swap_fraction"], adiabatic_fraction)
        protocol = ProtocolSpec(start_label=1, goal_label=goal_label,
                                steps=steps, lambda_start=-lam0,
                                lambda_end=-lam0)
        schedule = compile_protocol(protocol, margin=sched_par["margin"],
                                    settle=sched_par["settle"])
        variants.append((method, goal_label, schedule))
    initial = basis.state(1)
    rho0 = np.outer(initial, initial.conj())
    lines = _param_lines(spec) + [""]
    rows = []
    for method, goal_label, schedule in variants:
        goal = basis.state(goal_label)

        def make_problem(g: float, _sched=schedule, _goal=goal):
            bath = spin_a_bath(g, b["temperature"], params.delta_a)
            return EvolutionProblem(
                model=two_spin_model(params, bath), schedule=_sched,
                initial=rho0, goal=_goal, diabatic=basis,
                tau_scale=spec.sections["model"]["delta_ref"], config=config)

        lines.append(f"sweep.{method}.total_time = {schedule.total_duration!r}")
        for row in sweep_gamma(make_problem, b["gamma_list"]):
            if row["error"] is not None:
                lines.append(f"sweep.{method}.g{row['gamma0']!r}.error = {row['error']}")
                continue
            lines.append(
                f"sweep.{method}.g{row['gamma0']!r}.final_fidelity = {row['fidelity']!r}")
            rows.append((row["gamma0"], method, row["fidelity"]))
    written.append(write_text(out / f"{prefix}.csv", gamma_table_csv_text(rows)))
    return lines


def _run_path_search(spec: RunSpec, out: Path, prefix: str, written: list[Path]):
    _, model, crossings, basis = _four_level_setup(spec)
    sched_par = spec.sections["schedule"]
    config = _integrator(spec)
    start = sched_par["start_label"]
    goal_label = sched_par["goal_label"]
    lines = _param_lines(spec) + [""]
    if start == goal_label:
        lines += ["explored = 0", "winner.actions = (empty)",
                  "winner.closed_fidelity = 1.0", "winner.total_time = 0.0"]
        return lines
    candidates, explored = enumerate_candidates(
        model, crossings, basis, start, goal_label,
        max_steps=sched_par["max_steps"], multiple=sched_par["multiple"],
        margin=sched_par["margin"], settle=sched_par["settle"], config=config)
    lines.append(f"explored = {explored}")
    lines.append(f"evolved = {len(candidates)}")
    for i, c in enumerate(candidates, start=1):
        lines += [
            f"candidate.{i}.actions = {'-'.join(c.actions)}",
            f"candidate.{i}.fidelity = {c.fidelity!r}",
            f"candidate.{i}.total_time = {c.total_time!r}",
            f"candidate.{i}.swaps = {c.n_swaps}",
        ]
        for j, step in enumerate(c.protocol.steps, start=1):
            if isinstance(step, Swap):
                hold = step.fraction * math.pi / step.crossing.gap
                lines.append(
                    f"candidate.{i}.step{j}.hold = {hold!r}")
    threshold = sched_par["threshold"]
    if not candidates or candidates[0].fidelity < threshold:
        raise NoPathFound(
            f"no candidate reaches fidelity {threshold} "
            f"(best: {candidates[0].fidelity if candidates else 'none evolved'})")
    top = candidates[0]
    lines += [
        f"winner.actions = {'-'.join(top.actions)}",
        f"winner.closed_fidelity = {top.fidelity!r}",
        f"winner.total_time = {top.total_time!r}",
        f"winner.swaps = {top.n_swaps}",
    ]
    written.append(write_text(out / f"{prefix}_schedule.txt",
                              serialize_schedule(top.schedule)))
    traj = evolve_closed(EvolutionProblem(
        model=model, schedule=top.schedule, initial=basis.state(start),
        goal=basis.state(goal_label), diabatic=basis,
        tau_scale=spec.sections["model"]["delta_ref"], config=config))
    written.append(write_text(out / f"{prefix}_winner.csv",
                              trajectory_csv_text(traj)))
    lines += _diag_lines("winner.", traj)
    return lines


_RUNNERS = {
    "spectrum": _run_spectrum,
    "lz-check": _run_lz_check,
    "two-level-ss": _run_two_level_ss,
    "two-level-adiabatic": _run_two_level_adiabatic,
    "four-level": _run_four_level,
    "gamma-sweep": _run_gamma_sweep,
    "path-search": _run_path_search,
}


def _gnuplot_text(prefix: str, csvs: list[Path]) -> str:
    lines = ["set datafile separator ','", "set key autotitle columnhead",
             "set xlabel 'tau'", "set ylabel 'fidelity'"]
    for p in csvs:
        lines.append(f"plot '{p.name}' using 2:4 with lines")
        lines.append("pause -1")
    return "\n".join(lines) + "\n"


def run(spec: RunSpec, out_dir) -> list[Path]:
    """Execute a scenario; returns the written files. Partial outputs are
    removed if anything fails."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = spec.sections["output"]["prefix"]
    written: list[Path] = []
    try:
        lines = _RUNNERS[spec.scenario](spec, out, prefix, written)
        if spec.sections["output"]["gnuplot"]:
            csvs = [p for p in written if p.suffix == ".csv"]
            written.append(write_text(out / f"{prefix}.gp",
                                      _gnuplot_text(prefix, csvs)))
        written.append(write_text(out / f"{prefix}_report.txt",
                                  "\n".join(lines) + "\n"))
    except Exception:
        for p in written:
            try:
                p.unlink()
            except OSError:
                pass
        raise
    return written
