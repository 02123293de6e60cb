"""
Experiment dispatch: one handler per command, each turning a validated
configuration into a ResultDocument plus optional CSV series.
"""
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from services.curve import (
    curve_full_green,
    curve_phi,
    diagonal_evaluation,
    find_bound_states_curve,
    wavefunction_norm_2d,
)
from services.experiment_config import ExperimentConfig, build_perturbation, build_problem
from services.greens import green0, spectral_jump
from services.krein import (
    PointPerturbation,
    find_bound_states,
    full_green,
    generalized_eigenfunction,
    phi,
    verify_interlacing,
    verify_pole_cancellation,
)
from services.multicenter import (
    CenterSet,
    find_bound_states_multicenter,
    full_green_multicenter,
    generalized_eigenfunction_multicenter,
    phi_matrix,
    recursive_spectrum,
    spectrum_report,
)
from services.perturb import (
    energy_corrections,
    energy_corrections_renormalized,
    energy_residuals,
    order_scaling,
    textbook_energy_corrections,
    wavefunction_residual,
)
from services.renorm import (
    RenormalizedPerturbation,
    coupling_flow,
    find_bound_states_renormalized,
    full_green_renormalized,
    phi_renormalized,
    spectra_match,
    verify_interlacing_renormalized,
    verify_pole_cancellation_renormalized,
)
from services.result_writer import ResultDocument, RunRecorder, series_frame
from services.spectral_core import BaseProblem
from utils.exceptions import ConfigError, PoleProximity, SpectralError
from utils.logger import bind_run_context, get_logger

logger = get_logger(__name__)

Handler = Callable[[ExperimentConfig, BaseProblem, RunRecorder], ResultDocument]


def _require(config: ExperimentConfig, kinds: Tuple[str, ...]):
    spec = config.perturbation
    if spec is None or spec.kind not in kinds:
        raise ConfigError(f"'{config.experiment.command}' needs a perturbation of kind {' or '.join(kinds)}",
                          {"given": None if spec is None else spec.kind})


def _require_value(name: str, value):
    if value is None:
        raise ConfigError(f"solver.{name} is required for this experiment", {"key": f"solver.{name}"})
    return value


def _document(config: ExperimentConfig, states=(), **sections) -> ResultDocument:
    return ResultDocument(command=config.experiment.command, config=config.echo(),
                          states=[s.to_record() for s in states], **sections)


def _x_grid(config: ExperimentConfig) -> np.ndarray:
    solver = config.solver
    return np.linspace(solver.x_min, solver.x_max, solver.x_count)


def _profile(config: ExperimentConfig, recorder: RunRecorder, states):
    """(x, |psi_i(x)|^2) profile for one-dimensional states."""
    if not (config.output.profile and config.output.csv) or not states:
        return
    grid = _x_grid(config)
    columns = ["x"] + [f"psi2_{s.index}" for s in states]
    rows = [[x] + [abs(s.wavefunction(x)) ** 2 for s in states] for x in grid]
    recorder.add_series("profile", series_frame(columns, rows))


def _window(config: ExperimentConfig, problem: BaseProblem):
    """Configured window; purely discrete problems default to everything up to the lowest level."""
    window = config.solver.window
    if window is not None and window[1] is not None:
        return window
    if np.isfinite(problem.infimum):
        return window
    top = float(problem.discrete_energies(1)[0])
    logger.info("window_defaulted", Emax=top)
    return (window[0] if window else -np.inf, top)


def _max_residual(states) -> float:
    return max((s.residual for s in states), default=0.0)


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------

def run_spectrum(config: ExperimentConfig, problem: BaseProblem, recorder: RunRecorder) -> ResultDocument:
    _require(config, ("point",))
    pert = build_perturbation(config.perturbation, problem)
    tol = config.solver.tolerance
    states = find_bound_states(problem, pert, _window(config, problem), tol)
    extra = {}
    if config.solver.depth:
        rows = verify_interlacing(problem, pert, config.solver.depth, tol)
        extra["interlacing"] = rows
        extra["interlacing_holds"] = all(r["holds"] for r in rows)
    _profile(config, recorder, states)
    return _document(config, states, residuals={"max_phi": _max_residual(states)}, extra=extra)


def _kernel_for(config: ExperimentConfig, problem: BaseProblem, tol: float):
    """Perturbed kernel G(x, y | E) for whichever perturbation is configured."""
    target = build_perturbation(config.perturbation, problem)
    if isinstance(target, PointPerturbation):
        return lambda x, y, e: full_green(problem, target, x, y, e, tol)
    if isinstance(target, RenormalizedPerturbation):
        return lambda x, y, e: full_green_renormalized(problem, target, x, y, e, tol)
    if isinstance(target, CenterSet):
        return lambda x, y, e: full_green_multicenter(problem, target, x, y, e, tol)
    curve, alpha = target
    return lambda x, y, e: curve_full_green(problem, curve, alpha, x, y, e, tol)


def run_green(config: ExperimentConfig, problem: BaseProblem, recorder: RunRecorder) -> ResultDocument:
    solver = config.solver
    tol = solver.tolerance
    x = problem.point(_require_value("x", solver.x))
    y = problem.point(_require_value("y", solver.y))
    energy = _require_value("energy", solver.energy)
    extra, residuals = {}, {}

    if energy >= problem.infimum:
        # on the continuum: compare the jump across the cut with the channel density
        eps = solver.epsilon
        jump = green0(problem, x, y, energy + 1j * eps, tol).value - green0(problem, x, y, energy - 1j * eps, tol).value
        expected = spectral_jump(problem, x, y, energy)
        extra.update(jump=complex(jump), expected=complex(expected), epsilon=eps)
        residuals["jump"] = float(abs(jump - expected))
    else:
        bare = green0(problem, x, y, energy, tol, method=solver.method)
        extra.update(G0=bare.value, method=bare.method, truncation_index=bare.truncation_index,
                     quadrature_error=bare.quadrature_error)
        if config.perturbation is not None:
            extra["G"] = _kernel_for(config, problem, tol)(x, y, energy)

    if solver.probe_level is not None:
        _require(config, ("point", "renormalized"))
        target = build_perturbation(config.perturbation, problem)
        exponents = [int(j) for j in solver.exponents]
        if isinstance(target, PointPerturbation):
            probe = verify_pole_cancellation(problem, target, x, y, solver.probe_level, exponents, tol)
        else:
            probe = verify_pole_cancellation_renormalized(problem, target, x, y, solver.probe_level, exponents, tol)
        extra["pole_probe"] = probe
        residuals.update(variation=probe["variation"], bare_growth=probe["bare_growth"])
        if config.output.csv:
            rows = list(zip(probe["energies"], probe["full"], probe["bare"]))
            recorder.add_series("pole_probe", series_frame(["E", "abs_G", "abs_G0"], rows))
    return _document(config, residuals=residuals, extra=extra)


def run_perturb(config: ExperimentConfig, problem: BaseProblem, recorder: RunRecorder) -> ResultDocument:
    _require(config, ("point", "renormalized"))
    solver = config.solver
    tol = solver.tolerance
    target = build_perturbation(config.perturbation, problem)
    extra, residuals = {}, {}

    if isinstance(target, RenormalizedPerturbation):
        result = energy_corrections_renormalized(problem, target, solver.level, tol)
        regular = energy_corrections(problem, PointPerturbation(target.support, target.alpha_r), solver.level, tol)
        extra["regular"] = regular.to_record()
        residuals.update(e1_difference=abs(result.e1 - regular.e1), e2_difference=abs(result.e2 - regular.e2))
    else:
        result = energy_corrections(problem, target, solver.level, tol)
        if problem.dimension == 1:
            textbook = textbook_energy_corrections(problem, target, solver.level, tol)
            residuals["textbook_e2"] = abs(result.e2 - textbook[1])
        if solver.scan_alphas:
            alphas = list(solver.scan_alphas)
            energy = energy_residuals(problem, target.support, solver.level, alphas, tol)
            grid = _x_grid(config)
            wave = [wavefunction_residual(problem, PointPerturbation(target.support, a), solver.level, grid, tol)
                    for a in alphas]
            residuals.update(energy_slope=order_scaling(alphas, energy), wavefunction_slope=order_scaling(alphas, wave))
            extra["scan"] = {"alphas": alphas, "energy_residuals": energy, "wavefunction_residuals": wave}
            if config.output.csv:
                recorder.add_series("scaling", series_frame(["alpha", "energy_residual", "wavefunction_residual"],
                                                            list(zip(alphas, energy, wave))))
    extra["corrections"] = result.to_record()
    return _document(config, residuals=residuals, extra=extra)


def run_scatter(config: ExperimentConfig, problem: BaseProblem, recorder: RunRecorder) -> ResultDocument:
    _require(config, ("point", "centers"))
    tol = config.solver.tolerance
    target = build_perturbation(config.perturbation, problem)
    k_values = config.solver.k_values or list(np.linspace(0.25, 5.0, 20))
    rows = []
    for k in k_values:
        if isinstance(target, CenterSet):
            state = generalized_eigenfunction_multicenter(problem, target, k, tol=tol)
        else:
            state = generalized_eigenfunction(problem, target, k, tol=tol)
        r2, t2 = abs(state.reflection) ** 2, abs(state.transmission) ** 2
        rows.append((k, r2, t2))
    unitarity = max(abs(r + t - 1.0) for _, r, t in rows)
    if config.output.csv:
        recorder.add_series("scattering", series_frame(["k", "R2", "T2"], rows))
    extra = {"k": [r[0] for r in rows], "R2": [r[1] for r in rows], "T2": [r[2] for r in rows]}
    return _document(config, residuals={"unitarity": unitarity}, extra=extra)


def run_renorm(config: ExperimentConfig, problem: BaseProblem, recorder: RunRecorder) -> ResultDocument:
    _require(config, ("renormalized",))
    tol = config.solver.tolerance
    rpert = build_perturbation(config.perturbation, problem)
    window = _window(config, problem)
    states = find_bound_states_renormalized(problem, rpert, window, tol)
    extra, residuals = {}, {"max_phi": _max_residual(states)}

    mu2_to = config.perturbation.mu2_to
    if mu2_to is not None:
        inv = coupling_flow(problem, rpert.support, rpert.inv_alpha_r, rpert.mu2, mu2_to, tol)
        flowed = find_bound_states_renormalized(problem, RenormalizedPerturbation(rpert.support, inv, mu2_to), window, tol)
        shifts = [abs(a.energy - b.energy) for a, b in zip(states, flowed)]
        extra["flow"] = {"mu2_to": mu2_to, "inv_alpha_r": inv, "energies": [s.energy for s in flowed]}
        residuals["flow_shift"] = max(shifts, default=0.0)
        residuals["flow_match"] = spectra_match(states, flowed, max(1e-8, 100 * tol))
    if config.solver.depth:
        rows = verify_interlacing_renormalized(problem, rpert, config.solver.depth, tol)
        extra["interlacing"] = rows
        extra["interlacing_holds"] = all(r["holds"] for r in rows)
    _profile(config, recorder, states if problem.dimension == 1 else [])
    return _document(config, states, residuals=residuals, extra=extra)


def run_multicenter(config: ExperimentConfig, problem: BaseProblem, recorder: RunRecorder) -> ResultDocument:
    _require(config, ("centers",))
    tol = config.solver.tolerance
    centers = build_perturbation(config.perturbation, problem)
    states = find_bound_states_multicenter(problem, centers, _window(config, problem), tol)
    oracle = recursive_spectrum(problem, centers, _window(config, problem), tol)
    report = spectrum_report(states, oracle, max(1e-8, 100 * tol))
    residuals = {
        "recursive_match": report["match"],
        "recursive_shift": max((abs(a - b) for a, b in zip(report["direct"], report["recursive"])), default=0.0),
    }
    _profile(config, recorder, states)
    return _document(config, states, residuals=residuals, extra={"recursive": report["recursive"]})


def run_curve(config: ExperimentConfig, problem: BaseProblem, recorder: RunRecorder) -> ResultDocument:
    _require(config, ("curve",))
    tol = config.solver.tolerance
    curve, alpha = build_perturbation(config.perturbation, problem)
    states = find_bound_states_curve(problem, curve, alpha, config.solver.window, tol)
    state = states[0]
    diagonal = diagonal_evaluation(problem, curve, state.energy, tol)
    extra = {"curve": curve.to_record(), "diagonal": diagonal.value, "diagonal_error": diagonal.error}
    residuals = {"max_phi": _max_residual(states), "arclength_defect": curve.arclength_defect()}

    if config.solver.refine:
        refined = find_bound_states_curve(problem, curve.with_order(2 * curve.order), alpha,
                                          config.solver.window, tol)[0]
        residuals["order_doubling_shift"] = abs(refined.energy - state.energy)
    if config.solver.norm_check:
        kappa = float(np.sqrt(-state.energy / problem.units.kinetic))
        residuals["norm"] = wavefunction_norm_2d(state.wavefunction, curve, kappa)
    if config.output.profile and config.output.csv:
        grid = _x_grid(config)
        points = np.column_stack([curve.center[0] + grid, np.full(grid.size, curve.center[1])])
        density = np.abs(state.wavefunction(points)) ** 2
        recorder.add_series("profile", series_frame(["x", "y", "psi2"], np.column_stack([points, density])))
    return _document(config, states, residuals=residuals, extra=extra)


# ---------------------------------------------------------------------------
# Secular curves
# ---------------------------------------------------------------------------

def _secular_function(config: ExperimentConfig, problem: BaseProblem, tol: float) -> Tuple[str, Callable]:
    target = build_perturbation(config.perturbation, problem)
    if isinstance(target, PointPerturbation):
        return "phi", lambda e: phi(problem, target, e, tol)
    if isinstance(target, RenormalizedPerturbation):
        return "phi", lambda e: phi_renormalized(problem, target, e, tol)
    if isinstance(target, CenterSet):
        return "det_phi", lambda e: float(np.linalg.det(phi_matrix(problem, target, e, tol).matrix.real))
    curve, alpha = target
    return "phi", lambda e: curve_phi(problem, curve, alpha, e, tol)


def _window_poles(problem: BaseProblem, lo: float, hi: float) -> List[float]:
    if problem.level_count == 0 or hi <= lo:
        return []
    return [g.energy for g in problem.distinct_levels(hi) if lo <= g.energy <= hi]


def emit_secular_curve(config: ExperimentConfig, problem: BaseProblem, recorder: RunRecorder) -> ResultDocument:
    """
    Sample Phi(E) (or det Phi) on a uniform grid and write (E, value) rows.

    Grid points inside a pole guard band are dropped and counted in the
    sidecar JSON together with the pole locations.
    """
    solver = config.solver
    if config.perturbation is None:
        raise ConfigError("secular curves need a perturbation section", {})
    lo = _require_value("emin", solver.emin)
    hi = _require_value("emax", solver.emax)
    tol = solver.tolerance
    column, func = _secular_function(config, problem, tol)

    grid = np.linspace(lo, hi, solver.samples) if hi > lo else np.array([])
    rows, dropped = [], []
    for energy in grid:
        try:
            rows.append((float(energy), float(np.real(func(float(energy))))))
        except PoleProximity:
            dropped.append(float(energy))
    poles = _window_poles(problem, lo, hi)

    changes = []
    for (e0, v0), (e1, v1) in zip(rows[:-1], rows[1:]):
        crosses_pole = any(e0 < p < e1 for p in poles)
        if v0 * v1 < 0 and not crosses_pole:
            changes.append([e0, e1])

    recorder.add_series("secular", series_frame(["E", column], rows))
    recorder.add_sidecar("secular_poles", {"poles": poles, "dropped": len(dropped), "dropped_energies": dropped})
    logger.info("secular_curve_sampled", rows=len(rows), dropped=len(dropped), sign_changes=len(changes))
    return _document(config, residuals={"dropped": len(dropped)},
                     extra={"poles": poles, "sign_changes": changes, "column": column})


HANDLERS: Dict[str, Handler] = {
    "spectrum": run_spectrum,
    "green": run_green,
    "perturb": run_perturb,
    "scatter": run_scatter,
    "renorm": run_renorm,
    "multicenter": run_multicenter,
    "curve": run_curve,
    "secular": emit_secular_curve,
}


def run_experiment(config: ExperimentConfig, output_dir: Optional[str] = None) -> Tuple[ResultDocument, str]:
    """
    Execute a validated experiment and write its artifacts.

    Args:
        config: Validated experiment configuration
        output_dir: Overrides output.directory and the environment default

    Returns:
        (result document, path of the JSON document)

    Raises:
        ConfigError: the configuration does not fit the command
        SpectralError: solver failure
    """
    command = config.experiment.command
    bind_run_context(experiment=config.experiment.name, command=command, problem=config.problem.label)
    recorder = RunRecorder(command, config.stem, output_dir or config.output.directory)
    recorder.start_timer()
    try:
        problem = build_problem(config.problem)
        if config.perturbation is not None:
            build_perturbation(config.perturbation, problem)
    except SpectralError as e:
        raise ConfigError(f"invalid configuration: {e.message}", e.context)
    logger.info("experiment_started", output_dir=recorder.output_dir)
    document = HANDLERS[command](config, problem, recorder)
    path = recorder.finish(document)
    logger.info("experiment_finished", wall_time_s=document.wall_time_s)
    return document, path
