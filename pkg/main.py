"""
Command-line entry point for deltaspec.

Every subcommand builds an experiment configuration, either from flags alone
or from an INI file (--config) with flags overriding file values, runs it and
writes a JSON result document (plus CSV series) to the output directory.

Exit codes: 0 success, 1 configuration error, 2 solver error. Errors are
printed to stdout as a JSON record; logs go to stderr.
"""
import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from config import Config
from services.experiment_config import load_experiment, subcommand_names, validate_experiment
from services.experiments import run_experiment
from services.result_writer import to_plain
from utils.constants import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_SOLVER_ERROR, TOOL_NAME, TOOL_VERSION
from utils.exceptions import ConfigError, SpectralError
from utils.logger import get_logger, setup_logging

logger = get_logger(__name__)

# flag dest -> config key
FLAG_KEYS = {
    "problem": "problem.label",
    "kappa": "problem.kappa",
    "omega": "problem.omega",
    "L1": "problem.L1",
    "L2": "problem.L2",
    "hbar": "problem.hbar",
    "mass": "problem.mass",
    "kind": "perturbation.kind",
    "alpha": "perturbation.alpha",
    "support": "perturbation.support",
    "inv_alpha_r": "perturbation.inv_alpha_r",
    "mu2": "perturbation.mu2",
    "mu2_to": "perturbation.mu2_to",
    "points": "perturbation.points",
    "alphas": "perturbation.alphas",
    "shape": "perturbation.shape",
    "center": "perturbation.center",
    "radius": "perturbation.radius",
    "a": "perturbation.a",
    "b": "perturbation.b",
    "vertices": "perturbation.vertices",
    "order": "perturbation.order",
    "emin": "solver.emin",
    "emax": "solver.emax",
    "tol": "solver.tol",
    "depth": "solver.depth",
    "level": "solver.level",
    "energy": "solver.energy",
    "probe_level": "solver.probe_level",
    "x": "solver.x",
    "y": "solver.y",
    "method": "solver.method",
    "k_values": "solver.k_values",
    "scan_alphas": "solver.scan_alphas",
    "samples": "solver.samples",
    "name": "output.name",
}

SWITCH_KEYS = {
    "refine": "solver.refine",
    "norm_check": "solver.norm_check",
    "profile": "output.profile",
    "no_csv": "output.csv",
}

# perturbation kind implied by a subcommand when no file or flag names one
IMPLIED_KINDS = {"renorm": "renormalized", "multicenter": "centers", "curve": "curve"}

HELP_TEXT = {
    "spectrum": "bound states of H0 - alpha delta_a",
    "green": "free and perturbed Green's functions at (x, y, E)",
    "perturb": "first and second order energy corrections",
    "scatter": "reflection and transmission over a k sweep",
    "renorm": "renormalized point interaction (two-dimensional problems)",
    "multicenter": "several point centers, checked against the recursive construction",
    "curve": "delta interaction on a curve in the plane (1/L arclength pairing)",
    "secular": "sample the secular function on an energy grid",
}


def _add_common(parser: argparse.ArgumentParser, with_config: bool = True):
    if with_config:
        parser.add_argument("--config", help="INI experiment file; flags override its values")
    parser.add_argument("--output-dir", dest="output_dir", help="Output directory (default: $SPECTRAL_OUTPUT_DIR)")
    parser.add_argument("--log-level", dest="log_level", help="Log level for stderr output")

    problem = parser.add_argument_group("problem")
    problem.add_argument("--problem", help="free-line, reflectionless, harmonic, torus or free-plane")
    problem.add_argument("--kappa", type=float, help="Reflectionless well parameter")
    problem.add_argument("--omega", type=float, help="Oscillator frequency")
    problem.add_argument("--L1", type=float, help="Torus side")
    problem.add_argument("--L2", type=float, help="Torus side")
    problem.add_argument("--hbar", type=float)
    problem.add_argument("--mass", type=float)

    pert = parser.add_argument_group("perturbation")
    pert.add_argument("--kind", help="point, renormalized, centers or curve")
    pert.add_argument("--alpha", type=float, help="Coupling; positive is attractive")
    pert.add_argument("--support", help="Support point, e.g. 1 or '0.5,0.5'")
    pert.add_argument("--inv-alpha-r", dest="inv_alpha_r", type=float, help="Renormalized inverse coupling")
    pert.add_argument("--mu2", type=float, help="Renormalization scale mu^2")
    pert.add_argument("--mu2-to", dest="mu2_to", type=float, help="Flow the coupling to this scale and compare")
    pert.add_argument("--points", help="Centers separated by ';', e.g. '-1; 1'")
    pert.add_argument("--alphas", help="Center couplings, e.g. '2, 2'")
    pert.add_argument("--shape", help="circle, ellipse or polyline")
    pert.add_argument("--center", help="Curve center, e.g. '0,0'")
    pert.add_argument("--radius", type=float)
    pert.add_argument("--a", type=float, help="Ellipse semi-axis along x")
    pert.add_argument("--b", type=float, help="Ellipse semi-axis along y")
    pert.add_argument("--vertices", help="Polyline vertices, e.g. '0,0; 1,0; 1,1'")
    pert.add_argument("--order", type=int, help="Curve quadrature order")

    solver = parser.add_argument_group("solver")
    solver.add_argument("--emin", type=float)
    solver.add_argument("--emax", type=float)
    solver.add_argument("--tol", type=float)
    solver.add_argument("--depth", type=int, help="Interlacing check depth")
    solver.add_argument("--level", type=int, help="Level index for perturbation theory")
    solver.add_argument("--energy", type=float)
    solver.add_argument("--probe-level", dest="probe_level", type=float,
                        help="Level energy for the pole cancellation probe")
    solver.add_argument("--x")
    solver.add_argument("--y")
    solver.add_argument("--method", help="closed-form, expansion or anchored")
    solver.add_argument("--k-values", dest="k_values", help="Channel parameters for scatter")
    solver.add_argument("--scan-alphas", dest="scan_alphas", help="Couplings for the order scaling check")
    solver.add_argument("--samples", type=int, help="Secular curve grid size")
    solver.add_argument("--refine", action="store_true", help="Repeat curve solves at doubled order")
    solver.add_argument("--norm-check", dest="norm_check", action="store_true", help="Integrate |psi|^2 for curves")

    output = parser.add_argument_group("output")
    output.add_argument("--name", help="Output file stem")
    output.add_argument("--profile", action="store_true", help="Write a |psi|^2 profile series")
    output.add_argument("--no-csv", dest="no_csv", action="store_true", help="Skip CSV series")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Spectra, Green's functions and eigenfunctions of operators with delta interactions.",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in subcommand_names():
        _add_common(sub.add_parser(name, help=HELP_TEXT[name], description=HELP_TEXT[name]))
    run = sub.add_parser("run", help="run a named experiment file")
    run.add_argument("path", help="INI experiment file; flags override its values")
    _add_common(run, with_config=False)
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted config overrides from the flags that were given."""
    overrides = {key: getattr(args, dest) for dest, key in FLAG_KEYS.items()
                 if getattr(args, dest, None) is not None}
    for dest, key in SWITCH_KEYS.items():
        if getattr(args, dest, False):
            overrides[key] = dest != "no_csv"
    return overrides


def build_config(args: argparse.Namespace):
    """Experiment configuration for a subcommand invocation."""
    overrides = collect_overrides(args)
    if args.command == "run":
        return load_experiment(args.path, overrides)
    overrides["experiment.command"] = args.command
    if args.command in IMPLIED_KINDS and "perturbation.kind" not in overrides:
        overrides["perturbation.kind"] = IMPLIED_KINDS[args.command]
    if args.config:
        return load_experiment(args.config, overrides)
    if "perturbation.mu2" in overrides and "perturbation.kind" not in overrides:
        overrides["perturbation.kind"] = "renormalized"
    has_perturbation = any(key.startswith("perturbation.") for key in overrides)
    raw: Dict[str, Dict[str, Any]] = {"experiment": {"name": args.command}}
    if has_perturbation:
        raw["perturbation"] = {}
    return validate_experiment(raw, overrides)


def _emit_error(error: SpectralError):
    print(json.dumps(error.to_record(), indent=2, default=str))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    invalid = Config.get_invalid_config()
    if invalid:
        error = ConfigError("invalid environment configuration", {"keys": invalid})
        logger.error("config_invalid", keys=invalid)
        _emit_error(error)
        return EXIT_CONFIG_ERROR

    try:
        config = build_config(args)
        document, path = run_experiment(config, args.output_dir)
    except ConfigError as e:
        logger.error("config_error", message=e.message)
        _emit_error(e)
        return EXIT_CONFIG_ERROR
    except SpectralError as e:
        logger.error("solver_error", code=e.code, message=e.message)
        _emit_error(e)
        return EXIT_SOLVER_ERROR

    summary = {"result": path, "states": document.states, "residuals": document.residuals}
    print(json.dumps(to_plain(summary), indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
