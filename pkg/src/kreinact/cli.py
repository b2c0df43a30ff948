"""Command-line interface: fixtures, runs, verification, sweeps, plot data.

One binary with subcommands; every output is a pure function of the
parsed configuration and seed (no timestamps or environment state), so
identical invocations produce byte-identical files.  Exit codes: 0 on
success, 2 on validation/input failures (including a failed verification
verdict), 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import tolerances
from .action import PositionGrid, QHatEvaluator
from .cfsbridge import correlations_to_csv, empirical_cfs, standard_basis
from .elverify import (
    check_first_order,
    el_residuals,
    lagrange_parameters,
    pushforward,
    report_to_csv,
    save_report,
)
from .errors import KreinactError, NumericalError, ValidationError
from .homomeasure import (
    MomentumBox,
    OperatorMeasure,
    decompose,
    dirac_sea_fixture,
    load_measure,
    load_operator,
    massless_fixture,
    random_measure,
    save_measure,
    save_operator,
)
from .krein import SignatureSpace
from .minimize import MinimizeConfig, config_from_dict, config_to_dict, minimize_action
from .pointwise import PointwiseProblem, a_of_alpha, beta_of_alpha, solve

__all__ = ["main", "build_parser"]


def _parse_counts(text: str, what: str) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 4:
        raise ValidationError(f"{what} requires four integers, got {text!r}")
    return tuple(int(p) for p in parts)


def _parse_box(text: str) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) == 1:
        r = float(parts[0])
        return (-r, -r, -r, -r), (r, r, r, r)
    if len(parts) == 8:
        vals = [float(p) for p in parts]
        return tuple(vals[:4]), tuple(vals[4:])
    raise ValidationError(
        f"box must be one radius or eight floats (lower then upper), got {text!r}"
    )


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _constant_field(path):
    """Q-hat evaluator reading one operator document: a momentum-constant field."""
    matrix, _space = load_operator(path)

    def evaluate(_p):
        return matrix

    return evaluate


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_fixture(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "dirac-sea":
        if args.mass <= 0:
            raise ValidationError("--mass must be positive")
        ks = args.spatial_radius * rng.standard_normal((args.atoms, 3))
        points = [
            (-float(np.hypot(np.linalg.norm(k), args.mass)), *k) for k in ks
        ]
        measure = dirac_sea_fixture(args.mass, points)
    elif args.kind == "nilpotent":
        ks = args.spatial_radius * rng.standard_normal((args.atoms, 3))
        norms = np.linalg.norm(ks, axis=1)
        ks = ks[norms > 1e-9]
        measure = massless_fixture(ks)
    elif args.kind == "random":
        lower, upper = _parse_box(args.box)
        box = MomentumBox(lower, upper, _parse_counts(args.grid, "--grid"))
        measure = random_measure(SignatureSpace(args.n), box, args.atoms, rng)
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError(f"unknown fixture kind {args.kind!r}")
    save_measure(measure, args.out)
    print(f"wrote {args.kind} fixture with {measure.n_atoms} atoms to {args.out}")
    return 0


def cmd_minimize(args) -> int:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    overrides = {
        "seed": args.seed,
        "c": args.c,
        "f": args.f,
        "smoothing_delta": args.smoothing_delta,
        "tol_el": args.tol_el,
    }
    for key, val in overrides.items():
        if val is not None:
            data[key] = val
    if args.grid is not None:
        data["momentum_shape"] = _parse_counts(args.grid, "--grid")
    if args.box is not None:
        lower, upper = _parse_box(args.box)
        data["box_lower"], data["box_upper"] = lower, upper
    if args.position_radius is not None:
        data["position_radius"] = args.position_radius
    if args.position_grid is not None:
        data["position_shape"] = _parse_counts(args.position_grid, "--position-grid")
    config = config_from_dict(data)

    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "config.json"), config_to_dict(config))
    result = minimize_action(config)

    with open(os.path.join(args.out, "iterations.csv"), "w", newline="") as fh:
        fh.write("iteration,action,trace,signed_trace,step,grad_norm,escapes\n")
        for row in result.trace:
            fh.write(
                f"{row['iteration']},{row['action']!r},{row['trace']!r},"
                f"{row['signed_trace']!r},{row['step']!r},{row['grad_norm']!r},"
                f"{row['escapes']}\n"
            )
    save_measure(result.measure, os.path.join(args.out, "measure.json"))
    save_report(result.report, os.path.join(args.out, "report.json"))
    report_to_csv(result.report, os.path.join(args.out, "report.csv"))
    checks = check_first_order(result.report, config.tol_el)
    summary = {
        "action": result.action_value,
        "alpha": result.alpha,
        "beta": result.beta,
        "case_tag": result.case_tag,
        "converged": result.converged,
        "checks": checks,
    }
    _write_json(os.path.join(args.out, "status.json"), summary)
    print(f"action {result.action_value!r} case {result.case_tag} converged={result.converged}")
    for name in ("psd_margin", "support_residuals", "support_gap", "beta_sign"):
        print(f"check {name}: {'pass' if checks[name] else 'FAIL'}")
    return 0 if result.converged and checks["all"] else 2


def cmd_verify(args) -> int:
    measure = load_measure(args.measure)
    if args.q_file:
        evaluator = _constant_field(args.q_file)
        tail = None
    else:
        grid = PositionGrid.from_box(
            args.position_radius, _parse_counts(args.position_grid, "--position-grid")
        )
        qhat = QHatEvaluator(measure, grid, smoothing_delta=args.smoothing_delta or 0.0)
        evaluator = qhat.evaluate
        tail = qhat.tail_magnitude

    mu = pushforward(measure, evaluator)
    total = mu.total()
    sig = measure.space.signature
    c = args.c if args.c is not None else float(np.trace(total).real)
    f = args.f if args.f is not None else float(np.trace(sig[:, None] * total).real)
    alpha, beta, case_tag = lagrange_parameters(mu, c, f)

    probes = np.unique(
        np.vstack([measure.box.grid_points(), measure.momenta]), axis=0
    )
    tol_el = args.tol_el if args.tol_el is not None else tolerances.EL_RESIDUAL
    report = el_residuals(
        measure, evaluator, alpha, beta, probes, case_tag, tail_magnitude=tail
    )
    if args.out:
        save_report(report, args.out)
    if args.csv:
        report_to_csv(report, args.csv)
    checks = check_first_order(report, tol_el)
    print(f"alpha {float(alpha)!r} beta {float(beta)!r} case {case_tag}")
    worst = float(report.probe_margins.min(initial=np.inf))
    residual = float(
        max(
            report.atom_residual_left.max(initial=0.0),
            report.atom_residual_right.max(initial=0.0),
        )
    )
    print(f"min psd margin {worst!r}; max support residual {residual!r}")
    for name in ("psd_margin", "support_residuals", "support_gap", "beta_sign"):
        print(f"check {name}: {'pass' if checks[name] else 'FAIL'}")
    return 0 if checks["all"] else 2


def cmd_decompose(args) -> int:
    measure = load_measure(args.measure)
    parts = decompose(measure, norm=args.norm)
    os.makedirs(args.out, exist_ok=True)
    for name, component in (
        ("particle", parts.particle),
        ("neutral", parts.neutral),
        ("sea", parts.sea),
    ):
        path = os.path.join(args.out, f"{name}.json")
        save_measure(component, path)
        mass = float(sum(np.linalg.norm(A, 2) for A in component.operators))
        print(f"{name}: operator mass {mass!r} -> {path}")
    return 0


def cmd_pointwise(args) -> int:
    q, space = load_operator(args.q_file)
    problem = PointwiseProblem(space=space, q=q, a=args.a, b=args.b)
    solution = solve(problem)
    payload = {
        "alpha": solution.alpha,
        "beta": solution.beta,
        "objective": solution.objective,
        "tag": solution.tag,
        "multipliers_valid": solution.multipliers_valid,
        "A_re": [[float(v) for v in row] for row in solution.A.real],
        "A_im": [[float(v) for v in row] for row in solution.A.imag],
    }
    if solution.family is not None:
        payload["family"] = {
            "slope": solution.family.slope,
            "offset": solution.family.offset,
            "alpha_min": solution.family.alpha_min,
            "alpha_max": solution.family.alpha_max,
        }
    text = json.dumps(payload, indent=1, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def cmd_sweep_alpha(args) -> int:
    q, space = load_operator(args.q_file)
    if args.alpha_max <= args.alpha_min:
        raise ValidationError("--alpha-max must exceed --alpha-min")
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.count)
    with open(args.out, "w", newline="") as fh:
        fh.write("alpha,a,beta\n")
        for alpha in alphas:
            beta = beta_of_alpha(q, space, float(alpha))
            av = a_of_alpha(q, space, float(alpha))
            if av.degenerate:
                fh.write(f"{float(alpha)!r},{av.a_min!r},{beta!r}\n")
                fh.write(f"{float(alpha)!r},{av.a_max!r},{beta!r}\n")
            else:
                fh.write(f"{float(alpha)!r},{av.a_min!r},{beta!r}\n")
    print(f"wrote sweep of {args.count} alphas to {args.out}")
    return 0


def cmd_correlate(args) -> int:
    measure = load_measure(args.measure)
    grid = PositionGrid.from_box(
        args.position_radius, _parse_counts(args.position_grid, "--position-grid")
    )
    basis = standard_basis(measure, limit=args.basis_size)
    samples = empirical_cfs(measure, grid, basis)
    correlations_to_csv(samples, args.out)
    print(f"wrote {len(samples)} correlation samples to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kreinact",
        description=(
            "Variational toolkit for positive operator-valued measures on "
            "indefinite inner product spaces"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fixture = sub.add_parser("fixture", help="write a fixture measure file")
    fixture.add_argument("kind", choices=["dirac-sea", "nilpotent", "random"])
    fixture.add_argument("--out", required=True, help="output measure file")
    fixture.add_argument("--seed", type=int, default=0)
    fixture.add_argument("--atoms", type=int, default=8)
    fixture.add_argument("--mass", type=float, default=1.0)
    fixture.add_argument("--spatial-radius", type=float, default=1.0)
    fixture.add_argument("--n", type=int, default=1, help="spin dimension (random kind)")
    fixture.add_argument("--box", default="1.0", help="momentum box: radius or 8 floats")
    fixture.add_argument("--grid", default="2,2,2,2", help="momentum grid counts")
    fixture.set_defaults(func=cmd_fixture)

    minimize = sub.add_parser("minimize", help="run the constrained minimization")
    minimize.add_argument("--config", help="JSON configuration file")
    minimize.add_argument("--out", required=True, help="run directory")
    minimize.add_argument("--seed", type=int, default=None)
    minimize.add_argument("--c", type=float, default=None)
    minimize.add_argument("--f", type=float, default=None)
    minimize.add_argument("--smoothing-delta", type=float, default=None)
    minimize.add_argument("--tol-el", type=float, default=None)
    minimize.add_argument("--grid", default=None, help="momentum grid counts")
    minimize.add_argument("--box", default=None, help="momentum box: radius or 8 floats")
    minimize.add_argument("--position-radius", type=float, default=None)
    minimize.add_argument("--position-grid", default=None)
    minimize.set_defaults(func=cmd_minimize)

    verify = sub.add_parser("verify", help="first-order condition report for a measure")
    verify.add_argument("measure", help="measure file")
    verify.add_argument("--q-file", help="operator file for a constant gradient field")
    verify.add_argument("--c", type=float, default=None)
    verify.add_argument("--f", type=float, default=None)
    verify.add_argument("--tol-el", type=float, default=None)
    verify.add_argument("--smoothing-delta", type=float, default=None)
    verify.add_argument("--position-radius", type=float, default=3.0)
    verify.add_argument("--position-grid", default="5,1,1,1")
    verify.add_argument("--out", help="write the report document here")
    verify.add_argument("--csv", help="write the (p, gap, margin) table here")
    verify.set_defaults(func=cmd_verify)

    decompose_p = sub.add_parser("decompose", help="split a measure into components")
    decompose_p.add_argument("measure", help="measure file")
    decompose_p.add_argument("--out", required=True, help="output directory")
    decompose_p.add_argument("--norm", default="spectral", choices=["spectral", "frobenius"])
    decompose_p.set_defaults(func=cmd_decompose)

    pointwise = sub.add_parser("pointwise", help="solve a pointwise trace minimization")
    pointwise.add_argument("q_file", help="operator file with the coefficient")
    pointwise.add_argument("--a", type=float, required=True)
    pointwise.add_argument("--b", type=float, required=True)
    pointwise.add_argument("--out", help="also write the solution document here")
    pointwise.set_defaults(func=cmd_pointwise)

    sweep = sub.add_parser("sweep-alpha", help="tabulate alpha -> (a, beta)")
    sweep.add_argument("q_file", help="operator file with the coefficient")
    sweep.add_argument("--alpha-min", type=float, required=True)
    sweep.add_argument("--alpha-max", type=float, required=True)
    sweep.add_argument("--count", type=int, default=101)
    sweep.add_argument("--out", required=True, help="output CSV")
    sweep.set_defaults(func=cmd_sweep_alpha)

    correlate = sub.add_parser("correlate", help="sample local correlation spectra")
    correlate.add_argument("measure", help="measure file")
    correlate.add_argument("--position-radius", type=float, default=3.0)
    correlate.add_argument("--position-grid", default="3,1,1,1")
    correlate.add_argument("--basis-size", type=int, default=None)
    correlate.add_argument("--out", required=True, help="output CSV")
    correlate.set_defaults(func=cmd_correlate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except KreinactError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except np.linalg.LinAlgError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
