"""Command line interface: preset experiments, solver dispatch, CSV and
manifest emission, and cross-run comparison.

Exit codes: 0 on success (solvers converged), 2 when a solver ran but did not
converge, 1 on any input error (bad flags, malformed config, unknown preset,
mismatched grids).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import presets
from .bestreply import solve_bestreply
from .congestion import solve_congestion
from .lp import solve_exact_ot
from .measures import GridMeasure1D, wasserstein1_1d
from .monge_ampere import level_curve
from .nestedness import NestednessReport, check_nestedness
from .sinkhorn import solve_sinkhorn

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2

_SOLVER_ACTIONS = ("solve-congestion", "solve-bestreply", "solve-sinkhorn")


class CLIError(Exception):
    """Input error; the message is printed to stderr and the exit code is 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v
                              for v in row) + "\n")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CLIError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(
            f"config parse error in {path} at line {exc.lineno}, "
            f"column {exc.colno}: {exc.msg}"
        ) from exc


def _expand(config: dict) -> dict:
    try:
        return presets.expand_config(config)
    except (KeyError, ValueError) as exc:
        detail = exc.args[0] if exc.args else exc
        raise CLIError(str(detail)) from exc


def _config_hash(cfg: dict) -> str:
    payload = {
        k: v for k, v in sorted(cfg.items())
        if k not in ("out_dir", "dir_a", "dir_b")
    }
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _nestedness_dict(report: NestednessReport) -> dict:
    return {
        "is_nested": bool(report.is_nested),
        "total_violations": int(report.total_violations),
        "n_tangency": int(report.n_tangency),
        "pair_stride": int(report.pair_stride),
        "n_pairs": int(report.n_pairs),
        "n_grid": int(report.n_grid),
        "violations": [
            {"y0": float(a), "y1": float(b), "count": int(c)}
            for a, b, c in report.violations[:20]
        ],
    }


def _write_outputs(out_dir: Path, cfg: dict, cost, cloud, result,
                   nest_report: NestednessReport | None,
                   runtime: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    result.nu.to_csv(out_dir / "density.csv")

    profile = result.profile
    mids = profile.grid.midpoints
    _write_csv(
        out_dir / "profile.csv",
        ["y", "k", "v"],
        zip(mids, profile.k_values, profile.v_values),
    )

    n_curves = int(cfg.get("n_level_curves", 0))
    if n_curves > 0:
        idx = np.unique(
            np.linspace(0, mids.size - 1, min(n_curves, mids.size)).round().astype(int)
        )
        rows = []
        for j in idx:
            pts = level_curve(cost, float(mids[j]), float(profile.k_values[j]),
                              resolution=int(cfg.get("resolution", 400)))
            rows.extend(
                (mids[j], profile.k_values[j], p0, p1) for p0, p1 in pts
            )
        _write_csv(out_dir / "level_curves.csv", ["y_level", "k", "x1", "x2"], rows)

    if result.assignment is not None:
        _write_csv(
            out_dir / "assignment.csv",
            ["x1", "x2", "weight", "assigned_y"],
            zip(cloud.points[:, 0], cloud.points[:, 1], cloud.weights,
                result.assignment.assigned_y),
        )

    res_hist = result.residual_history
    if len(res_hist) != len(result.history):
        res_hist = result.history
    _write_csv(
        out_dir / "convergence.csv",
        ["iter", "l1_delta", "residual"],
        zip(range(1, len(result.history) + 1), result.history, res_hist),
    )

    if nest_report is not None:
        with open(out_dir / "nestedness.json", "w") as fh:
            json.dump(_nestedness_dict(nest_report), fh, indent=2)

    manifest = {
        "preset": cfg.get("preset"),
        "action": cfg.get("action"),
        "config_hash": _config_hash(cfg),
        "n_points": int(cloud.n_points),
        "n_cells": int(result.nu.n_cells),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "residual": float(result.residual),
        "runtime_seconds": runtime,
        "nestedness": _nestedness_dict(nest_report) if nest_report else None,
        "diagnostics": {
            k: v for k, v in result.diagnostics.items()
            if isinstance(v, (int, float, str, bool, type(None)))
        },
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def _solve(cfg: dict):
    """Run the solver named by ``cfg['action']``; returns (cost, cloud, result)."""
    action = cfg.get("action")
    if action not in _SOLVER_ACTIONS:
        raise CLIError(
            f"config must name a solver action among {_SOLVER_ACTIONS}, "
            f"got {action!r}"
        )
    try:
        cost = presets.build_cost(cfg)
        cloud = presets.build_cloud(cfg)
        grid = presets.build_grid(cfg)
        nu0 = presets.build_nu0(cfg, grid)
        solver_config = presets.build_solver_config(cfg)
        if action == "solve-congestion":
            spec = presets.build_congestion_spec(cfg)
            result = solve_congestion(cost, cloud, spec, nu0, solver_config)
        elif action == "solve-bestreply":
            spec = presets.build_interaction_spec(cfg)
            result = solve_bestreply(cost, cloud, spec, nu0, solver_config)
        else:
            if cfg.get("interaction") is not None:
                functional = presets.build_interaction_spec(cfg)
            else:
                functional = presets.build_congestion_spec(cfg)
            result = solve_sinkhorn(cost, cloud, functional, grid,
                                    float(cfg["eps"]), solver_config, nu0=nu0)
    except (ValueError, TypeError) as exc:
        raise CLIError(str(exc)) from exc
    return cost, cloud, result


def _run_solver(cfg: dict, out_dir: Path) -> int:
    start = time.perf_counter()
    cost, cloud, result = _solve(cfg)
    report = check_nestedness(cost, cloud, result.profile,
                              pair_stride=int(cfg["stride"]))
    runtime = time.perf_counter() - start
    _write_outputs(out_dir, cfg, cost, cloud, result, report, runtime)
    print(
        f"{cfg['action']}: converged={result.converged} "
        f"iterations={result.iterations} residual={result.residual:.3e} "
        f"nested={report.is_nested} -> {out_dir}"
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _comparison_rows(a: GridMeasure1D, b: GridMeasure1D) -> list[tuple[str, float]]:
    if a.grid != b.grid:
        raise CLIError("densities live on different grids; cannot compare")
    dy = a.dy
    support_a = int(np.count_nonzero(a.density > 1e-6))
    support_b = int(np.count_nonzero(b.density > 1e-6))
    return [
        ("w1", wasserstein1_1d(a, b)),
        ("l1", float(np.abs(a.density - b.density).sum() * dy)),
        ("argmax_offset_cells", float(abs(int(np.argmax(a.density))
                                          - int(np.argmax(b.density))))),
        ("support_cells_a", float(support_a)),
        ("support_cells_b", float(support_b)),
        ("support_diff_cells", float(support_b - support_a)),
    ]


def _write_comparison(out_dir: Path, rows: list[tuple[str, float]]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "comparison.csv", ["metric", "value"],
               ((name, value) for name, value in rows))


def _run_compare_solvers(cfg: dict, out_dir: Path) -> int:
    """Run the interaction game through best-reply and Sinkhorn, then compare."""
    start = time.perf_counter()
    br_cfg = dict(cfg, action="solve-bestreply")
    sk_cfg = dict(cfg, action="solve-sinkhorn")
    cost, cloud, br_result = _solve(br_cfg)
    br_report = check_nestedness(cost, cloud, br_result.profile,
                                 pair_stride=int(cfg["stride"]))
    mid = time.perf_counter()
    _write_outputs(out_dir / "bestreply", br_cfg, cost, cloud, br_result,
                   br_report, mid - start)
    _, _, sk_result = _solve(sk_cfg)
    sk_report = check_nestedness(cost, cloud, sk_result.profile,
                                 pair_stride=int(cfg["stride"]))
    end = time.perf_counter()
    _write_outputs(out_dir / "sinkhorn", sk_cfg, cost, cloud, sk_result,
                   sk_report, end - mid)

    rows = _comparison_rows(br_result.nu, sk_result.nu)
    _write_comparison(out_dir, rows)
    manifest = {
        "preset": cfg.get("preset"),
        "action": "compare-solvers",
        "config_hash": _config_hash(cfg),
        "converged": bool(br_result.converged and sk_result.converged),
        "runtime_seconds": end - start,
        "comparison": {name: value for name, value in rows},
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    for name, value in rows:
        print(f"{name},{_fmt(value)}")
    ok = br_result.converged and sk_result.converged
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _run_check_nestedness(cfg: dict, out_dir: Path) -> int:
    if cfg.get("action") not in _SOLVER_ACTIONS:
        cfg = dict(cfg, action="solve-congestion")
    start = time.perf_counter()
    cost, cloud, result = _solve(cfg)
    report = check_nestedness(cost, cloud, result.profile,
                              pair_stride=int(cfg["stride"]))
    runtime = time.perf_counter() - start
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "nestedness.json", "w") as fh:
        json.dump(_nestedness_dict(report), fh, indent=2)
    manifest = {
        "preset": cfg.get("preset"),
        "action": "check-nestedness",
        "config_hash": _config_hash(cfg),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "residual": float(result.residual),
        "runtime_seconds": runtime,
        "nestedness": _nestedness_dict(report),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(
        f"check-nestedness: nested={report.is_nested} "
        f"violations={report.total_violations} tangencies={report.n_tangency}"
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _load_weights_csv(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=1, dtype=float)
    except (OSError, ValueError) as exc:
        raise CLIError(f"cannot read weights from {path}: {exc}") from exc


def _run_oracle(cost_matrix_path: str, row_path: str, col_path: str,
                out_dir: Path) -> int:
    try:
        c_mat = np.loadtxt(cost_matrix_path, delimiter=",", ndmin=2, dtype=float)
    except (OSError, ValueError) as exc:
        raise CLIError(
            f"cannot read cost matrix from {cost_matrix_path}: {exc}"
        ) from exc
    r = _load_weights_csv(row_path)
    col = _load_weights_csv(col_path)
    try:
        res = solve_exact_ot(c_mat, r, col)
    except (ValueError, RuntimeError) as exc:
        raise CLIError(str(exc)) from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    np.savetxt(out_dir / "coupling.csv", res.coupling, delimiter=",", fmt="%.17g")
    report = {
        "value": res.value,
        "dual_feasibility": res.dual_feasibility,
        "complementary_slackness": res.complementary_slackness,
        "duality_gap": res.duality_gap,
        "row_error": res.row_error,
        "col_error": res.col_error,
    }
    with open(out_dir / "oracle.json", "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"optimal transport cost: {_fmt(res.value)}")
    return EXIT_OK


def _run_compare_dirs(dir_a: str, dir_b: str, out_dir: Path | None) -> int:
    try:
        a = GridMeasure1D.from_csv(Path(dir_a) / "density.csv")
        b = GridMeasure1D.from_csv(Path(dir_b) / "density.csv")
    except (OSError, ValueError) as exc:
        raise CLIError(str(exc)) from exc
    rows = _comparison_rows(a, b)
    if out_dir is not None:
        _write_comparison(out_dir, rows)
    for name, value in rows:
        print(f"{name},{_fmt(value)}")
    return EXIT_OK


_ACTIONS = {
    "solve-congestion": _run_solver,
    "solve-bestreply": _run_solver,
    "solve-sinkhorn": _run_solver,
    "compare-solvers": _run_compare_solvers,
    "check-nestedness": _run_check_nestedness,
}


def _resolve_out_dir(args, cfg: dict) -> Path:
    out = getattr(args, "out", None) or cfg.get("out_dir")
    if not out:
        raise CLIError("an output directory is required (--out or out_dir)")
    return Path(out)


def _cmd_run(args) -> int:
    cfg = _expand(_load_json(args.config))
    action = cfg.get("action")
    if action == "oracle-ot":
        missing = [k for k in ("cost_matrix", "row_weights", "col_weights")
                   if not cfg.get(k)]
        if missing:
            raise CLIError(f"oracle-ot config is missing {missing}")
        return _run_oracle(cfg["cost_matrix"], cfg["row_weights"],
                           cfg["col_weights"], _resolve_out_dir(args, cfg))
    if action == "compare":
        if not cfg.get("dir_a") or not cfg.get("dir_b"):
            raise CLIError("compare config needs dir_a and dir_b")
        out = getattr(args, "out", None) or cfg.get("out_dir")
        return _run_compare_dirs(cfg["dir_a"], cfg["dir_b"],
                                 Path(out) if out else None)
    handler = _ACTIONS.get(action)
    if handler is None:
        raise CLIError(
            f"config action {action!r} is not one of "
            f"{sorted([*_ACTIONS, 'oracle-ot', 'compare'])}"
        )
    return handler(cfg, _resolve_out_dir(args, cfg))


def _collect_overrides(args) -> dict:
    overrides = {}
    for field in ("n_cells", "n_points", "seed", "eps", "max_iters", "tol_l1",
                  "damping", "stride", "sampler", "cost", "p", "resolution"):
        value = getattr(args, field, None)
        if value is not None:
            overrides[field] = value
    return overrides


def _cmd_solver(args) -> int:
    cfg = _load_json(args.config) if args.config else {}
    if args.preset:
        cfg["preset"] = args.preset
    cfg.update(_collect_overrides(args))
    expanded = _expand(cfg)
    if args.command != "check-nestedness":
        expanded["action"] = args.command
    out_dir = _resolve_out_dir(args, expanded)
    if args.command == "check-nestedness":
        return _run_check_nestedness(expanded, out_dir)
    return _run_solver(expanded, out_dir)


def _cmd_oracle(args) -> int:
    return _run_oracle(args.cost_matrix, args.row_weights, args.col_weights,
                       Path(args.out))


def _cmd_compare(args) -> int:
    return _run_compare_dirs(args.dir_a, args.dir_b,
                             Path(args.out) if args.out else None)


def _add_solver_arguments(sp) -> None:
    sp.add_argument("--preset", help="named parameter preset")
    sp.add_argument("--config", help="JSON config file (fields override the preset)")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--n-cells", dest="n_cells", type=int)
    sp.add_argument("--n-points", dest="n_points", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--max-iters", dest="max_iters", type=int)
    sp.add_argument("--tol-l1", dest="tol_l1", type=float)
    sp.add_argument("--damping", type=float)
    sp.add_argument("--stride", type=int)
    sp.add_argument("--sampler")
    sp.add_argument("--cost")
    sp.add_argument("--p", type=float)
    sp.add_argument("--resolution", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="cournot",
        description="Equilibria of continuum games via multi-to-one transport",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (overrides out_dir)")
    run.set_defaults(handler=_cmd_run)

    for name, desc in (
        ("solve-congestion", "congestion fixed point"),
        ("solve-bestreply", "best-reply iteration"),
        ("solve-sinkhorn", "entropic regularization"),
        ("check-nestedness", "solve, then report level-set crossings"),
    ):
        sp = sub.add_parser(name, help=desc)
        _add_solver_arguments(sp)
        sp.set_defaults(handler=_cmd_solver)

    oracle = sub.add_parser("oracle-ot", help="exact transport LP with certificates")
    oracle.add_argument("--cost-matrix", dest="cost_matrix", required=True)
    oracle.add_argument("--row-weights", dest="row_weights", required=True)
    oracle.add_argument("--col-weights", dest="col_weights", required=True)
    oracle.add_argument("--out", required=True)
    oracle.set_defaults(handler=_cmd_oracle)

    compare = sub.add_parser("compare", help="compare two run directories")
    compare.add_argument("dir_a")
    compare.add_argument("dir_b")
    compare.add_argument("--out")
    compare.set_defaults(handler=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
