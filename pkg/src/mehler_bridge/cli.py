"""Batch command-line front end.

Usage::

    mehler-bridge <kernel-eval|symbol-eval|propagate|verify|bridge>
                  --config <path> [--out <dir>] [--threads N]

Every command reads a JSON config (schema-checked, unknown keys
rejected), writes CSV data files and a JSON summary, and is
deterministic: identical configs produce byte-identical data files.
Floats are printed with 17 significant digits so values round-trip.

Exit codes: 0 success, 1 verification failure, 2 config error,
3 domain error, 4 non-convergence.
"""

import argparse
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bridge import BridgeProblem, interpolate_marginal, sinkhorn_solve
from .errors import ConfigError, MehlerBridgeError, NotConvergedError
from .kernels import KernelEvaluator
from .quadrature import Field, Grid, integrate, propagate
from .spectral import QuadraticRate, decompose
from .verify import run_default_suite
from .weyl import SymbolPoint, TimeWindow, symbol_h
from ._threads import thread_count

__all__ = ["main"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_NOT_CONVERGED = 4


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _require_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path} must be a JSON object")
    return obj


def _check_keys(obj: dict, required, optional, path: str):
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"{path} is missing required keys {missing}")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{path} has unknown keys {unknown}")


def _vector(obj, path: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(obj, dtype=float))
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path} must be a finite number or flat list")
    return arr


def _parse_rate(obj, path="config.rate") -> QuadraticRate:
    obj = _require_mapping(obj, path)
    _check_keys(obj, ("Q",), ("r", "s"), path)
    try:
        Q = np.asarray(obj["Q"], dtype=float)
        if Q.ndim == 0:
            Q = Q.reshape(1, 1)
        n = Q.shape[0]
        r = _vector(obj.get("r", np.zeros(n)), path + ".r")
        return QuadraticRate(Q=Q, r=r, s=float(obj.get("s", 0.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_window(obj, path="config.window") -> TimeWindow:
    obj = _require_mapping(obj, path)
    _check_keys(obj, ("t0", "t"), (), path)
    try:
        return TimeWindow(t0=float(obj["t0"]), t=float(obj["t"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_grid(obj, path="config.grid") -> Grid:
    obj = _require_mapping(obj, path)
    _check_keys(obj, ("L", "m"), (), path)
    try:
        L = _vector(obj["L"], path + ".L")
        m = np.atleast_1d(np.asarray(obj["m"], dtype=int))
        return Grid(half_widths=tuple(L), counts=tuple(int(v) for v in m))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _profile_values(obj, grid: Grid, path: str) -> np.ndarray:
    """Evaluate a named analytic density profile on the grid."""
    obj = _require_mapping(obj, path)
    if "type" not in obj:
        raise ConfigError(f"{path} needs a 'type' key")
    kind = obj["type"]
    nodes = grid.nodes()
    if kind == "gaussian":
        _check_keys(obj, ("type", "mean", "variance"), (), path)
        mean = _vector(obj["mean"], path + ".mean")
        var = _vector(obj["variance"], path + ".variance")
        if mean.size == 1:
            mean = np.full(grid.dim, mean[0])
        if var.size == 1:
            var = np.full(grid.dim, var[0])
        if mean.size != grid.dim or var.size != grid.dim or np.any(var <= 0):
            raise ConfigError(f"{path}: mean/variance incompatible with the grid")
        z = (nodes - mean) / np.sqrt(var)
        log_norm = -0.5 * np.sum(np.log(2.0 * math.pi * var))
        return np.exp(log_norm - 0.5 * np.sum(z * z, axis=1))
    if kind == "uniform":
        _check_keys(obj, ("type", "a", "b"), (), path)
        a = _vector(obj["a"], path + ".a")
        b = _vector(obj["b"], path + ".b")
        if a.size == 1:
            a = np.full(grid.dim, a[0])
        if b.size == 1:
            b = np.full(grid.dim, b[0])
        if a.size != grid.dim or b.size != grid.dim or np.any(b <= a):
            raise ConfigError(f"{path}: need a < b per dimension")
        inside = np.all((nodes >= a) & (nodes <= b), axis=1)
        return inside / np.prod(b - a)
    raise ConfigError(f"{path}: unknown profile type {kind!r}")


def _read_field_csv(path: Path, description: str):
    """Read a 1-D (x, value) CSV and rebuild its uniform grid."""
    try:
        raw = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise ConfigError(f"{description}: cannot read {path}: {exc}") from exc
    cols = raw.dtype.names
    if cols is None or len(cols) != 2:
        raise ConfigError(f"{description}: expected a 2-column CSV with header")
    x = np.asarray(raw[cols[0]], dtype=float)
    v = np.asarray(raw[cols[1]], dtype=float)
    m = x.size
    if m < 3 or m % 2 == 0:
        raise ConfigError(f"{description}: need an odd number (>= 3) of nodes")
    L = abs(x[0])
    ref = np.linspace(-L, L, m)
    if np.max(np.abs(x - ref)) > 1e-9 * max(1.0, L):
        raise ConfigError(f"{description}: nodes must form a symmetric uniform grid")
    grid = Grid(half_widths=(L,), counts=(m,))
    return Field(grid=grid, values=v)


def _parse_endpoint(obj, grid: Grid, path: str) -> Field:
    obj = _require_mapping(obj, path)
    if set(obj) == {"csv"}:
        f = _read_field_csv(Path(obj["csv"]), path)
        if f.grid != grid:
            raise ConfigError(f"{path}: CSV grid differs from the problem grid")
        values = f.values.copy()
    else:
        values = _profile_values(obj, grid, path)
    mass = integrate(Field(grid=grid, values=values))
    if not math.isfinite(mass) or mass <= 0:
        raise ConfigError(f"{path}: profile has nonpositive mass on the grid")
    return Field(grid=grid, values=values / mass)


def _coord_header(prefix: str, n: int):
    if n == 1:
        return [prefix]
    return [f"{prefix}{k + 1}" for k in range(n)]


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_summary(path: Path, payload: dict):
    payload = dict(payload)
    payload["metadata"] = {
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        **payload.get("metadata", {}),
    }
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True))
        fh.write("\n")


def _parse_point(obj, n: int, path: str) -> np.ndarray:
    arr = _vector(obj, path)
    if arr.size != n:
        raise ConfigError(f"{path} must have length {n}")
    return arr


def _kernel_probes(cfg: dict, n: int):
    if ("probes" in cfg) == ("probe_grid" in cfg):
        raise ConfigError("config needs exactly one of 'probes' or 'probe_grid'")
    if "probes" in cfg:
        probes = cfg["probes"]
        if not isinstance(probes, list) or not probes:
            raise ConfigError("config.probes must be a nonempty list")
        out = []
        for i, p in enumerate(probes):
            p = _require_mapping(p, f"config.probes[{i}]")
            _check_keys(p, ("x", "y"), (), f"config.probes[{i}]")
            out.append(
                (
                    _parse_point(p["x"], n, f"config.probes[{i}].x"),
                    _parse_point(p["y"], n, f"config.probes[{i}].y"),
                )
            )
        return out
    grid = _parse_grid(cfg["probe_grid"], "config.probe_grid")
    if grid.dim != n:
        raise ConfigError("config.probe_grid dimension mismatch")
    if grid.total_points**2 > 10**6:
        raise ConfigError("probe_grid would produce more than 1e6 probe pairs")
    nodes = grid.nodes()
    return [(xi, yj) for xi in nodes for yj in nodes]


def cmd_kernel_eval(cfg: dict, out_dir: Path, threads) -> int:
    _check_keys(
        cfg, ("rate", "window"), ("probes", "probe_grid", "output"), "config"
    )
    rate = _parse_rate(cfg["rate"])
    window = _parse_window(cfg["window"])
    if window.tau <= 0:
        raise ConfigError(
            "window has t == t0: the kernel degenerates to a Dirac delta at "
            "zero elapsed time; kernel evaluation needs t > t0"
        )
    probes = _kernel_probes(cfg, rate.n)
    ev = KernelEvaluator(decompose(rate), window)
    rows = []
    for zx, zy in probes:
        log_k = ev.log_kernel_original(zx, zy)
        rows.append(list(zx) + list(zy) + [log_k, math.exp(log_k)])
    header = _coord_header("x", rate.n) + _coord_header("y", rate.n) + [
        "log_kappa",
        "kappa",
    ]
    out_csv = out_dir / cfg.get("output", "kernel_eval.csv")
    _write_csv(out_csv, header, rows)
    _write_summary(
        out_dir / "kernel_eval_summary.json",
        {"command": "kernel-eval", "probes": len(rows), "output": out_csv.name,
         "kind": ev.kind},
    )
    return EXIT_OK


def cmd_symbol_eval(cfg: dict, out_dir: Path, threads) -> int:
    _check_keys(cfg, ("rate", "window", "probes"), ("output",), "config")
    rate = _parse_rate(cfg["rate"])
    window = _parse_window(cfg["window"])
    probes = cfg["probes"]
    if not isinstance(probes, list) or not probes:
        raise ConfigError("config.probes must be a nonempty list")
    dec = decompose(rate)
    rows = []
    for i, p in enumerate(probes):
        p = _require_mapping(p, f"config.probes[{i}]")
        _check_keys(p, ("x", "xi"), (), f"config.probes[{i}]")
        x = _parse_point(p["x"], rate.n, f"config.probes[{i}].x")
        xi = _parse_point(p["xi"], rate.n, f"config.probes[{i}].xi")
        rows.append(list(x) + list(xi) + [symbol_h(dec, SymbolPoint(x, xi), window)])
    header = _coord_header("x", rate.n) + _coord_header("xi", rate.n) + ["h"]
    out_csv = out_dir / cfg.get("output", "symbol_eval.csv")
    _write_csv(out_csv, header, rows)
    _write_summary(
        out_dir / "symbol_eval_summary.json",
        {"command": "symbol-eval", "probes": len(rows), "output": out_csv.name},
    )
    return EXIT_OK


def _field_moments(f: Field):
    nodes = f.grid.nodes()
    wts = f.grid.weight_vector()
    mass = float(np.dot(wts, f.values))
    mean = (nodes * (wts * f.values)[:, None]).sum(axis=0) / mass
    var = ((nodes - mean) ** 2 * (wts * f.values)[:, None]).sum(axis=0) / mass
    return mass, mean, var


def cmd_propagate(cfg: dict, out_dir: Path, threads) -> int:
    _check_keys(cfg, ("rate", "window", "grid", "initial"), ("output",), "config")
    rate = _parse_rate(cfg["rate"])
    window = _parse_window(cfg["window"])
    out_grid = _parse_grid(cfg["grid"])
    initial = _require_mapping(cfg["initial"], "config.initial")
    if set(initial) == {"csv"}:
        phi0 = _read_field_csv(Path(initial["csv"]), "config.initial")
    else:
        phi0 = Field(
            grid=out_grid, values=_profile_values(initial, out_grid, "config.initial")
        )
    result = propagate(phi0, rate, window, out_grid, threads=threads)
    nodes = out_grid.nodes()
    rows = [list(nodes[i]) + [result.values[i]] for i in range(nodes.shape[0])]
    out_csv = out_dir / cfg.get("output", "propagate.csv")
    _write_csv(out_csv, _coord_header("x", out_grid.dim) + ["value"], rows)
    mass, mean, var = _field_moments(result)
    print(f"output mass = {_fmt(mass)}")
    print(f"output mean = {[_fmt(v) for v in mean]}")
    print(f"output variance = {[_fmt(v) for v in var]}")
    _write_summary(
        out_dir / "propagate_summary.json",
        {
            "command": "propagate",
            "output": out_csv.name,
            "moments": {
                "mass": mass,
                "mean": [float(v) for v in mean],
                "variance": [float(v) for v in var],
            },
        },
    )
    return EXIT_OK


def cmd_verify(cfg: dict, out_dir: Path, threads) -> int:
    _check_keys(cfg, (), ("checks", "sigma_override", "report"), "config")
    selected = cfg.get("checks", "default")
    if selected == "default" or selected == "all":
        selected = None
    elif not isinstance(selected, list) or not selected:
        raise ConfigError("config.checks must be 'default' or a nonempty list")
    sigma_override = cfg.get("sigma_override")
    if sigma_override is not None and sigma_override not in (-1, 1):
        raise ConfigError("config.sigma_override must be +1 or -1")
    try:
        report = run_default_suite(sigma_override=sigma_override, selected=selected)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    payload = report.as_dict()
    payload["metadata"] = {
        "runtimes_seconds": {c.name: c.runtime_seconds for c in report.checks}
    }
    dest = cfg.get("report", "-")
    if dest == "-":
        payload["metadata"]["version"] = __version__
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        _write_summary(out_dir / dest, payload)
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: residual {c.residual:.3e} vs {c.threshold:.3e}",
              file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_bridge(cfg: dict, out_dir: Path, threads) -> int:
    _check_keys(
        cfg,
        ("rate", "window", "grid", "rho0", "rho1"),
        ("tol", "max_iter", "marginals", "output_prefix"),
        "config",
    )
    rate = _parse_rate(cfg["rate"])
    window = _parse_window(cfg["window"])
    grid = _parse_grid(cfg["grid"])
    rho0 = _parse_endpoint(cfg["rho0"], grid, "config.rho0")
    rho1 = _parse_endpoint(cfg["rho1"], grid, "config.rho1")
    marginals = cfg.get("marginals", [])
    if not isinstance(marginals, list):
        raise ConfigError("config.marginals must be a list of times")
    try:
        problem = BridgeProblem(
            grid=grid,
            rho0=rho0,
            rho1=rho1,
            rate=rate,
            window=window,
            tol=float(cfg.get("tol", 1e-8)),
            max_iter=int(cfg.get("max_iter", 5000)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    solution = sinkhorn_solve(problem, threads=threads)
    prefix = cfg.get("output_prefix", "bridge")
    nodes = grid.nodes()
    _write_csv(
        out_dir / f"{prefix}_residual_history.csv",
        ["iteration", "residual"],
        [(i + 1, r) for i, r in enumerate(solution.residual_history)],
    )
    summary = {
        "command": "bridge",
        "converged": solution.converged,
        "iterations": solution.iterations,
        "final_residual": float(solution.residual_history[-1])
        if solution.residual_history.size
        else math.nan,
        "tol": problem.tol,
    }
    if not solution.converged:
        _write_summary(out_dir / f"{prefix}_summary.json", summary)
        print("bridge did not converge; residual history written", file=sys.stderr)
        return EXIT_NOT_CONVERGED

    _write_csv(
        out_dir / f"{prefix}_potentials.csv",
        _coord_header("x", grid.dim) + ["a", "b"],
        [
            list(nodes[i]) + [solution.a.values[i], solution.b.values[i]]
            for i in range(nodes.shape[0])
        ],
    )
    renorms = {}
    for t_mid in marginals:
        t_mid = float(t_mid)
        if not (window.t0 <= t_mid <= window.t):
            raise ConfigError(f"marginal time {t_mid} outside the window")
        marg = interpolate_marginal(problem, solution, t_mid, threads=threads)
        name = f"{prefix}_marginal_t{t_mid:.12g}.csv"
        _write_csv(
            out_dir / name,
            _coord_header("x", grid.dim) + ["value"],
            [list(nodes[i]) + [marg.field.values[i]] for i in range(nodes.shape[0])],
        )
        renorms[f"{t_mid:.12g}"] = marg.renormalization
    summary["marginal_renormalizations"] = renorms
    _write_summary(out_dir / f"{prefix}_summary.json", summary)
    return EXIT_OK


_COMMANDS = {
    "kernel-eval": cmd_kernel_eval,
    "symbol-eval": cmd_symbol_eval,
    "propagate": cmd_propagate,
    "verify": cmd_verify,
    "bridge": cmd_bridge,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mehler-bridge",
        description="closed-form reaction-diffusion kernels, verification, "
        "propagation, and Sinkhorn endpoint matching",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (overrides MB_THREADS)")
    args = parser.parse_args(argv)

    try:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {args.config}: {exc}") from exc
        cfg = _require_mapping(cfg, "config")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        threads = thread_count(args.threads)
        return _COMMANDS[args.command](cfg, out_dir, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotConvergedError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except MehlerBridgeError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
