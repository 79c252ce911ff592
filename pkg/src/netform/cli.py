"""``netform`` command-line entry point."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, parse_list, read_ini
from .errors import ConfigError, InfeasibleSizeError, NetformError

SUBCOMMANDS = (
    "check-potential",
    "simulate",
    "exact-stationary",
    "transient",
    "eap-solve",
    "phase-sweep",
    "kernel-solve",
    "trade",
)


# -- output helpers ---------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def csv_text(header_line: str, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(header_line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def atomic_write(path: str, text: str) -> None:
    """Write to a temporary sibling, then rename over the target."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".netform-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def workers_for(cfg: RunConfig) -> int:
    env = os.environ.get("NETFORM_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"NETFORM_WORKERS={env!r} is not an integer") from None
    return max(1, cfg.get("run", "workers", 1, int))


def output_path(cfg: RunConfig, key: str = "path") -> Optional[str]:
    return cfg.section("output").get(key)


# -- argument parsing -------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="netform", description="Network formation games and their large-population limits.")
    p.add_argument("--version", action="version", version=f"netform {__version__}")
    sub = p.add_subparsers(dest="subcommand", parser_class=_Parser)

    def common(sp, model=True):
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--out", help="output file (directory for trade)")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--seed", type=int)
        if model:
            sp.add_argument("--sigma", type=float)
            sp.add_argument("--n-nodes", type=int)
            sp.add_argument("--motif", action="append", default=[], help="edge list such as 1->2,2->1 (repeatable)")
            sp.add_argument("--value", action="append", type=float, default=[], help="value of the matching --motif")

    sp = sub.add_parser("check-potential", help="conservativeness report for a utility table")
    common(sp, model=False)
    sp.add_argument("--utilities", help="CSV with columns agent, network_hex, value")
    sp.add_argument("--n-nodes", type=int)
    sp.add_argument("--tol", type=float)

    sp = sub.add_parser("simulate", help="simulate the link-switching process")
    common(sp)
    sp.add_argument("--events", type=int)
    sp.add_argument("--time", type=float)
    sp.add_argument("--burn-in", type=int)
    sp.add_argument("--thinning", type=int)
    sp.add_argument("--series", help="CSV path for the motif-density time series")
    sp.add_argument("--record-every", type=int)

    sp = sub.add_parser("exact-stationary", help="Gibbs stationary law over all networks")
    common(sp)
    sp.add_argument("--utilities")

    sp = sub.add_parser("transient", help="law at given times by uniformization")
    common(sp)
    sp.add_argument("--times", help="comma-separated times")
    sp.add_argument("--initial", help="initial network as hex (default: empty)")

    sp = sub.add_parser("eap-solve", help="typical density of a motif model")
    common(sp)

    sp = sub.add_parser("phase-sweep", help="typical density along a value path")
    common(sp)
    sp.add_argument("--param", help="motif name (m1, m2, ... for --motif) or 'sigma'")
    sp.add_argument("--start", type=float)
    sp.add_argument("--stop", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--chain-lengths", help="comma-separated chain lengths; sweeps the chain value")

    sp = sub.add_parser("kernel-solve", help="typical kernel of a typed model")
    common(sp)

    sp = sub.add_parser("trade", help="circular-city trade sweep")
    common(sp, model=False)
    sp.add_argument("--L", type=int, dest="L")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--v-min", type=float)
    sp.add_argument("--v-max", type=float)
    sp.add_argument("--v-steps", type=int)
    sp.add_argument("--sigma", type=float)
    return p


def _set(raw: dict, sec: str, key: str, val) -> None:
    if val is not None:
        raw.setdefault(sec, {})[key] = str(val)


def build_config(args) -> RunConfig:
    raw = read_ini(args.config) if getattr(args, "config", None) else {}
    sc = args.subcommand
    motifs = getattr(args, "motif", []) or []
    values = getattr(args, "value", []) or []
    if motifs:
        if values and len(values) != len(motifs):
            raise ConfigError("give one --value per --motif")
        for sec in [s for s in raw if s.startswith("motif.")]:
            del raw[sec]
        for k, edges in enumerate(motifs):
            raw[f"motif.m{k + 1}"] = {"edges": edges, "value": str(values[k] if values else 0.0)}
        raw.setdefault("model", {}).setdefault("kind", "motifs")
    _set(raw, "model", "sigma", getattr(args, "sigma", None))
    _set(raw, "model", "n_nodes", getattr(args, "n_nodes", None))
    _set(raw, "run", "seed", args.seed)
    _set(raw, "run", "workers", args.workers)

    if sc == "trade":
        out = args.out
        raw.setdefault("model", {})["kind"] = "trade"
        _set(raw, "model", "L", args.L)
        _set(raw, "model", "gamma", args.gamma)
        _set(raw, "sweep", "v_min", args.v_min)
        _set(raw, "sweep", "v_max", args.v_max)
        _set(raw, "sweep", "v_steps", args.v_steps)
        _set(raw, "output", "dir", out)
    else:
        _set(raw, "output", "path", args.out)
    if sc in ("check-potential", "exact-stationary") and getattr(args, "utilities", None):
        raw.setdefault("model", {}).update(kind="table", utilities=args.utilities)
    if sc == "check-potential":
        raw.setdefault("model", {}).setdefault("kind", "table")
        _set(raw, "model", "tol", args.tol)
    if sc == "simulate":
        for key in ("events", "time", "burn_in", "thinning", "record_every"):
            _set(raw, "run", key, getattr(args, key))
        _set(raw, "output", "series", args.series)
    if sc == "transient":
        _set(raw, "transient", "times", args.times)
        _set(raw, "transient", "initial", args.initial)
    if sc == "phase-sweep":
        _set(raw, "sweep", "parameter", args.param)
        _set(raw, "sweep", "start", args.start)
        _set(raw, "sweep", "stop", args.stop)
        _set(raw, "sweep", "steps", args.steps)
        _set(raw, "sweep", "chain_lengths", args.chain_lengths)
        if args.chain_lengths:
            raw.setdefault("model", {}).setdefault("kind", "motifs")
    return RunConfig(sc, raw)


# -- shared model resolution -----------------------------------------------------------------

def read_utility_csv(path: str, n_nodes: Optional[int] = None):
    from .game import UtilityTable
    from .network import n_networks

    entries = []
    with open(path, encoding="utf-8") as fh:
        for row in csv.reader(r for r in fh if r.strip() and not r.lstrip().startswith("#")):
            if row and row[0].strip().lower() == "agent":
                continue
            if len(row) != 3:
                raise ConfigError(f"expected 3 columns (agent, network_hex, value), got {row}")
            try:
                entries.append((int(row[0]) - 1, int(row[1], 16), float(row[2])))
            except ValueError:
                raise ConfigError(f"bad utility row {row}") from None
    if n_nodes is None:
        for n in range(2, 6):
            if n * n_networks(n) == len(entries):
                n_nodes = n
                break
        else:
            raise ConfigError(f"{len(entries)} rows do not form a complete table for any N <= 5")
    S = n_networks(n_nodes)
    vals = np.full((n_nodes, S), np.nan)
    for i, g, v in entries:
        if not (0 <= i < n_nodes and 0 <= g < S):
            raise ConfigError(f"row (agent {i + 1}, network {g:x}) out of range for N={n_nodes}")
        vals[i, g] = v
    if np.isnan(vals).any():
        raise ConfigError("utility table is incomplete")
    return UtilityTable(n_nodes, vals)


def _utilities(cfg: RunConfig, n: int):
    """Object the dynamics module can simulate, for the configured model."""
    kind = cfg.kind
    if kind == "motifs":
        return cfg.motif_model()
    if kind == "typed":
        from .meanfield import TypedUtility

        tm = cfg.typed_model()
        return TypedUtility(tm, cfg.types(n, tm.n_types))
    if kind == "trade":
        tm = cfg.trade_model()
        return tm.utility(cfg.types(n, tm.L))
    if kind == "table":
        return read_utility_csv(cfg.require("model", "utilities"), n)
    raise ConfigError(f"unsupported model kind {kind!r}")


def _sigma_of(cfg: RunConfig, U) -> float:
    s = getattr(U, "sigma", None)
    return float(s) if s is not None else cfg.sigma()


def _table_and_potential(cfg: RunConfig, n: int):
    from .game import potential_from_utilities
    from .motifs import MotifModel, motif_potential_table, motif_utility_table

    U = _utilities(cfg, n)
    sigma = _sigma_of(cfg, U)
    if isinstance(U, MotifModel):
        return motif_utility_table(U, n), motif_potential_table(U, n), sigma
    table = U if not hasattr(U, "utility_table") else U.utility_table(n)
    return table, potential_from_utilities(table), sigma


# -- subcommands -------------------------------------------------------------------------------

def cmd_check_potential(cfg: RunConfig) -> dict:
    from .game import DEFAULT_TOL, check_conservative

    U = read_utility_csv(cfg.require("model", "utilities"), cfg.get("model", "n_nodes", None, int))
    report = check_conservative(U, cfg.get("model", "tol", DEFAULT_TOL, float))
    out = report.to_dict()
    if output_path(cfg):
        atomic_write(output_path(cfg), json_text({"config": cfg.digest(), "version": __version__, **out}))
    return out


def cmd_simulate(cfg: RunConfig) -> dict:
    from .dynamics import SimConfig, exact_stationary, simulate
    from .network import DirectedNetwork, N_MAX_TRANSIENT

    n = cfg.require("model", "n_nodes", int)
    U = _utilities(cfg, n)
    events = cfg.get("run", "events", None, int)
    t = cfg.get("run", "time", None, float)
    if events is None and t is None:
        raise ConfigError("set [run] events or [run] time")
    init = cfg.get("run", "initial")
    sim = SimConfig(
        n_nodes=n,
        utilities=U,
        sigma=_sigma_of(cfg, U),
        events=events,
        time=t,
        initial=DirectedNetwork.from_hex(n, init) if init else None,
        rng_seed=cfg.get("run", "seed", 0, int),
        burn_in=cfg.get("run", "burn_in", 0, int),
        thinning=cfg.get("run", "thinning", 1, int),
        record_every=cfg.get("run", "record_every", None, int),
    )
    stats = simulate(sim)
    out = stats.to_dict()
    if stats.visit_frequencies is not None and n <= N_MAX_TRANSIENT:
        _, phi, sigma = _table_and_potential(cfg, n)
        out["tv_to_stationary"] = exact_stationary(phi, sigma).total_variation(stats.visit_frequencies)
    if output_path(cfg):
        atomic_write(output_path(cfg), json_text({"config": cfg.digest(), "version": __version__, **out}))
    series_path = output_path(cfg, "series")
    if series_path:
        names = [m.name or f"m{k + 1}" for k, m in enumerate(getattr(getattr(U, "motif_model", U), "motifs", ()) or ())]
        atomic_write(series_path, csv_text(cfg.header(), ["event", "time", *[f"density_{x}" for x in names]], stats.series))
    return out


def cmd_exact_stationary(cfg: RunConfig) -> dict:
    from .dynamics import exact_stationary
    from .network import DirectedNetwork

    n = cfg.get("model", "n_nodes", None, int)
    if n is None:
        if cfg.kind != "table":
            raise ConfigError("missing [model] n_nodes")
        n = read_utility_csv(cfg.require("model", "utilities")).n_nodes
    _, phi, sigma = _table_and_potential(cfg, n)
    pi = exact_stationary(phi, sigma)
    rows = [(DirectedNetwork(n, g).to_hex(), p) for g, p in enumerate(pi.probabilities)]
    if output_path(cfg):
        atomic_write(output_path(cfg), csv_text(cfg.header(), ["network_hex", "probability"], rows))
    top = int(np.argmax(pi.probabilities))
    return {"n_states": len(rows), "mode": DirectedNetwork(n, top).to_text(),
            "mode_probability": float(pi.probabilities[top])}


def cmd_transient(cfg: RunConfig) -> dict:
    from .dynamics import SimConfig, exact_stationary, total_variation, transient_distribution
    from .network import N_MAX_TRANSIENT, DirectedNetwork, n_networks

    n = cfg.require("model", "n_nodes", int)
    if n > N_MAX_TRANSIENT:
        raise InfeasibleSizeError(
            f"N={n} gives {n_networks(n)} states; the explicit generator is capped at N={N_MAX_TRANSIENT}"
        )
    table, phi, sigma = _table_and_potential(cfg, n)
    times = parse_list(cfg.require("transient", "times"))
    init = cfg.get("transient", "initial")
    p0 = np.zeros(n_networks(n))
    p0[DirectedNetwork.from_hex(n, init).bits if init else 0] = 1.0
    sim = SimConfig(n, table, sigma=sigma, events=1)
    laws = transient_distribution(p0, times, sim) if times else []
    pi = exact_stationary(phi, sigma).probabilities
    rows = [(t, DirectedNetwork(n, g).to_hex(), p) for t, law in zip(times, laws) for g, p in enumerate(law)]
    if output_path(cfg):
        atomic_write(output_path(cfg), csv_text(cfg.header(), ["time", "network_hex", "probability"], rows))
    return {"times": times, "tv_to_stationary": [total_variation(law, pi) for law in laws]}


def cmd_eap_solve(cfg: RunConfig) -> dict:
    from .meanfield import EAPProblem, solve_eap

    sol = solve_eap(EAPProblem(cfg.motif_model()))
    out = {"rho_star": sol.rho_star, "zeta": sol.zeta, "unique": sol.unique,
           "local_maxima": [list(x) for x in sol.local_maxima]}
    if output_path(cfg):
        atomic_write(output_path(cfg), json_text({"config": cfg.digest(), "version": __version__, **out}))
    return out


def _solve_chunk(task):
    from .meanfield import _path_point, solve_eap

    model, points, kind = task
    return [solve_eap(_path_point(model, p, kind)) for p in points]


def _parallel_solutions(model, path, kind, workers):
    """Per-point solutions, split into contiguous chunks; merged in grid order."""
    if workers <= 1 or len(path) < 2:
        return _solve_chunk((model, path, kind))
    size = -(-len(path) // workers)
    chunks = [path[k:k + size] for k in range(0, len(path), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_solve_chunk, [(model, c, kind) for c in chunks]))
    return [s for part in parts for s in part]


def sweep_orchestrate(cfg: RunConfig) -> tuple[list[str], list[tuple], list[dict]]:
    """Build every sweep series, solve grid points across workers, and merge in grid order."""
    from .meanfield import sweep_phase
    from .motifs import Motif, MotifModel

    start = cfg.require("sweep", "start", float)
    stop = cfg.require("sweep", "stop", float)
    steps = cfg.require("sweep", "steps", int)
    if steps < 0:
        raise ConfigError("[sweep] steps must be >= 0")
    grid = np.linspace(start, stop, steps).tolist() if steps else []
    workers = workers_for(cfg)

    series = []
    chains = cfg.get("sweep", "chain_lengths")
    if chains:
        sigma = cfg.sigma()
        for ell in parse_list(chains, int):
            m = MotifModel((Motif.chain(ell),), (0.0,), sigma)
            series.append((f"chain{ell}", m, [(v,) for v in grid], "values"))
    else:
        model = cfg.motif_model()
        param = cfg.get("sweep", "parameter")
        if param == "sigma":
            series.append(("sigma", model, grid, "sigma"))
        else:
            _, _, names = cfg.motifs()
            if param is None and len(names) == 1:
                param = names[0]
            if param not in names:
                raise ConfigError(f"[sweep] parameter must be 'sigma' or one of {names}, got {param!r}")
            k = names.index(param)
            base = list(model.values)
            path = [tuple(base[:k] + [v] + base[k + 1:]) for v in grid]
            series.append((param, model, path, "values"))

    columns = ["series", "parameter", "rho_star", "zeta", "n_local_maxima", "unique",
               "rho_low", "rho_high", "transition_at"]
    rows, transitions = [], []
    for name, model, path, kind in series:
        if not path:
            continue
        sols = _parallel_solutions(model, path, kind, workers)
        sw = sweep_phase(model, path, kind=kind, parameters=grid, solutions=sols)
        marks = {t.index: t.parameter for t in sw.transitions}
        for k, r in enumerate(sw.rows()):
            rows.append((name, *r, marks.get(k)))
        transitions += [{"series": name, "parameter": t.parameter, "rho_before": t.rho_before,
                         "rho_after": t.rho_after, "gap": t.gap} for t in sw.transitions]
    return columns, rows, transitions


def cmd_phase_sweep(cfg: RunConfig) -> dict:
    columns, rows, transitions = sweep_orchestrate(cfg)
    if output_path(cfg):
        atomic_write(output_path(cfg), csv_text(cfg.header(), columns, rows))
    return {"rows": len(rows), "n_transitions": len(transitions), "transitions": transitions}


def cmd_kernel_solve(cfg: RunConfig) -> dict:
    from .meanfield import solve_kernel

    model = cfg.trade_model().typed_model() if cfg.kind == "trade" else cfg.typed_model()
    sol = solve_kernel(model, max_sweeps=cfg.get("run", "max_sweeps", 500, int))
    L = model.n_types
    rows = [(a, b, sol.kernel.psi[a, b]) for a in range(L) for b in range(L)]
    if output_path(cfg):
        atomic_write(output_path(cfg), csv_text(cfg.header(), ["theta", "theta_prime", "psi"], rows))
    return {"zeta": sol.zeta, "converged": sol.converged, "n_local_optima": len(sol.local_optima),
            "asymmetry": sol.kernel.asymmetry()}


def cmd_trade(cfg: RunConfig) -> dict:
    from .trade import trade_sweep

    model = cfg.trade_model()
    steps = cfg.require("sweep", "v_steps", int)
    if steps < 0:
        raise ConfigError("v_steps must be >= 0")
    grid = np.linspace(cfg.require("sweep", "v_min", float), cfg.require("sweep", "v_max", float), steps).tolist()
    sw = trade_sweep(model, grid, workers=workers_for(cfg))
    out_dir = output_path(cfg, "dir")
    if out_dir:
        atomic_write(os.path.join(out_dir, "total_density.csv"),
                     csv_text(cfg.header(), ["v", "total_density"], sw.density_rows() if grid else []))
        atomic_write(os.path.join(out_dir, "kernel_profile.csv"),
                     csv_text(cfg.header(), ["distance", "psi", "v", "ambiguous"], sw.profile_rows() if grid else []))
    dens = sw.total_density() if grid else np.zeros(0)
    return {"v_points": len(grid), "rings": len(sw.distances), "ring_transitions": sw.n_transitions(),
            "max_total_density_step": float(np.max(np.abs(np.diff(dens)))) if len(dens) > 1 else 0.0}


_DISPATCH = {
    "check-potential": cmd_check_potential,
    "simulate": cmd_simulate,
    "exact-stationary": cmd_exact_stationary,
    "transient": cmd_transient,
    "eap-solve": cmd_eap_solve,
    "phase-sweep": cmd_phase_sweep,
    "kernel-solve": cmd_kernel_solve,
    "trade": cmd_trade,
}


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    """Parse, validate, execute; print one JSON line; return the exit code."""
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if args.subcommand is None:
            raise ConfigError(f"a subcommand is required: {', '.join(SUBCOMMANDS)}")
        cfg = build_config(args)
        if args.subcommand != "trade" or "model" in cfg.raw:
            cfg.validate()
        summary = _DISPATCH[args.subcommand](cfg)
        print(json.dumps({"status": "ok", "subcommand": args.subcommand, "config": cfg.digest(),
                          **_jsonable(summary)}, sort_keys=True), file=stdout)
        return 0
    except NetformError as exc:
        code = exc.exit_code
        err = exc
    except (ValueError, KeyError) as exc:
        code, err = 2, exc
    except (ArithmeticError, FloatingPointError) as exc:
        code, err = 4, exc
    print(json.dumps({"status": "error", "error": type(err).__name__, "message": str(err), "exit_code": code},
                     sort_keys=True), file=stdout)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
