"""Command-line surface: fit, bench, diagnose and oracle subcommands.

Configuration is a flat ``key = value`` text file; command-line flags
override file values (later wins).  Result documents are JSON objects with
stable key order; every float is serialized with 17 significant digits.
Exit codes: 0 success, 2 config error, 3 data error, 4 diverged fit.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import diagnostics
from .core import STATUS_CONVERGED, STATUS_DIVERGED, VariantConfig, run_fit
from .errors import ConfigurationError, DataError, EmkitError, InvalidParameterError
from .models import GaussianMixture, PoissonMixture
from .params import StoppingRule
from .rng import INIT, RngStream
from .variants import SAEM2_DEFAULT, SAEM_DEFAULT, AnnealingSchedule, DRIVERS

SEED_ENV_VAR = "EMKIT_SEED"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

_KNOWN_KEYS = {
    "data",
    "model.family",
    "model.k",
    "variant",
    "seed",
    "init",
    "init.restarts",
    "init.values",
    "out",
    "trace",
    "stop.max_iters",
    "stop.tol_param",
    "stop.tol_loglik",
    "stop.mode",
    "schedule.kind",
    "schedule.value",
    "schedule.exponent",
    "schedule.delay",
    "schedule.m",
    "schedule.m_growth",
    "bench.variants",
    "diagnose.result",
    "diagnose.theta",
}

_VARIANT_OPTION_TYPES = {
    "gem_ascent_steps": int,
    "guard_slack": float,
    "aem_line_tol": float,
    "aem_max_bracket": int,
    "aem_force_unit_step": bool,
    "aem_reset_history": bool,
    "blocks": list,
    "sage_cycle_order": list,
    "incremental_batch": int,
    "sparse_threshold": float,
    "sparse_refresh_period": int,
    "m": int,
    "kernel": str,
    "mh_steps": int,
    "burn_in_frac": float,
}


# --------------------------------------------------------------------------
# serialization: stable key order, 17 significant digits
# --------------------------------------------------------------------------


def _json_escape(s: str) -> str:
    import json

    return json.dumps(s)


def to_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {_json_escape(str(k))}: {to_json(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[" + ", ".join(to_json(v, indent) for v in seq) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format(float(obj), ".17g")
    if obj is None:
        return "null"
    return _json_escape(str(obj))


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------


def parse_config_file(path: str) -> dict:
    raw = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        raw[key] = value
    return raw


def validate_keys(raw: dict) -> None:
    for key in raw:
        ok = key in _KNOWN_KEYS or key.startswith("grid.") or (
            key.startswith("variant.") and key.split(".", 1)[1] in _VARIANT_OPTION_TYPES
        )
        if not ok:
            raise ConfigurationError(f"unknown configuration key {key!r}")


def _build_schedule(raw: dict, variant: str):
    keys = [k for k in raw if k.startswith("schedule.")]
    if not keys:
        return SAEM2_DEFAULT if variant == "saem2" else SAEM_DEFAULT
    kw = {}
    if "schedule.kind" in raw:
        kw["kind"] = raw["schedule.kind"]
    if "schedule.value" in raw:
        kw["value"] = float(raw["schedule.value"])
    if "schedule.exponent" in raw:
        kw["exponent"] = float(raw["schedule.exponent"])
    if "schedule.delay" in raw:
        kw["delay"] = int(raw["schedule.delay"])
    if "schedule.m" in raw:
        kw["m_value"] = int(raw["schedule.m"])
    if "schedule.m_growth" in raw:
        kw["m_growth"] = raw["schedule.m_growth"]
    return AnnealingSchedule(**kw)


def build_run(raw: dict):
    """Turn a validated raw key/value map into model, config and run inputs."""
    validate_keys(raw)
    if "data" not in raw:
        raise ConfigurationError("missing required key 'data'")
    data = load_data(raw["data"])

    family = raw.get("model.family", "gmm")
    k = int(raw.get("model.k", "1"))
    if family == "gmm":
        model = GaussianMixture(data, k)
    elif family == "poisson":
        model = PoissonMixture(data, k)
    else:
        raise ConfigurationError(f"unknown model.family {family!r}")

    variant = raw.get("variant", "em")
    if variant not in DRIVERS:
        raise ConfigurationError(f"unknown variant {variant!r}")
    options = {}
    for key, value in raw.items():
        if not key.startswith("variant."):
            continue
        name = key.split(".", 1)[1]
        typ = _VARIANT_OPTION_TYPES[name]
        if typ is bool:
            options[name] = value.lower() in ("1", "true", "yes")
        elif typ is list:
            options[name] = [v.strip() for v in value.split(",")]
        else:
            options[name] = typ(value)
    if variant in ("saem", "saem2"):
        options["schedule"] = _build_schedule(raw, variant)
    if variant == "mcem" and any(key.startswith("schedule.") for key in raw):
        options["m_schedule"] = _build_schedule(raw, variant)

    stop = StoppingRule(
        max_iters=int(raw.get("stop.max_iters", "500")),
        tol_param=float(raw.get("stop.tol_param", "1e-8")),
        tol_loglik=float(raw.get("stop.tol_loglik", "1e-8")),
        mode=raw.get("stop.mode", "any"),
    )
    if "seed" in raw:
        seed = int(raw["seed"])
    else:
        seed = int(os.environ.get(SEED_ENV_VAR, "0"))
    return model, VariantConfig(variant, options), stop, seed


def load_data(path: str) -> np.ndarray:
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}")
    values = []
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise DataError(f"{path}:{lineno}: malformed observation {line!r}")
    if not values:
        raise DataError(f"{path}: no observations")
    return np.array(values)


def initial_params(model, raw: dict, seed: int, restart: int):
    mode = raw.get("init", "random")
    if mode == "values":
        if "init.values" not in raw:
            raise ConfigurationError("init = values needs init.values")
        vals = np.array([float(v) for v in raw["init.values"].split(",")])
        template = model.param_template()
        if vals.size != len(template):
            raise ConfigurationError(f"init.values needs {len(template)} numbers")
        return template.with_values(vals)
    if mode != "random":
        raise ConfigurationError(f"unknown init mode {mode!r}")
    gen = RngStream(seed).generator(INIT, restart)
    data = model.data
    if isinstance(model, GaussianMixture):
        w = gen.dirichlet(np.ones(model.k))
        means = gen.uniform(data.min(), data.max(), size=model.k)
        variances = float(np.var(data) + 1e-3) * gen.uniform(0.5, 2.0, size=model.k)
        return model.make_params(w / w.sum(), means, variances)
    w = gen.dirichlet(np.ones(model.k))
    rates = gen.uniform(0.1, data.max() + 1.0, size=model.k)
    return model.make_params(w / w.sum(), rates)


# --------------------------------------------------------------------------
# output documents
# --------------------------------------------------------------------------


def write_trace(path: str, trace) -> None:
    names = trace.records[0].theta.coord_names()
    with open(path, "w") as fh:
        fh.write(",".join(["iter", "L"] + names) + "\n")
        fh.flush()
        for rec in trace.records:
            row = [str(rec.n), fmt_float(rec.loglik)] + [fmt_float(v) for v in rec.theta.values]
            fh.write(",".join(row) + "\n")
            fh.flush()


def result_document(raw: dict, trace, seed: int, trace_path) -> dict:
    theta = trace.final_params
    doc = {
        "config": {k: raw[k] for k in sorted(raw)},
        "seed": seed,
        "variant": trace.variant,
        "status": trace.status,
        "iterations": trace.n_iters,
        "final_loglik": trace.final_loglik,
        "final_params": {name: theta.block(name).tolist() for name in theta.block_names()},
        "trace_file": trace_path,
        "trace_rows": len(trace.records),
    }
    if trace.stationary is not None:
        doc["stationary"] = {
            "burn_in": trace.stationary.burn_in,
            "mean": trace.stationary.mean.tolist(),
            "std": trace.stationary.std.tolist(),
        }
    return doc


def _emit(doc: dict, out_path) -> None:
    text = to_json(doc) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _merged_raw(args) -> dict:
    raw = parse_config_file(args.config) if args.config else {}
    for key, attr in (
        ("data", "data"),
        ("variant", "variant"),
        ("seed", "seed"),
        ("out", "out"),
        ("trace", "trace"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            raw[key] = str(value)
    if getattr(args, "max_iters", None) is not None:
        raw["stop.max_iters"] = str(args.max_iters)
    if getattr(args, "tol", None) is not None:
        raw["stop.tol_param"] = str(args.tol)
        raw["stop.tol_loglik"] = str(args.tol)
    return raw


def _run_best_fit(model, raw, config, stop, seed):
    restarts = int(raw.get("init.restarts", "1"))
    if restarts < 1:
        raise ConfigurationError("init.restarts must be >= 1")
    best = None
    for r in range(restarts):
        theta0 = initial_params(model, raw, seed, r)
        try:
            trace = run_fit(model, config, theta0, stop, seed)
        except InvalidParameterError:
            continue
        if trace.status == STATUS_DIVERGED:
            candidate_ok = False
        else:
            candidate_ok = True
        if best is None or (candidate_ok and (not best[1] or trace.final_loglik > best[0].final_loglik)):
            best = (trace, candidate_ok)
    if best is None:
        raise ConfigurationError("no restart produced a valid starting point")
    return best[0]


def cmd_fit(args) -> int:
    raw = _merged_raw(args)
    model, config, stop, seed = build_run(raw)
    trace = _run_best_fit(model, raw, config, stop, seed)
    trace_path = raw.get("trace")
    if trace_path:
        write_trace(trace_path, trace)
    _emit(result_document(raw, trace, seed, trace_path), raw.get("out"))
    return EXIT_DIVERGED if trace.status in (STATUS_DIVERGED, "invalid-param") else EXIT_OK


def cmd_bench(args) -> int:
    raw = _merged_raw(args)
    if "bench.variants" not in raw:
        raise ConfigurationError("bench needs bench.variants")
    variants = [v.strip() for v in raw["bench.variants"].split(",")]
    runs = []
    for variant in variants:  # validate every member before running anything
        member = dict(raw)
        member["variant"] = variant
        runs.append((variant, member, build_run(member)))
    rows = []
    for variant, member, (model, config, stop, seed) in runs:
        t0 = time.perf_counter()
        trace = _run_best_fit(model, member, config, stop, seed)
        wall = time.perf_counter() - t0
        try:
            rate = diagnostics.observed_rate(trace.thetas(), trace.final_params.values)
        except ValueError:
            rate = float("nan")
        rows.append(
            {
                "variant": variant,
                "iterations": trace.n_iters,
                "final_loglik": trace.final_loglik,
                "status": trace.status,
                "observed_rate": rate,
                "wall_time": wall,
            }
        )
    header = f"{'variant':<12} {'iters':>6} {'final_L':>24} {'rate':>12} {'seconds':>10}  status"
    print(header)
    for row in rows:
        print(
            f"{row['variant']:<12} {row['iterations']:>6} {fmt_float(row['final_loglik']):>24} "
            f"{row['observed_rate']:>12.4g} {row['wall_time']:>10.4f}  {row['status']}"
        )
    if raw.get("out"):
        # wall time stays off the file so replays are byte-identical
        doc = {"rows": [{k: v for k, v in row.items() if k != "wall_time"} for row in rows]}
        with open(raw["out"], "w") as fh:
            fh.write(to_json(doc) + "\n")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    raw = _merged_raw(args)
    if args.result:
        raw["diagnose.result"] = args.result
    if args.theta:
        raw["diagnose.theta"] = args.theta
    model, config, stop, seed = build_run(raw)
    if "diagnose.theta" in raw:
        values = np.array([float(v) for v in raw["diagnose.theta"].split(",")])
        theta = model.param_template().with_values(values)
    elif "diagnose.result" in raw:
        import json

        with open(raw["diagnose.result"]) as fh:
            doc = json.load(fh)
        if doc.get("status") != STATUS_CONVERGED:
            raise ConfigurationError(
                "diagnose needs a converged result; rerun the fit with a tighter tolerance"
            )
        blocks = doc["final_params"]
        values = np.concatenate([np.asarray(blocks[name], dtype=float) for name in blocks])
        theta = model.param_template().with_values(values)
    else:
        raise ConfigurationError("diagnose needs --result or --theta")
    model.check(theta)
    try:
        diag = diagnostics.speed_matrix(model, theta)
    except ValueError as exc:
        raise ConfigurationError(f"{exc}; rerun the fit with a tighter tolerance")
    f_eigs = np.linalg.eigvalsh((diag.F_post + diag.F_post.T) / 2)
    doc = {
        "speed_matrix": [list(row) for row in diag.S],
        "eigenvalues_re": [float(e.real) for e in diag.eigenvalues],
        "eigenvalues_im": [float(e.imag) for e in diag.eigenvalues],
        "global_speed": diag.global_speed,
        "predicted_rate": diag.predicted_rate,
        "posterior_fisher_min_eig": float(f_eigs.min()),
        "posterior_fisher_psd": bool(f_eigs.min() > -1e-6 * max(1.0, float(f_eigs.max()))),
        "information_identity_residual": diag.info_identity_residual,
        "fixed_point_cross_check_rel_error": diag.cross_check_rel_error,
    }
    _emit(doc, raw.get("out"))
    return EXIT_OK


def cmd_oracle(args) -> int:
    raw = _merged_raw(args)
    grid_keys = sorted(k for k in raw if k.startswith("grid."))
    if not grid_keys:
        raise ConfigurationError("oracle needs at least one grid.<axis> key")
    model, config, stop, seed = build_run({k: v for k, v in raw.items() if not k.startswith("grid.")})
    grid = []
    for key in grid_keys:
        axis = key.split(".", 1)[1]
        text = raw[key]
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigurationError(f"{key}: expected start:stop:count")
            start, stop_v, count = float(parts[0]), float(parts[1]), int(parts[2])
            grid.append((axis, np.linspace(start, stop_v, count)))
        else:
            grid.append((axis, np.array([float(v) for v in text.split(",")])))
    result = diagnostics.brute_force_mle(model, grid)
    theta = result.argmax
    doc = {
        "grid": {name: list(vals) for name, vals in result.grid},
        "n_evaluated": result.n_evaluated,
        "max_loglik": result.max_loglik,
        "argmax": {name: theta.block(name).tolist() for name in theta.block_names()},
    }
    _emit(doc, raw.get("out"))
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--data", help="data file: one observation per line, '#' comments")
    p.add_argument("--variant", help="fit driver name")
    p.add_argument("--seed", type=int, help="RNG seed (default 0, or $EMKIT_SEED)")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--tol", type=float, help="sets both stopping tolerances")
    p.add_argument("--out", help="result document path (default stdout)")
    p.add_argument("--trace", help="per-iteration CSV trace path")


def build_parser():
    parser = argparse.ArgumentParser(prog="emkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("fit", cmd_fit), ("bench", cmd_bench), ("oracle", cmd_oracle)):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(fn=fn)
    p = sub.add_parser("diagnose")
    _add_common(p)
    p.add_argument("--result", help="converged result document to diagnose")
    p.add_argument("--theta", help="comma-separated parameter vector")
    p.set_defaults(fn=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigurationError, InvalidParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
