"""``catbond`` command-line interface.

Every subcommand reads an optional flat JSON config (``--config``); flags
given on the command line override config values, and the merged document
is validated against the subcommand's schema before anything runs.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .distributions import FAMILIES, BoundaryFitWarning, TruncatedSeverity, fit_truncated_mle
from .errors import CatbondError, ConfigError, NonConvergence
from .gof import bootstrap_pvalues, gof_statistics
from .ingestion import classify_events, generate_fixture, load_and_adjust, summarize_dependence, write_records
from .models import MODEL_KINDS, analytic_moments, model_from_dict
from .presets import PRESETS, build_models
from .pricing import DEFAULTS, BondSpec, distort_model, mc_price, normal_approx_price, price_surface
from .stochastic import DegenerateIntensityWarning

SCHEMA_VERSION = 1
VERSION = f"v{__version__}"
CLASS_KEYS = ("all1", "all2", "only1", "only2", "total_common", "common1", "common2")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_SEED = {"type": "integer", "minimum": 0}
_THREADS = {"type": "integer", "minimum": 1}
_PATH = {"type": "string", "minLength": 1}
_GRID = {"oneOf": [{"type": "string"}, {"type": "number"}, {"type": "array", "items": _NUM, "minItems": 1}]}
_BOND = {"t": _POS, "r": _NUM, "c": {"type": "number", "minimum": 0, "maximum": 1}}
_SOURCE = {"fit": _PATH, "preset": {"enum": sorted(PRESETS)}}
_MODEL = {"enum": sorted(MODEL_KINDS)}
_MODEL_OR_ALL = {"enum": sorted(MODEL_KINDS) + ["all"]}

SCHEMAS = {
    "fit": {
        "data": _PATH,
        "region1": {"type": "string"},
        "region2": {"type": "string"},
        "window_years": _POS,
        "truncation": {"type": "number", "minimum": 0},
        "families": {"type": "array", "items": {"enum": sorted(FAMILIES)}, "minItems": 1},
        "reps": {"type": "integer", "minimum": 0},
        "seed": _SEED,
        "threads": _THREADS,
        "out": _PATH,
    },
    "price": {
        **_SOURCE,
        **_BOND,
        "model": _MODEL_OR_ALL,
        "d1": _POS,
        "d2": _POS,
        "method": {"enum": ["mc", "normal", "both"]},
        "lam": {"type": "number", "maximum": 0},
        "sims": {"type": "integer", "minimum": 100},
        "seed": _SEED,
        "threads": _THREADS,
        "out": _PATH,
    },
    "surface": {
        **_SOURCE,
        **_BOND,
        "model": _MODEL,
        "d1": _GRID,
        "d2": _GRID,
        "method": {"enum": ["mc", "normal"]},
        "sims": {"type": "integer", "minimum": 100},
        "seed": _SEED,
        "threads": _THREADS,
        "out": _PATH,
        "report": _PATH,
    },
    "wang": {
        **_SOURCE,
        **_BOND,
        "model": _MODEL_OR_ALL,
        "d1": _POS,
        "d2": _POS,
        "lambdas": _GRID,
        "sims": {"type": "integer", "minimum": 100},
        "seed": _SEED,
        "threads": _THREADS,
        "out": _PATH,
        "report": _PATH,
    },
    "generate-fixture": {
        "preset": {"enum": sorted(PRESETS)},
        "window_years": _POS,
        "scale": {"type": "integer", "minimum": 1},
        "truncation": {"type": "number", "exclusiveMinimum": 0},
        "seed": _SEED,
        "out": _PATH,
    },
}

_BOND_DEFAULTS = {"t": DEFAULTS["maturity"], "r": DEFAULTS["rate"], "c": DEFAULTS["recovery"]}
COMMAND_DEFAULTS = {
    "fit": {"truncation": 0.025, "families": sorted(FAMILIES), "reps": 1000, "seed": 0},
    "price": {**_BOND_DEFAULTS, "model": "all", "method": "both", "lam": 0.0, "sims": DEFAULTS["n_sims"], "seed": 0},
    "surface": {**_BOND_DEFAULTS, "method": "mc", "sims": DEFAULTS["n_sims"], "seed": 0},
    "wang": {**_BOND_DEFAULTS, "model": "all", "lambdas": "0,-0.25,-0.5,-0.75,-1", "sims": DEFAULTS["n_sims"],
             "seed": 0},
    "generate-fixture": {"window_years": 29.4, "scale": 1, "truncation": 0.025, "seed": 0},
}
REQUIRED = {
    "fit": ["data", "region1", "region2", "window_years"],
    "price": ["model", "d1", "d2"],
    "surface": ["model", "d1", "d2"],
    "wang": ["d1", "d2", "lambdas"],
    "generate-fixture": ["preset", "out"],
}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _schema(command: str) -> dict:
    return {
        "type": "object",
        "properties": SCHEMAS[command],
        "required": REQUIRED[command],
        "additionalProperties": False,
    }


def _format_path(error: jsonschema.ValidationError) -> str:
    path = "/".join(str(p) for p in error.absolute_path)
    return f"/{path}" if path else "/"


def validate_config(command: str, doc: dict) -> None:
    validator = jsonschema.Draft7Validator(_schema(command))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"config error at {_format_path(err)}: {err.message}")


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config error at /: top level must be an object")
    return doc


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit flags; validated."""
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "func")}
    doc = dict(COMMAND_DEFAULTS[command])
    if getattr(args, "config", None):
        doc.update(load_config(args.config))
    doc.update(flags)
    validate_config(command, doc)
    if command in ("price", "surface", "wang") and ("fit" in doc) == ("preset" in doc):
        raise ConfigError("config error at /: give exactly one of 'fit' or 'preset'")
    return doc


def parse_grid(spec) -> np.ndarray:
    """``"a:b:step"`` (inclusive), ``"x,y,z"``, a number, or a list."""
    if isinstance(spec, (int, float)):
        return np.array([float(spec)])
    if isinstance(spec, list):
        return np.array(spec, dtype=float)
    text = spec.strip()
    try:
        if ":" in text:
            parts = [float(v) for v in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ValueError
            start, stop, step = parts
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return np.round(start + step * np.arange(n), 12)
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise ConfigError(f"config error: cannot parse grid {spec!r}; use start:stop:step or a comma list") from None


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _threads(doc) -> int:
    return int(doc.get("threads") or os.cpu_count() or 1)


def _write(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _dump(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def load_fit_report(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read fit report {path}: {exc}") from exc
    if doc.get("schema_version") != SCHEMA_VERSION or "models" not in doc:
        raise ConfigError(f"{path} is not a version-{SCHEMA_VERSION} fit report")
    return doc


def load_models(doc: dict) -> dict:
    """Models from the ``fit`` report or the named ``preset``."""
    if "fit" in doc:
        report = load_fit_report(doc["fit"])
        return {k: model_from_dict(v) for k, v in report["models"].items()}
    return build_models(doc["preset"])


def _select(models: dict, name: str) -> dict:
    if name == "all":
        return models
    return {name: models[name]}


def _bond(doc, d1=1.0, d2=1.0) -> BondSpec:
    try:
        return BondSpec(float(doc["t"]), float(doc["r"]), float(doc["c"]), float(d1), float(d2))
    except ValueError as exc:
        raise ConfigError(f"config error: {exc}") from exc


def _source(doc) -> dict:
    return {"fit": doc["fit"]} if "fit" in doc else {"preset": doc["preset"]}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _fit_class(name, sample, families, truncation, reps, seed, workers):
    candidates = {}
    best = None
    for fam in families:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BoundaryFitWarning)
                fitted = fit_truncated_mle(sample, fam, truncation)
        except NonConvergence as exc:
            candidates[fam] = {"error": str(exc)}
            continue
        report = gof_statistics(sample, TruncatedSeverity(fitted, truncation))
        candidates[fam] = {"params": fitted.params(), "gof": report.to_dict()}
        if best is None or report.ks < best[1].ks:
            best = (fitted, report)
    if best is None:
        raise NonConvergence(f"no candidate family could be fitted to {name}")
    fitted = best[0]
    if reps > 0:
        pv = bootstrap_pvalues(sample, fitted.name, truncation, reps, seed, fitted=fitted, workers=workers)
        candidates[fitted.name]["gof"] = pv.to_dict()
    return fitted, {"n": int(sample.size), "selected": fitted.name, "candidates": candidates}


def cmd_fit(doc: dict) -> dict:
    """Fit-report document for a loss file."""
    started = time.perf_counter()
    r1, r2 = doc["region1"], doc["region2"]
    truncation = float(doc["truncation"])
    reps = int(doc["reps"])
    if 0 < reps < 100:
        raise ConfigError("config error at /reps: use 0 (no bootstrap) or at least 100")
    records = load_and_adjust(doc["data"], r1, r2, truncation)
    classified = classify_events(records, r1, r2, float(doc["window_years"]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateIntensityWarning)
        dependence = summarize_dependence(classified)
    samples = classified.samples()
    classes, selected = {}, {}
    root = np.random.SeedSequence(int(doc["seed"]))
    for idx, key in enumerate(CLASS_KEYS):
        seed = np.random.SeedSequence(root.entropy, spawn_key=(idx,))
        selected[key], classes[key] = _fit_class(
            key, samples[key], doc["families"], truncation, reps, seed, _threads(doc)
        )
    parameters = {
        "regions": [r1, r2],
        "intensity": {k: v.rate for k, v in dependence.intensities.items()},
        "severity": {k: {"family": f.name, "params": f.params()} for k, f in selected.items()},
        "p": dependence.mean_share_p,
        "spearman_rho": dependence.spearman_rho,
    }
    models = build_models(parameters, truncation)
    return {
        "schema_version": SCHEMA_VERSION,
        "regions": [r1, r2],
        "window_years": float(doc["window_years"]),
        "truncation": truncation,
        "counts": classified.counts(),
        "classes": classes,
        "dependence": dependence.to_dict(),
        "parameters": parameters,
        "models": {k: m.to_dict() for k, m in models.items()},
        "run": {
            "version": VERSION,
            "seed": int(doc["seed"]),
            "bootstrap_reps": reps,
            "timing_seconds": time.perf_counter() - started,
        },
    }


def cmd_price(doc: dict) -> dict:
    started = time.perf_counter()
    lam = float(doc["lam"])
    bond = _bond(doc, doc["d1"], doc["d2"])
    results = {}
    for name, model in _select(load_models(doc), doc["model"]).items():
        entry = {}
        if doc["method"] in ("mc", "both"):
            est = mc_price(distort_model(model, lam), bond, int(doc["sims"]), int(doc["seed"]),
                           workers=_threads(doc))
            entry["mc"] = {"price": est.price, "std_error": est.std_error, "trigger_prob": est.trigger_probability}
        if doc["method"] in ("normal", "both"):
            if lam != 0:
                raise ConfigError("config error at /lam: the normal approximation is undistorted; use method mc")
            est = normal_approx_price(analytic_moments(model, bond.maturity), bond)
            entry["normal"] = {"price": est.price, "std_error": 0.0, "trigger_prob": est.trigger_probability}
        results[name] = entry
    return {
        "source": _source(doc),
        "bond": {"T": bond.maturity, "r": bond.rate, "c": bond.recovery, "D1": bond.threshold1,
                 "D2": bond.threshold2},
        "lambda": lam,
        "sims": int(doc["sims"]),
        "prices": results,
        "run": {"version": VERSION, "seed": int(doc["seed"]), "timing_seconds": time.perf_counter() - started},
    }


def cmd_surface(doc: dict) -> tuple[str, dict]:
    """Surface CSV text and its JSON report envelope."""
    started = time.perf_counter()
    g1, g2 = parse_grid(doc["d1"]), parse_grid(doc["d2"])
    model = load_models(doc)[doc["model"]]
    bond = _bond(doc, g1[0] if g1.size else 1.0, g2[0] if g2.size else 1.0)
    try:
        surface = price_surface(model, bond, g1, g2, doc["method"], n_sims=int(doc["sims"]), seed=int(doc["seed"]),
                                workers=_threads(doc))
    except ValueError as exc:
        raise ConfigError(f"config error: {exc}") from exc
    n_sims = int(doc["sims"]) if doc["method"] == "mc" else 0
    header = f"model={doc['model']} method={doc['method']} T={bond.maturity!r} r={bond.rate!r} c={bond.recovery!r} " \
             f"sims={n_sims} seed={int(doc['seed'])} version={VERSION}"
    report = {
        "source": _source(doc),
        "model": model.to_dict(),
        "method": doc["method"],
        "bond": {"T": bond.maturity, "r": bond.rate, "c": bond.recovery},
        "grid1": g1.tolist(),
        "grid2": g2.tolist(),
        "sims": n_sims,
        "run": {"version": VERSION, "seed": int(doc["seed"]), "timing_seconds": time.perf_counter() - started},
    }
    return surface.to_csv(header), report


WANG_COLUMNS = ("model", "lambda", "D1", "D2", "price", "std_error", "trigger_prob")


def cmd_wang(doc: dict) -> tuple[str, dict]:
    started = time.perf_counter()
    lambdas = parse_grid(doc["lambdas"])
    if np.any(lambdas > 0):
        raise ConfigError("config error at /lambdas: loss distortions use lambda <= 0")
    bond = _bond(doc, doc["d1"], doc["d2"])
    rows = []
    for name, model in _select(load_models(doc), doc["model"]).items():
        for lam in lambdas:
            est = mc_price(distort_model(model, float(lam)), bond, int(doc["sims"]), int(doc["seed"]),
                           workers=_threads(doc))
            rows.append((name, float(lam), bond.threshold1, bond.threshold2, est.price, est.std_error,
                         est.trigger_probability))
    lines = [f"# model={doc['model']} T={bond.maturity!r} r={bond.rate!r} c={bond.recovery!r} "
             f"sims={int(doc['sims'])} seed={int(doc['seed'])} version={VERSION}",
             ",".join(WANG_COLUMNS)]
    lines += [",".join([r[0]] + [repr(v) for v in r[1:]]) for r in rows]
    report = {
        "source": _source(doc),
        "models": sorted({r[0] for r in rows}),
        "lambdas": lambdas.tolist(),
        "bond": {"T": bond.maturity, "r": bond.rate, "c": bond.recovery, "D1": bond.threshold1,
                 "D2": bond.threshold2},
        "sims": int(doc["sims"]),
        "run": {"version": VERSION, "seed": int(doc["seed"]), "timing_seconds": time.perf_counter() - started},
    }
    return "\n".join(lines) + "\n", report


def cmd_generate_fixture(doc: dict) -> int:
    preset = PRESETS[doc["preset"]]
    scale = int(doc["scale"])
    counts = {k: scale * v for k, v in preset["counts"].items()}
    records = generate_fixture(preset, float(doc["window_years"]) * scale, int(doc["seed"]), counts,
                               float(doc["truncation"]))
    write_records(records, doc["out"])
    return len(records)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _families(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add(p: argparse.ArgumentParser, *names, **kw):
    p.add_argument(*names, default=argparse.SUPPRESS, **kw)


def _add_bond(p):
    _add(p, "--t", type=float, help="maturity in years (default 2)")
    _add(p, "--r", type=float, help="continuously compounded rate (default 0.03)")
    _add(p, "--c", type=float, help="recovery fraction in [0, 1] (default 0)")


def _add_source(p):
    _add(p, "--fit", help="fit-report JSON produced by 'catbond fit'")
    _add(p, "--preset", choices=sorted(PRESETS), help="built-in parameter set instead of a fit report")


def _add_run(p, sims=True):
    if sims:
        _add(p, "--sims", type=int, help="Monte Carlo paths (default 20000)")
    _add(p, "--seed", type=int, help="root seed (default 0)")
    _add(p, "--threads", type=int, help="worker cap (default: all cores); results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catbond", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"catbond {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit severities, intensities and dependence from a loss file")
    p.add_argument("--config", help="JSON config; flags override its values")
    _add(p, "--data", help="loss CSV (event_id,date,region,loss_usd_billions,cpi_factor)")
    _add(p, "--region1")
    _add(p, "--region2")
    _add(p, "--window-years", dest="window_years", type=float, help="length of the observation window")
    _add(p, "--truncation", type=float, help="reporting threshold in billions (default 0.025)")
    _add(p, "--families", type=_families, help="comma list of candidate families (default: all)")
    _add(p, "--reps", type=int, help="bootstrap replicates per class, 0 to skip (default 1000)")
    _add_run(p, sims=False)
    _add(p, "--out", help="write the JSON report here instead of stdout")

    p = sub.add_parser("price", help="price one bond under one or all models")
    p.add_argument("--config")
    _add_source(p)
    _add(p, "--model", choices=sorted(MODEL_KINDS) + ["all"])
    _add_bond(p)
    _add(p, "--d1", type=float, help="region-1 threshold (billions)")
    _add(p, "--d2", type=float, help="region-2 threshold (billions)")
    _add(p, "--method", choices=["mc", "normal", "both"])
    _add(p, "--lambda", dest="lam", type=float, help="Wang parameter applied to severities (<= 0)")
    _add_run(p)
    _add(p, "--out")

    p = sub.add_parser("surface", help="price surface over a threshold grid (CSV)")
    p.add_argument("--config")
    _add_source(p)
    _add(p, "--model", choices=sorted(MODEL_KINDS))
    _add_bond(p)
    _add(p, "--d1", help="grid start:stop:step or comma list")
    _add(p, "--d2", help="grid start:stop:step or comma list")
    _add(p, "--method", choices=["mc", "normal"])
    _add_run(p)
    _add(p, "--out", help="CSV path (default stdout)")
    _add(p, "--report", help="JSON report path (default <out>.json)")

    p = sub.add_parser("wang", help="prices under Wang-distorted severities (CSV)")
    p.add_argument("--config")
    _add_source(p)
    _add(p, "--model", choices=sorted(MODEL_KINDS) + ["all"])
    _add_bond(p)
    _add(p, "--d1", type=float)
    _add(p, "--d2", type=float)
    _add(p, "--lambdas", help="comma list of lambdas <= 0")
    _add_run(p)
    _add(p, "--out")
    _add(p, "--report")

    p = sub.add_parser("generate-fixture", help="write a synthetic loss file from a preset")
    p.add_argument("--config")
    _add(p, "--preset", choices=sorted(PRESETS))
    _add(p, "--window-years", dest="window_years", type=float)
    _add(p, "--scale", type=int, help="multiply event counts and window length (default 1)")
    _add(p, "--truncation", type=float)
    _add(p, "--seed", type=int)
    _add(p, "--out")
    return parser


def _run(args) -> None:
    doc = resolve_config(args.command, args)
    if args.command == "fit":
        _write(_dump(cmd_fit(doc)), doc.get("out"))
    elif args.command == "price":
        _write(_dump(cmd_price(doc)), doc.get("out"))
    elif args.command in ("surface", "wang"):
        text, report = (cmd_surface if args.command == "surface" else cmd_wang)(doc)
        _write(text, doc.get("out"))
        report_path = doc.get("report") or (f"{doc['out']}.json" if doc.get("out") else None)
        if report_path:
            _write(_dump(report), report_path)
    else:
        n = cmd_generate_fixture(doc)
        print(f"wrote {n} records to {doc['out']}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _run(args)
    except CatbondError as exc:
        print(f"catbond: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
