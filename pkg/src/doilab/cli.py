"""Command-line front door for the laboratory.

Every subcommand resolves its configuration from built-in defaults, an
optional --config JSON file, and explicit flags, in that order.  Reports
embed the fully resolved config; the data section is deterministic for a
fixed config, and report files are written atomically.

Exit codes: 0 success, 1 usage or configuration error, 2 assertion
failure (an invariant the run was supposed to certify did not hold).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from .besov import GridSpec, besov_norm_estimate, build_w, default_n_range
from .errors import ConfigError, DoilabError, ZeroPerturbation
from .multiplier import bracket, sample_symbol
from .perturb import (
    EnsembleSpec,
    _trial_seed,
    bound_ratio,
    counterexample_scan,
    ensemble_csv_rows,
    perturbed_pair,
    run_ensemble,
    schatten_report,
    truncation_convergence,
    verify_identity,
)
from .serialize import spectrum_from_file
from .spectral import joint_diagonalize, random_commuting_pair
from .symbols import (
    divided_diff_symbol_var1,
    divided_diff_symbol_var2,
    function_from_config,
    split_symbol_var1,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSERT = 2

_UNSET = object()

_SYMBOL_BUILDERS = {
    "dd2": divided_diff_symbol_var2,
    "dd1": divided_diff_symbol_var1,
    "split1": split_symbol_var1,
}

_FN_PARAM_FLAGS = {
    "a": float,
    "b": float,
    "alpha": float,
    "c": float,
    "i": int,
    "j": int,
    "coeffs": "json",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _intlist(text: str):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floatlist(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _jsonarg(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"expected JSON, got {text!r}: {exc}")


def _err(category: str, message: str):
    print(f"doilab-error: {category}: {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# config resolution


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return obj


def _resolve(args, defaults: dict) -> dict:
    """Defaults, then config file entries, then explicit flags."""
    cfg = dict(defaults)
    cfg.setdefault("out", None)
    cfg.setdefault("format", "json")

    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        unknown = sorted(set(file_cfg) - set(cfg))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(file_cfg)

    for key in cfg:
        if key == "fn":
            continue
        val = getattr(args, key, _UNSET)
        if val is not _UNSET and val is not None:
            cfg[key] = val

    if "fn" in cfg:
        cfg["fn"] = _resolve_fn(args, cfg["fn"])
    if cfg["format"] not in ("json", "csv"):
        raise ConfigError(f"format must be json or csv, got {cfg['format']!r}")
    return cfg


def _resolve_fn(args, base) -> dict:
    if not isinstance(base, dict):
        raise ConfigError(f"fn must be a mapping with a name, got {base!r}")
    fn = dict(base)
    name = getattr(args, "fn", None)
    if name is not None:
        # a fresh name discards parameters meant for the previous function
        fn = {"name": name}
    for key in _FN_PARAM_FLAGS:
        val = getattr(args, f"fn_{key}", None)
        if val is not None:
            fn[key] = val
    return fn


# ---------------------------------------------------------------------------
# report emission


def _flatten(prefix: str, value, into: dict):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, into)
    elif isinstance(value, (list, tuple)):
        into[prefix] = json.dumps(value)
    else:
        into[prefix] = value


def _csv_text(data: dict) -> str:
    if "rows" in data and isinstance(data["rows"], list) and data["rows"]:
        rows = data["rows"]
        header = list(rows[0].keys())
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_csv_cell(row[k]) for k in header))
        return "\n".join(lines) + "\n"
    flat = {}
    _flatten("", data, flat)
    keys = sorted(flat)
    return (
        ",".join(keys)
        + "\n"
        + ",".join(_csv_cell(flat[k]) for k in keys)
        + "\n"
    )


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if any(ch in text for ch in ",\"\n"):
        text = '"' + text.replace('"', '""') + '"'
    return text


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".doilab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _emit(command: str, cfg: dict, data: dict):
    out = cfg.get("out")
    if not out:
        return
    if cfg.get("format") == "csv":
        _atomic_write(out, _csv_text(data))
        return
    report = {
        "command": command,
        "config": {k: v for k, v in cfg.items() if k != "out"},
        "data": data,
        "meta": {"timestamp": datetime.now(timezone.utc).isoformat()},
    }
    _atomic_write(out, json.dumps(report, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# subcommand handlers


_DEFAULT_FN = {"name": "exp2", "a": 1.0, "b": 2.0}


def _make_pairs(cfg):
    pair_a = random_commuting_pair(cfg["n"], _trial_seed(cfg["seed"], 0, 0))
    pair_b = perturbed_pair(pair_a, cfg["perturbScale"], _trial_seed(cfg["seed"], 0, 1))
    return pair_a, pair_b


def _cmd_verify_identity(args) -> int:
    cfg = _resolve(
        args,
        {"n": 8, "seed": 0, "tol": 1e-9, "perturbScale": 0.1, "fn": dict(_DEFAULT_FN)},
    )
    f = function_from_config(cfg["fn"])
    pair_a, pair_b = _make_pairs(cfg)
    rep = verify_identity(pair_a, pair_b, f, cfg["tol"])
    data = {
        "lhsNorm": rep.lhs_norm,
        "rhsNorm": rep.rhs_norm,
        "absResidual": rep.abs_residual,
        "relResidual": rep.rel_residual,
        "termNorms": list(rep.term_norms),
        "tol": rep.tol,
        "passed": rep.passed,
    }
    _emit("verify-identity", cfg, data)
    status = "PASS" if rep.passed else "FAIL"
    print(f"{status} relResidual={rep.rel_residual:.6e} tol={rep.tol:g}")
    if not rep.passed:
        _err("assertion", f"identity residual {rep.rel_residual:.6e} exceeds {rep.tol:g}")
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_bound_ratio(args) -> int:
    cfg = _resolve(
        args,
        {
            "n": 8,
            "seed": 0,
            "perturbScale": 0.1,
            "fn": dict(_DEFAULT_FN),
            "L": GridSpec.L,
            "N": GridSpec.N,
            "sharpness": 1.0,
        },
    )
    f = function_from_config(cfg["fn"])
    pair_a, pair_b = _make_pairs(cfg)
    rep = bound_ratio(
        pair_a, pair_b, f, {"L": cfg["L"], "N": cfg["N"], "sharpness": cfg["sharpness"]}
    )
    data = {
        "deviationNorm": rep.deviation_norm,
        "factor1": rep.factors[0],
        "factor2": rep.factors[1],
        "besovG1": rep.besov_g1,
        "besovG2": rep.besov_g2,
        "ratio": rep.ratio,
        "ratioMaxG": rep.ratio_max_g,
        "grid": {"L": rep.grid_spec.L, "N": rep.grid_spec.N},
    }
    _emit("bound-ratio", cfg, data)
    print(
        f"ratio={rep.ratio:.6g} ratioMaxG={rep.ratio_max_g:.6g} "
        f"deviationNorm={rep.deviation_norm:.6g} factors=({rep.factors[0]:.6g},{rep.factors[1]:.6g})"
    )
    finite = all(
        math.isfinite(v)
        for v in (rep.deviation_norm, *rep.factors, rep.besov_g1, rep.besov_g2, rep.ratio)
    )
    if not finite:
        _err("assertion", "bound report contains non-finite components")
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_schatten(args) -> int:
    cfg = _resolve(
        args,
        {
            "n": 8,
            "seed": 0,
            "perturbScale": 0.1,
            "fn": dict(_DEFAULT_FN),
            "p": [1.0, 2.0],
        },
    )
    f = function_from_config(cfg["fn"])
    pair_a, pair_b = _make_pairs(cfg)
    rows = []
    for p in cfg["p"]:
        rep = schatten_report(pair_a, pair_b, f, p)
        rows.append(
            {
                "p": rep.p,
                "numerator": rep.numerator,
                "denominator": rep.denominator,
                "ratio": rep.ratio,
                "hypFactor1": rep.hyp_factors[0],
                "hypFactor2": rep.hyp_factors[1],
            }
        )
    data = {"rows": rows}
    _emit("schatten", cfg, data)
    for row in rows:
        print(f"p={row['p']:g} ratio={row['ratio']:.6g} numerator={row['numerator']:.6g}")
    if not all(math.isfinite(row["ratio"]) for row in rows):
        _err("assertion", "non-finite Schatten ratio")
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_besov_norm(args) -> int:
    cfg = _resolve(
        args,
        {
            "fn": {"name": "exp2", "a": 3.0, "b": 4.0},
            "L": GridSpec.L,
            "N": GridSpec.N,
            "nmin": None,
            "nmax": None,
            "sharpness": 1.0,
        },
    )
    f = function_from_config(cfg["fn"])
    grid = GridSpec(L=cfg["L"], N=cfg["N"])
    auto_min, auto_max = default_n_range(grid)
    nmin = auto_min if cfg["nmin"] is None else int(cfg["nmin"])
    nmax = auto_max if cfg["nmax"] is None else int(cfg["nmax"])
    cfg["nmin"], cfg["nmax"] = nmin, nmax
    est = besov_norm_estimate(f, grid, build_w(cfg["sharpness"]), (nmin, nmax))
    data = {
        "perScale": {str(n): v for n, v in est.per_scale.items()},
        "total": est.total,
        "leakage": est.leakage,
        "scaleRange": list(est.scale_range),
        "grid": {"L": grid.L, "N": grid.N},
    }
    _emit("besov-norm", cfg, data)
    print(f"total={est.total:.6g} leakage={est.leakage:.3e} scales=[{nmin},{nmax}]")
    return EXIT_OK


def _cmd_multiplier_norm(args) -> int:
    cfg = _resolve(
        args,
        {
            "symbol": "dd2",
            "fn": dict(_DEFAULT_FN),
            "specA": None,
            "specB": None,
            "n": 8,
            "seed": 0,
            "perturbScale": 0.1,
            "rank": None,
            "iters": 500,
            "trials": 64,
        },
    )
    if cfg["symbol"] not in _SYMBOL_BUILDERS:
        raise ConfigError(
            f"symbol must be one of {sorted(_SYMBOL_BUILDERS)}, got {cfg['symbol']!r}"
        )
    f = function_from_config(cfg["fn"])
    phi = _SYMBOL_BUILDERS[cfg["symbol"]](f)
    if cfg["specA"]:
        spec_a = spectrum_from_file(cfg["specA"])
    else:
        spec_a = joint_diagonalize(
            random_commuting_pair(cfg["n"], _trial_seed(cfg["seed"], 0, 0))
        )
    if cfg["specB"]:
        spec_b = spectrum_from_file(cfg["specB"])
    else:
        spec_b = joint_diagonalize(
            perturbed_pair(
                random_commuting_pair(cfg["n"], _trial_seed(cfg["seed"], 0, 0)),
                cfg["perturbScale"],
                _trial_seed(cfg["seed"], 0, 1),
            )
        )
    m = sample_symbol(phi, spec_a, spec_b)
    br = bracket(m, rank=cfg["rank"], iters=cfg["iters"], trials=cfg["trials"], seed=cfg["seed"])
    data = {"lower": br.lower, "upper": br.upper, "gap": br.gap, "rank": br.rank}
    _emit("multiplier-norm", cfg, data)
    print(f"lower={br.lower:.8g} upper={br.upper:.8g} gap={br.gap:.3e} rank={br.rank}")
    if br.lower > br.upper + 1e-9:
        _err("assertion", f"bracket inverted: lower {br.lower} above upper {br.upper}")
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_counterexample(args) -> int:
    cfg = _resolve(args, {"n": [1, 10, 100]})
    rows = counterexample_scan(cfg["n"])
    data = {
        "rows": [
            {"n": r.n, "fullFactor": r.full_factor, "reFactor": r.re_factor} for r in rows
        ]
    }
    _emit("counterexample", cfg, data)
    for r in rows:
        print(f"n={r.n} fullFactor={r.full_factor:.12g} reFactor={r.re_factor:.12g}")
    return EXIT_OK


def _cmd_truncation(args) -> int:
    cfg = _resolve(
        args,
        {
            "n": 8,
            "seed": 0,
            "perturbScale": 0.1,
            "fn": dict(_DEFAULT_FN),
            "cutoffs": [0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
        },
    )
    f = function_from_config(cfg["fn"])
    pair_a, pair_b = _make_pairs(cfg)
    rows = truncation_convergence(pair_a, pair_b, f, cfg["cutoffs"])
    data = {"rows": [{"cutoff": r.cutoff, "residual": r.residual} for r in rows]}
    _emit("truncation", cfg, data)
    for r in rows:
        print(f"cutoff={r.cutoff:g} residual={r.residual:.6e}")
    return EXIT_OK


def _workers_from_env() -> int:
    text = os.environ.get("DOILAB_THREADS", "").strip()
    if not text:
        return 1
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"DOILAB_THREADS must be an integer, got {text!r}")
    if value < 0:
        raise ConfigError(f"DOILAB_THREADS must be >= 0, got {value}")
    if value == 0:
        return min(8, os.cpu_count() or 1)
    return value


def _cmd_ensemble(args) -> int:
    cfg = _resolve(
        args,
        {
            "n": 8,
            "trials": 20,
            "seed": 0,
            "perturbScale": 0.1,
            "fn": dict(_DEFAULT_FN),
            "p": [1.0, 2.0],
            "tol": 1e-9,
        },
    )
    spec = EnsembleSpec(
        n=cfg["n"],
        trials=cfg["trials"],
        seed=cfg["seed"],
        perturb_scale=cfg["perturbScale"],
        fn=cfg["fn"],
        p_values=tuple(cfg["p"]),
    )
    report = run_ensemble(spec, max_workers=_workers_from_env())
    rows = ensemble_csv_rows(report)
    data = {
        "rows": rows,
        "aggregates": report.aggregates,
        "besovG1": report.besov_g1,
        "besovG2": report.besov_g2,
        "failures": len(report.failures),
        "grid": {"L": report.grid_spec.L, "N": report.grid_spec.N},
    }
    _emit("ensemble", cfg, data)
    max_res = report.aggregates.get("relResidual", {}).get("max", float("nan"))
    max_ratio = report.aggregates.get("ratio", {}).get("max", float("nan"))
    print(
        f"trials={spec.trials} failures={len(report.failures)} "
        f"maxRelResidual={max_res:.3e} maxRatio={max_ratio:.6g}"
    )
    if report.failures:
        _err("assertion", f"{len(report.failures)} trials failed")
        return EXIT_ASSERT
    if report.rows and max_res > cfg["tol"]:
        _err("assertion", f"identity residual {max_res:.3e} exceeds {cfg['tol']:g}")
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_validate_filters(args) -> int:
    cfg = _resolve(args, {"sharpness": 1.0})
    w = build_w(cfg["sharpness"])

    t = np.logspace(-6.0, 6.0, 1000)
    scales = 2.0 ** np.arange(-30, 31, dtype=float)
    partition = np.zeros_like(t)
    for s in scales:
        partition += w(t / s)
    partition_residual = float(np.max(np.abs(partition - 1.0)))

    u = np.linspace(1.0, 2.0, 200)
    consistency_residual = float(np.max(np.abs(w(u) - (1.0 - w(u / 2.0)))))

    outside = np.concatenate([np.linspace(1e-9, 0.5, 200), np.linspace(2.0, 1e6, 200)])
    support_deviation = float(np.max(np.abs(w(outside))))

    data = {
        "partitionResidual": partition_residual,
        "consistencyResidual": consistency_residual,
        "supportDeviation": support_deviation,
        "w1": float(w(1.0)),
    }
    _emit("validate-filters", cfg, data)
    ok = (
        partition_residual <= 1e-10
        and consistency_residual <= 1e-10
        and support_deviation <= 1e-12
        and abs(data["w1"] - 1.0) <= 1e-12
    )
    print(
        f"partitionResidual={partition_residual:.3e} "
        f"consistencyResidual={consistency_residual:.3e} "
        f"supportDeviation={support_deviation:.3e} {'OK' if ok else 'VIOLATED'}"
    )
    if not ok:
        _err("assertion", "filter invariants violated")
        return EXIT_ASSERT
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(sub, fn: bool = True):
    sub.add_argument("--config", help="JSON config file; flags override its entries")
    sub.add_argument("--out", default=None, help="report file path")
    sub.add_argument("--format", default=None, choices=("json", "csv"))
    sub.add_argument("--seed", type=int, default=None)
    if fn:
        sub.add_argument("--fn", default=None, help="catalog function name")
        for key, kind in _FN_PARAM_FLAGS.items():
            if kind == "json":
                sub.add_argument(f"--{key}", dest=f"fn_{key}", type=_jsonarg, default=None)
            else:
                sub.add_argument(f"--{key}", dest=f"fn_{key}", type=kind, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="doilab", description=__doc__)
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)

    sub = subs.add_parser("verify-identity", help="check the two-term representation")
    _add_common(sub)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--tol", type=float, default=None)
    sub.add_argument("--perturb-scale", dest="perturbScale", type=float, default=None)
    sub.set_defaults(handler=_cmd_verify_identity)

    sub = subs.add_parser("bound-ratio", help="deviation norm against Besov weights")
    _add_common(sub)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--perturb-scale", dest="perturbScale", type=float, default=None)
    sub.add_argument("--L", type=float, default=None)
    sub.add_argument("--N", type=int, default=None)
    sub.add_argument("--sharpness", type=float, default=None)
    sub.set_defaults(handler=_cmd_bound_ratio)

    sub = subs.add_parser("schatten", help="Schatten-p deviation ratios")
    _add_common(sub)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--perturb-scale", dest="perturbScale", type=float, default=None)
    sub.add_argument("--p", type=_floatlist, default=None)
    sub.set_defaults(handler=_cmd_schatten)

    sub = subs.add_parser("besov-norm", help="dyadic norm estimate on a grid")
    _add_common(sub)
    sub.add_argument("--L", type=float, default=None)
    sub.add_argument("--N", type=int, default=None)
    sub.add_argument("--nmin", type=int, default=None)
    sub.add_argument("--nmax", type=int, default=None)
    sub.add_argument("--sharpness", type=float, default=None)
    sub.set_defaults(handler=_cmd_besov_norm)

    sub = subs.add_parser("multiplier-norm", help="bracket the Schur multiplier norm")
    _add_common(sub)
    sub.add_argument("--symbol", default=None, choices=sorted(_SYMBOL_BUILDERS))
    sub.add_argument("--specA", default=None, help="pair or spectrum JSON file")
    sub.add_argument("--specB", default=None, help="pair or spectrum JSON file")
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--perturb-scale", dest="perturbScale", type=float, default=None)
    sub.add_argument("--rank", type=int, default=None)
    sub.add_argument("--iters", type=int, default=None)
    sub.add_argument("--trials", type=int, default=None)
    sub.set_defaults(handler=_cmd_multiplier_norm)

    sub = subs.add_parser("counterexample", help="bounded sum, diverging real part")
    _add_common(sub, fn=False)
    sub.add_argument("--n", type=_intlist, default=None, help="comma-separated dimensions")
    sub.set_defaults(handler=_cmd_counterexample)

    sub = subs.add_parser("truncation", help="identity residual under spectral cutoffs")
    _add_common(sub)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--perturb-scale", dest="perturbScale", type=float, default=None)
    sub.add_argument("--cutoffs", type=_floatlist, default=None)
    sub.set_defaults(handler=_cmd_truncation)

    sub = subs.add_parser("ensemble", help="seeded multi-trial experiment")
    _add_common(sub)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--trials", type=int, default=None)
    sub.add_argument("--perturb-scale", dest="perturbScale", type=float, default=None)
    sub.add_argument("--p", type=_floatlist, default=None)
    sub.add_argument("--tol", type=float, default=None)
    sub.set_defaults(handler=_cmd_ensemble)

    sub = subs.add_parser("validate-filters", help="check the dyadic filter invariants")
    _add_common(sub, fn=False)
    sub.add_argument("--sharpness", type=float, default=None)
    sub.set_defaults(handler=_cmd_validate_filters)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _err("usage", str(exc))
        return EXIT_USAGE
    if not getattr(args, "command", None):
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.handler(args)
    except _UsageError as exc:
        _err("usage", str(exc))
        return EXIT_USAGE
    except ZeroPerturbation as exc:
        _err("assertion", str(exc))
        return EXIT_ASSERT
    except ConfigError as exc:
        _err("config", str(exc))
        return EXIT_USAGE
    except DoilabError as exc:
        _err("config", str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
