"""Command-line front end.

Subcommands: generate, recover, evaluate, probe, oracle. Configs and all
structured outputs are JSON (non-finite floats written as ``Infinity`` /
``NaN``); sample data is headerless delimited text with shortest round-trip
float formatting. No environment variables are read.

Exit codes: 0 success, 2 usage or config error, 3 I/O error, 4 data parse
error, 5 dimension mismatch, 6 numerical or optimizer failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import statistics
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import (PlantedModel, SignalLaw, example1_mixture, make_planted_model, sample,
                      whiten)
from .metrics import (concentration_probe, evaluate_recovery, rate_probe,
                      sample_cov_spectral_norm)
from .pursuit import DataMatrix, Frame, OptimizerConfig, maximize_on_sphere, net_maximizer_oracle
from .recovery import RecoveryReport, SearchConfig, StoppingConfig, sequential_recovery

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_PARSE = 4
EXIT_DIMENSION = 5
EXIT_NUMERIC = 6

ORACLE_GAP_TOL = 1e-3


class CliError(Exception):
    code = EXIT_CONFIG


class ConfigError(CliError):
    code = EXIT_CONFIG


class IOFailure(CliError):
    code = EXIT_IO


class ParseError(CliError):
    code = EXIT_PARSE


class DimensionError(CliError):
    code = EXIT_DIMENSION


class NumericError(CliError):
    code = EXIT_NUMERIC


DEFAULTS = {
    "seed": 0,
    "model": {"p": 10, "n": 10000, "signal": None, "complement_shift": 0.0,
              "mc_samples": 1 << 18, "method": "auto"},
    "optimizer": {},
    "stopping": {},
    "search": {},
    "data": {"delimiter": ","},
    "probe": {
        "concentration": {"n_sweep": [100, 1000, 10000], "directions": 200,
                          "mc_truth_samples": 1 << 18, "seeds": 10},
        "rate": {"law": None, "n_grid": [100, 1000, 10000], "trials": 50,
                 "slope_band": [-0.6, -0.2]},
        "covnorm": {"p": 400, "n": 4000, "band": [1.2, 2.2]},
    },
    "oracle": {"resolution": 1e-3},
}


# -- config ----------------------------------------------------------------
def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"config: unknown field '{where}'")
        if isinstance(base[key], dict) and base[key] and isinstance(val, dict):
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


def load_config(path):
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    return _merge(DEFAULTS, raw)


def _build(cls, values, section):
    known = {f.name for f in fields(cls)}
    bad = sorted(set(values) - known)
    if bad:
        raise ConfigError(f"config: unknown field '{section}.{bad[0]}'")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config section '{section}': {exc}") from exc


def signal_from_spec(spec):
    if spec is None:
        return None
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("config: 'model.signal' must be null or an object with a 'kind'")
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        if kind == "example1":
            return example1_mixture(int(spec["k"]), float(spec["separation"]))
        if kind == "standard_normal":
            return SignalLaw.standard_normal()
        k = int(spec.pop("k", 1))
        params = spec.pop("params", spec)
        return SignalLaw(kind, k, dict(params))
    except KeyError as exc:
        raise ConfigError(f"config: 'model.signal' of kind {kind!r} lacks field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: 'model.signal': {exc}") from exc


def resolve_optimizer(cfg, p, seed, threads):
    """OptimizerConfig and SearchConfig with dimension-aware defaults.

    Unless set explicitly, restarts scale as 2p (at least 16) and screening
    keeps the best 4 restarts after 20 steps.
    """
    opt = dict(cfg["optimizer"])
    opt.setdefault("restarts", max(16, 2 * p))
    opt["seed"] = seed
    if threads is not None:
        opt["threads"] = threads
    opt.setdefault("threads", os.cpu_count() or 1)
    search = dict(cfg["search"])
    search.setdefault("screen_iters", 20)
    search.setdefault("screen_keep", 4)
    cfg["optimizer"], cfg["search"] = opt, search
    return _build(OptimizerConfig, opt, "optimizer"), _build(SearchConfig, search, "search")


# -- files -----------------------------------------------------------------
def write_matrix(path, rows, delimiter=","):
    lines = [delimiter.join(repr(x) for x in row) for row in np.asarray(rows).tolist()]
    _write_text(path, "\n".join(lines) + "\n")


def read_matrix(path, delimiter=","):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read data {path}: {exc.strerror}") from exc
    rows = []
    width = None
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cells = line.split(delimiter)
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(f"{path}: row {i} has {len(cells)} columns, expected {width}")
        row = []
        for j, cell in enumerate(cells, start=1):
            try:
                row.append(float(cell))
            except ValueError:
                raise ParseError(f"{path}: row {i}, column {j}: cannot parse {cell.strip()!r}") from None
        if not all(np.isfinite(row)):
            raise ParseError(f"{path}: row {i} contains a non-finite value")
        rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows)


def _write_text(path, text):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror}") from exc


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, payload):
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IOFailure(f"cannot read {what} {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what} {path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _envelope(command, cfg, seed, body):
    return {"command": command, "version": __version__, "seed": seed, "config": cfg, **body}


def _load_model(path):
    try:
        return PlantedModel.from_dict(read_json(path, "model")["model"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"model {path}: {exc}") from exc


def _load_report(path):
    try:
        return RecoveryReport.from_dict(read_json(path, "report")["report"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"report {path}: {exc}") from exc


def _model_from_config(cfg, seed):
    m = cfg["model"]
    signal = signal_from_spec(m["signal"])
    try:
        return make_planted_model(int(m["p"]), signal, seed, mc_samples=int(m["mc_samples"]),
                                  complement_shift=float(m["complement_shift"]),
                                  method=m["method"])
    except ValueError as exc:
        raise ConfigError(f"config section 'model': {exc}") from exc


def _seeds(seed):
    """Independent model and sample seeds derived from the run seed."""
    a, b = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    return int(a), int(b)


# -- commands --------------------------------------------------------------
def cmd_generate(cfg, seed, out: Path):
    model_seed, data_seed = _seeds(seed)
    model = _model_from_config(cfg, model_seed)
    n = int(cfg["model"]["n"])
    if n < 1:
        raise ConfigError("config: 'model.n' must be positive")
    data = sample(model, n, data_seed)
    write_matrix(out / "data.csv", data.rows, cfg["data"]["delimiter"])
    write_json(out / "model.json", _envelope("generate", cfg, seed, {"model": model.to_dict()}))
    return f"wrote {n} x {model.p} sample and model (k={model.k}, snr={model.snr:.4g})"


def cmd_recover(cfg, seed, out: Path, data_path, do_whiten, threads):
    if data_path is None:
        raise ConfigError("recover needs --data")
    rows = read_matrix(data_path, cfg["data"]["delimiter"])
    data = DataMatrix(rows, whitened=False)
    if do_whiten:
        try:
            data = whiten(data)
        except ValueError as exc:
            raise NumericError(f"whitening failed: {exc}") from exc
    else:
        # caller vouches for whiteness; the diagnostic only warns
        data = DataMatrix(data.rows, whitened=True)
    opt, search = resolve_optimizer(cfg, data.p, seed, threads)
    stop = _build(StoppingConfig, cfg["stopping"], "stopping")
    if stop.max_k is not None and stop.max_k > data.p:
        raise DimensionError(f"max_k={stop.max_k} exceeds the data dimension p={data.p}")
    try:
        report = sequential_recovery(data, opt, stop, search)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise NumericError(f"recovery failed: {exc}") from exc
    cfg["whiten"] = bool(do_whiten)
    write_json(out / "report.json", _envelope("recover", cfg, seed, {"report": report.to_dict()}))
    return f"k_hat={report.k_hat} ({report.stopped_reason})"


def cmd_evaluate(cfg, seed, out: Path, report_path, model_path):
    if report_path is None or model_path is None:
        raise ConfigError("evaluate needs --report and --model")
    report = _load_report(report_path)
    model = _load_model(model_path)
    if report.frame.p != model.p:
        raise DimensionError(f"report has p={report.frame.p} but model has p={model.p}")
    err = evaluate_recovery(report, model)
    write_json(out / "metrics.json", _envelope("evaluate", cfg, seed, {"metrics": err.to_dict()}))
    lines = ["index,distance,w_proj"]
    for i, (d, w) in enumerate(zip(report.distances, err.all_w_proj), start=1):
        lines.append(f"{i},{d!r},{w!r}")
    _write_text(out / "plot_data.csv", "\n".join(lines) + "\n")
    return f"max_w_proj={err.max_w_proj:.4g}, bound={err.snr_bound:.4g}, holds={err.bound_holds}"


def _probe_concentration(cfg, seed, model_path):
    pc = cfg["probe"]["concentration"]
    if model_path is not None:
        model = _load_model(model_path)
    else:
        model = _model_from_config(cfg, _seeds(seed)[0])
    points = []
    for n in pc["n_sweep"]:
        gaps = [concentration_probe(model, int(n), int(pc["directions"]),
                                    int(pc["mc_truth_samples"]), seed + s).max_abs_deviation
                for s in range(int(pc["seeds"]))]
        points.append({"n": int(n), "max_gaps": gaps, "median_gap": statistics.median(gaps)})
    med = [pt["median_gap"] for pt in points]
    return {"points": points,
            "median_strictly_decreasing": all(b < a for a, b in zip(med, med[1:])),
            "note": "gaps are maxima over sampled directions, a lower bound on the sphere supremum"}


def _probe_rate(cfg, seed):
    pr = cfg["probe"]["rate"]
    law = signal_from_spec(pr["law"]) if pr["law"] is not None else SignalLaw.standard_normal()
    try:
        res = rate_probe(law, pr["n_grid"], int(pr["trials"]), seed)
    except ValueError as exc:
        raise ConfigError(f"config section 'probe.rate': {exc}") from exc
    lo, hi = pr["slope_band"]
    return {"points": [{"n": n, "mean_w2": v} for n, v in res.points], "slope": res.slope,
            "slope_in_band": bool(lo <= res.slope <= hi)}


def _probe_covnorm(cfg, seed, data_path):
    pv = cfg["probe"]["covnorm"]
    if data_path is not None:
        data = DataMatrix(read_matrix(data_path, cfg["data"]["delimiter"]))
    else:
        rng = np.random.default_rng(seed)
        data = DataMatrix(rng.standard_normal((int(pv["n"]), int(pv["p"]))))
    value = sample_cov_spectral_norm(data)
    lo, hi = pv["band"]
    ratio = data.p / data.n
    return {"n": data.n, "p": data.p, "value": value, "mp_edge": (1 + ratio**0.5) ** 2,
            "in_band": bool(lo <= value <= hi)}


def cmd_probe(cfg, seed, out: Path, kind, model_path, data_path):
    if kind == "concentration":
        body = _probe_concentration(cfg, seed, model_path)
    elif kind == "rate":
        body = _probe_rate(cfg, seed)
    elif kind == "covnorm":
        body = _probe_covnorm(cfg, seed, data_path)
    else:
        raise ConfigError(f"unknown probe kind {kind!r}")
    write_json(out / "probe.json", _envelope("probe", cfg, seed, {"probe": kind, "result": body}))
    return f"{kind} probe written"


def cmd_oracle(cfg, seed, out: Path, data_path, threads):
    if data_path is not None:
        data = DataMatrix(read_matrix(data_path, cfg["data"]["delimiter"]), whitened=False)
    else:
        model_seed, data_seed = _seeds(seed)
        data = sample(_model_from_config(cfg, model_seed), int(cfg["model"]["n"]), data_seed)
    if data.p not in (2, 3):
        raise DimensionError(f"oracle supports p in {{2, 3}}, data has p={data.p}")
    opt, search = resolve_optimizer(cfg, data.p, seed, threads)
    try:
        u_net, v_net = net_maximizer_oracle(data, float(cfg["oracle"]["resolution"]))
    except ValueError as exc:
        raise ConfigError(f"config section 'oracle': {exc}") from exc
    u_opt, v_opt = maximize_on_sphere(data, Frame.empty(data.p), opt,
                                      screen_iters=search.screen_iters,
                                      screen_keep=search.screen_keep)
    gap = v_net - v_opt
    body = {"net": {"direction": u_net, "value": v_net},
            "optimizer": {"direction": u_opt, "value": v_opt},
            "gap": gap, "optimizer_behind_oracle": bool(gap > ORACLE_GAP_TOL)}
    write_json(out / "oracle.json", _envelope("oracle", cfg, seed, body))
    return f"net={v_net:.6f} optimizer={v_opt:.6f} gap={gap:.3g}"


# -- entry point -----------------------------------------------------------
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config")
    common.add_argument("--seed", type=int, help="run seed (overrides config)")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")

    parser = argparse.ArgumentParser(prog="wpursuit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="sample a planted model")
    rec = sub.add_parser("recover", parents=[common], help="estimate the non-Gaussian subspace")
    rec.add_argument("--data", type=Path)
    rec.add_argument("--whiten", action="store_true", help="center and whiten before recovery")
    rec.add_argument("--max-k", type=int)
    ev = sub.add_parser("evaluate", parents=[common], help="score a report against a model")
    ev.add_argument("--report", type=Path)
    ev.add_argument("--model", type=Path)
    pr = sub.add_parser("probe", parents=[common], help="concentration, rate or covnorm probe")
    pr.add_argument("kind", choices=["concentration", "rate", "covnorm"])
    pr.add_argument("--model", type=Path)
    pr.add_argument("--data", type=Path)
    orc = sub.add_parser("oracle", parents=[common], help="optimizer versus exhaustive net, p<=3")
    orc.add_argument("--data", type=Path)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = int(cfg["seed"]) if args.seed is None else args.seed
        if not 0 <= seed < 2**63:
            raise ConfigError("seed must be a nonnegative 63-bit integer")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        cfg["seed"] = seed
        out = args.out
        if args.command == "generate":
            msg = cmd_generate(cfg, seed, out)
        elif args.command == "recover":
            if args.max_k is not None:
                cfg["stopping"] = {**cfg["stopping"], "max_k": args.max_k}
            msg = cmd_recover(cfg, seed, out, args.data, args.whiten, args.threads)
        elif args.command == "evaluate":
            msg = cmd_evaluate(cfg, seed, out, args.report, args.model)
        elif args.command == "probe":
            msg = cmd_probe(cfg, seed, out, args.kind, args.model, args.data)
        else:
            msg = cmd_oracle(cfg, seed, out, args.data, args.threads)
    except CliError as exc:
        print(f"wpursuit {args.command}: {exc}", file=sys.stderr)
        return exc.code
    print(msg)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
