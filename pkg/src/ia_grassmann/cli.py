"""Command-line front end for the Monte-Carlo experiments.

Configuration comes from an optional flat ``key = value`` text file plus
command-line flag overrides.  Exit codes: 0 success, 2 configuration error,
3 solver-failure budget exceeded, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .channel import SystemDims
from .feedback import BitSchedule
from .harness import (ExperimentConfig, PRESETS, SchemeSpec,
                      SolverFailureBudgetExceeded, emit_csv, emit_plot,
                      preset, run_experiment)

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

_CONFIG_KEYS = ("preset", "trials", "seed", "snr", "bits", "scheme",
                "solver", "out", "format", "metric", "quantizer_cap",
                "K", "M", "N", "d")


class ConfigError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ia-grassmann",
        description="Monte-Carlo sum-rate and leakage sweeps for "
                    "interference alignment under quantized Grassmannian "
                    "CSI feedback.",
    )
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--preset", help=f"named experiment: {', '.join(PRESETS)}")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials per point")
    p.add_argument("--seed", type=int, help="base seed for all trial streams")
    p.add_argument("--snr", help="SNR grid in dB: 'a,b,c' or 'start:stop:step'")
    p.add_argument("--bits", help="comma list of budgets; each entry is an "
                                  "integer, 'scaled' or 'scaled:ALPHA'")
    p.add_argument("--scheme", help="comma list from perfect, proposed, ncq, "
                                    "perturbed")
    p.add_argument("--solver", choices=("auto", "closed_form", "altmin"))
    p.add_argument("--metric", choices=("optimal", "projected"))
    p.add_argument("--out", help="output CSV path (default results.csv)")
    p.add_argument("--format", choices=("csv", "plot", "both"),
                   help="what to write (default csv)")
    p.add_argument("--quantizer-cap", dest="quantizer_cap", type=int,
                   help="largest budget quantized with a real codebook; "
                        "larger budgets use the perturbation path")
    return p


def _load_config_file(path) -> dict:
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, value = (s.strip() for s in line.split("=", 1))
                if key not in _CONFIG_KEYS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return values


def _parse_snr(text: str) -> tuple:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad SNR range {text!r}, want start:stop:step")
        start, stop, step = (float(v) for v in parts)
        if step <= 0:
            raise ConfigError("SNR step must be positive")
        grid = []
        v = start
        while v <= stop + 1e-9:
            grid.append(round(v, 9))
            v += step
        return tuple(grid)
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad SNR list {text!r}") from exc


def _parse_bits_token(token: str, dims: SystemDims) -> BitSchedule:
    token = token.strip()
    if token == "scaled":
        return BitSchedule.scaled(dims)
    if token.startswith("scaled:"):
        try:
            alpha = float(token.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad scaled budget {token!r}") from exc
        return BitSchedule.scaled(dims, alpha)
    try:
        return BitSchedule.fixed(int(token), dims)
    except ValueError as exc:
        raise ConfigError(f"bad bit budget {token!r}") from exc


def _build_config(args) -> ExperimentConfig:
    file_values = _load_config_file(args.config) if args.config else {}

    def pick(name, cast=str):
        cli = getattr(args, name, None)
        if cli is not None:
            return cli
        if name in file_values:
            try:
                return cast(file_values[name])
            except ValueError as exc:
                raise ConfigError(f"bad value for {name!r}: "
                                  f"{file_values[name]!r}") from exc
        return None

    trials = pick("trials", int)
    seed = pick("seed", int)
    name = pick("preset")
    if name is not None:
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
        cfg = preset(name, trials=trials,
                     base_seed=seed if seed is not None else 1234)
        overrides = {}
        for field_name, key in (("solver", "solver"), ("metric", "metric"),
                                ("max_quantizer_bits", "quantizer_cap")):
            value = pick(key, int if key == "quantizer_cap" else str)
            if value is not None:
                overrides[field_name] = value
        snr = pick("snr")
        if snr is not None:
            overrides["snr_grid_db"] = _parse_snr(snr)
        if overrides:
            from dataclasses import replace
            cfg = replace(cfg, **overrides)
        return cfg

    dims_vals = {k: pick(k, int) for k in ("K", "M", "N", "d")}
    defaults = {"K": 3, "M": 2, "N": 2, "d": 1}
    try:
        dims = SystemDims(**{k: dims_vals[k] if dims_vals[k] is not None
                             else defaults[k] for k in defaults})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    snr = pick("snr")
    grid = _parse_snr(snr) if snr is not None else tuple(
        float(s) for s in range(0, 41, 5))
    scheme_text = pick("scheme") or "proposed"
    bits_text = pick("bits") or "10"
    specs = []
    for scheme in (s.strip() for s in scheme_text.split(",")):
        if scheme == "perfect":
            specs.append(SchemeSpec("perfect"))
            continue
        if scheme not in ("proposed", "ncq", "perturbed"):
            raise ConfigError(f"unknown scheme {scheme!r}")
        for token in bits_text.split(","):
            sched = _parse_bits_token(token, dims)
            if scheme == "ncq":
                sched = BitSchedule(sched.per_user, dims, "ncq")
            specs.append(SchemeSpec(scheme, schedule=sched))
    kwargs = {}
    solver = pick("solver")
    if solver is not None:
        kwargs["solver"] = solver
    metric = pick("metric")
    if metric is not None:
        kwargs["metric"] = metric
    cap = pick("quantizer_cap", int)
    if cap is not None:
        kwargs["max_quantizer_bits"] = cap
    try:
        return ExperimentConfig(
            dims=dims, snr_grid_db=grid, schemes=tuple(specs),
            trials=trials if trials is not None else 2000,
            base_seed=seed if seed is not None else 1234, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args)
    except (ConfigError, ValueError) as exc:
        print(f"ia-grassmann: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        rows = run_experiment(cfg)
    except SolverFailureBudgetExceeded as exc:
        print(f"ia-grassmann: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    out = args.out or (_load_config_file(args.config).get("out")
                       if args.config else None) or "results.csv"
    fmt = args.format or (_load_config_file(args.config).get("format")
                          if args.config else None) or "csv"
    try:
        if fmt in ("csv", "both"):
            emit_csv(rows, out)
            print(f"wrote {out} ({len(rows)} rows)")
        if fmt in ("plot", "both"):
            plot_path = out[:-4] + ".png" if out.endswith(".csv") else out + ".png"
            emit_plot(rows, plot_path)
            print(f"wrote {plot_path}")
    except OSError as exc:
        print(f"ia-grassmann: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
