"""Monte-Carlo orchestration: experiment configs, presets, CSV/plot output.

Trials are independent work items spread over a thread pool (capped by the
``IA_GRASSMANN_THREADS`` environment variable).  Every random draw is keyed
by a pure function of (base_seed, trial index, receiver index), and results
are written into preallocated per-trial arrays before a deterministic
reduction, so output is byte-identical regardless of the worker count.

For schemes whose bit budget does not depend on the transmit power, the
whole feedback + alignment pipeline runs once per trial and only the cheap
log-det evaluations repeat across the SNR grid.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import SystemDims, gen_channel, row_space_qr, concat_interference
from .feedback import (BitSchedule, FeedbackReport, feedback_ncq,
                       schedule_bits, surrogate_grid)
from .grassmann import perturb, quantize, rvq_codebook, BITS_CAP
from .ia import IASolverError, build_receive_filter, solve_ia
from .metrics import rvq_rate_loss_lower_bound, snr_db_to_linear

__all__ = [
    "SolverFailureBudgetExceeded",
    "SchemeSpec",
    "ExperimentConfig",
    "CurveRow",
    "run_experiment",
    "preset",
    "PRESETS",
    "emit_csv",
    "emit_plot",
    "read_csv",
    "worker_count",
]

# Tags separating the seed streams derived from (base_seed, trial).
_TAG_CHANNEL = 1
_TAG_CODEBOOK = 2
_TAG_PERTURB = 3
_TAG_SOLVER = 4

CSV_HEADER = "scheme,snr_db,bits,mean_sum_rate,stderr,mean_leakage,trials"

# Fraction of failed trials a scheme may accumulate before the run aborts.
FAILURE_BUDGET = 0.01


class SolverFailureBudgetExceeded(RuntimeError):
    """More than the tolerated fraction of trials failed to align."""


@dataclass(frozen=True)
class SchemeSpec:
    """One curve family: a feedback scheme plus its bit schedule.

    ``snr_grid_db`` overrides the experiment grid for this scheme only
    (used by the power-scaled series, which are evaluated at the SNRs where
    the scheduled budget is integral).  ``with_rate_bound`` additionally
    emits the analytic expected-rate lower-bound rows for this series.
    """

    scheme: str
    schedule: BitSchedule | None = None
    snr_grid_db: tuple | None = None
    with_rate_bound: bool = False

    def __post_init__(self) -> None:
        if self.scheme not in ("perfect", "proposed", "ncq", "perturbed"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme != "perfect" and self.schedule is None:
            raise ValueError(f"scheme {self.scheme!r} needs a bit schedule")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one Monte-Carlo sweep."""

    dims: SystemDims
    snr_grid_db: tuple
    schemes: tuple
    trials: int = 2000
    base_seed: int = 1234
    solver: str = "auto"
    metric: str = "projected"  # "optimal" (ideal receivers) or "projected"
    max_quantizer_bits: int = 15  # larger budgets use the perturbation path
    out: str | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("need at least one trial")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("SNR grid must be strictly increasing")
        object.__setattr__(self, "snr_grid_db", grid)
        if self.metric not in ("optimal", "projected"):
            raise ValueError("metric must be 'optimal' or 'projected'")
        if self.solver not in ("auto", "closed_form", "altmin"):
            raise ValueError("solver must be auto, closed_form or altmin")
        if not 0 <= self.max_quantizer_bits <= BITS_CAP:
            raise ValueError(f"max_quantizer_bits must lie in [0, {BITS_CAP}]")
        for spec in self.schemes:
            if spec.schedule is not None and spec.schedule.dims != self.dims:
                raise ValueError("schedule dimensions do not match experiment")


@dataclass(frozen=True)
class CurveRow:
    """One aggregated (scheme, SNR) result.

    Only the first seven fields are serialized to CSV; ``mean_user_rates``
    and ``failures`` stay in memory for DoF analysis and diagnostics.
    """

    scheme: str
    snr_db: float
    bits: int
    mean_sum_rate: float
    stderr: float
    mean_leakage: float
    trials: int
    mean_user_rates: tuple = field(default=(), compare=False)
    failures: int = field(default=0, compare=False)


def worker_count() -> int:
    """Thread-pool size: CPU count capped by IA_GRASSMANN_THREADS."""
    n = os.cpu_count() or 1
    env = os.environ.get("IA_GRASSMANN_THREADS")
    if env:
        n = max(1, min(n, int(env)))
    return n


# ---------------------------------------------------------------------------
# per-trial pipeline
# ---------------------------------------------------------------------------

class _TrialBatch:
    """Preallocated per-trial arrays for one (scheme, bit budget) pipeline."""

    def __init__(self, trials: int, dims: SystemDims, need_full_rate: bool):
        K, N, d = dims.K, dims.N, dims.d
        self.ok = np.zeros(trials, dtype=bool)
        self.gram = np.zeros((trials, K, d, d), dtype=complex)
        self.sig_total = np.zeros((trials, K, d, d), dtype=complex)
        self.sig_intf = np.zeros((trials, K, d, d), dtype=complex)
        if need_full_rate:
            self.cov_total = np.zeros((trials, K, N, N), dtype=complex)
            self.cov_intf = np.zeros((trials, K, N, N), dtype=complex)
        else:
            self.cov_total = None
            self.cov_intf = None


def _subspace_report(ch, bits_per_user, cfg, trial, force_perturb):
    """Quantize or perturb each receiver's subspace, per its own budget.

    Budgets above ``cfg.max_quantizer_bits`` always use the perturbation
    path (materializing such codebooks is impractical); a zero budget always
    uses the single-codeword quantizer, since the perturbation model needs
    at least one bit.  Returns the report and whether any receiver used the
    perturbation path.
    """
    dims = cfg.dims
    facs = tuple(row_space_qr(concat_interference(ch, i))
                 for i in range(dims.K))
    fhat, indices, perturbed = [], [], False
    for r, (fac, bits) in enumerate(zip(facs, bits_per_user)):
        use_pert = bits >= 1 and (force_perturb or bits > cfg.max_quantizer_bits)
        if use_pert:
            fhat.append(perturb(fac.F, bits,
                                (cfg.base_seed, trial, _TAG_PERTURB, r)))
            indices.append(-1)
            perturbed = True
        else:
            cb = rvq_codebook("subspace", (dims.cross_dim, dims.N), bits,
                              (cfg.base_seed, trial, _TAG_CODEBOOK, r))
            idx, point = quantize(fac.F, cb)
            fhat.append(point)
            indices.append(idx)
    scheme = "perturbed" if perturbed else "proposed"
    report = FeedbackReport(scheme=scheme, dims=dims, facs=facs,
                            bits_used=tuple(bits_per_user),
                            fhat=tuple(fhat), indices=tuple(indices))
    return report, perturbed


def _run_one_trial(cfg: ExperimentConfig, spec: SchemeSpec, bits_per_user,
                   trial: int, batch: _TrialBatch) -> None:
    dims = cfg.dims
    ch = gen_channel(dims, (cfg.base_seed, trial, _TAG_CHANNEL))
    try:
        if spec.scheme == "perfect":
            facs = tuple(row_space_qr(concat_interference(ch, i))
                         for i in range(dims.K))
            report = FeedbackReport(scheme="perfect", dims=dims, facs=facs,
                                    bits_used=tuple(0 for _ in facs),
                                    fhat=tuple(f.F for f in facs))
        elif spec.scheme == "ncq":
            cbs = [rvq_codebook("composite", (dims.K - 1, dims.M * dims.N),
                                b, (cfg.base_seed, trial, _TAG_CODEBOOK, r))
                   for r, b in enumerate(bits_per_user)]
            report = feedback_ncq(ch, cbs)
        else:
            report, _ = _subspace_report(
                ch, bits_per_user, cfg, trial,
                force_perturb=spec.scheme == "perturbed")
        A = surrogate_grid(report)
        sol = solve_ia(A, dims, solver=cfg.solver,
                       seed=(cfg.base_seed, trial, _TAG_SOLVER))
        if not sol.converged:
            return
        if report.scheme == "ncq":
            filters = sol.U
        else:
            filters = [build_receive_filter(report.facs[i], report.fhat[i],
                                            sol.U[i])
                       for i in range(dims.K)]
    except (IASolverError, np.linalg.LinAlgError):
        return

    # P-independent pieces; every metric is a log-det of (gram + (P/d) * S).
    for i in range(dims.K):
        G = filters[i]
        batch.gram[trial, i] = G.conj().T @ G
        for j in range(dims.K):
            T = G.conj().T @ ch.H[i, j] @ sol.V[j]
            cov = T @ T.conj().T
            batch.sig_total[trial, i] += cov
            if j != i:
                batch.sig_intf[trial, i] += cov
        if batch.cov_total is not None:
            for j in range(dims.K):
                W = ch.H[i, j] @ sol.V[j]
                cov = W @ W.conj().T
                batch.cov_total[trial, i] += cov
                if j != i:
                    batch.cov_intf[trial, i] += cov
    batch.ok[trial] = True


def _fill_batch(cfg, spec, bits_per_user, batch) -> None:
    workers = min(worker_count(), cfg.trials)
    if workers <= 1:
        for t in range(cfg.trials):
            _run_one_trial(cfg, spec, bits_per_user, t, batch)
        return
    bounds = np.linspace(0, cfg.trials, workers + 1).astype(int)

    def chunk(lo: int, hi: int) -> None:
        for t in range(lo, hi):
            _run_one_trial(cfg, spec, bits_per_user, t, batch)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(chunk, lo, hi)
                   for lo, hi in zip(bounds[:-1], bounds[1:])]
        for fut in futures:
            fut.result()


def _batched_logdet2(mats: np.ndarray) -> np.ndarray:
    signs, logs = np.linalg.slogdet(mats)
    out = logs / math.log(2.0)
    out[np.real(signs) <= 0] = np.nan
    return out


def _evaluate_rows(cfg, batch, scheme_label, bits_label, snr_values,
                   with_bound) -> list:
    dims = cfg.dims
    ok = batch.ok
    n_fail = int(np.sum(~ok))
    if n_fail > FAILURE_BUDGET * cfg.trials:
        raise SolverFailureBudgetExceeded(
            f"scheme {scheme_label!r}: {n_fail}/{cfg.trials} trials failed "
            f"to align (budget {FAILURE_BUDGET:.0%}); check feasibility of "
            f"dims {dims} with solver {cfg.solver!r}"
        )
    rows = []
    for snr_db, bits in zip(snr_values, bits_label):
        P = snr_db_to_linear(snr_db)
        scale = P / dims.d
        if cfg.metric == "projected":
            rate_u = (_batched_logdet2(batch.gram + scale * batch.sig_total)
                      - _batched_logdet2(batch.gram + scale * batch.sig_intf))
        else:
            eye = np.eye(dims.N)
            rate_u = (_batched_logdet2(eye + scale * batch.cov_total)
                      - _batched_logdet2(eye + scale * batch.cov_intf))
        good = ok & np.all(np.isfinite(rate_u), axis=1)
        n_ok = int(np.sum(good))
        n_fail_row = cfg.trials - n_ok
        if n_fail_row > FAILURE_BUDGET * cfg.trials:
            raise SolverFailureBudgetExceeded(
                f"scheme {scheme_label!r} at {snr_db} dB: "
                f"{n_fail_row}/{cfg.trials} unusable trials"
            )
        sums = rate_u[good].sum(axis=1).real
        leak_trace = np.trace(batch.sig_intf[good], axis1=2,
                              axis2=3).real * scale
        stderr = (float(np.std(sums, ddof=1)) / math.sqrt(n_ok)
                  if n_ok > 1 else 0.0)
        rows.append(CurveRow(
            scheme=scheme_label, snr_db=float(snr_db), bits=int(max(bits)),
            mean_sum_rate=float(np.mean(sums)), stderr=stderr,
            mean_leakage=float(np.mean(leak_trace)), trials=n_ok,
            mean_user_rates=tuple(np.mean(rate_u[good].real, axis=0)),
            failures=n_fail_row,
        ))
        if with_bound:
            rows.append(_bound_row(cfg, batch, good, snr_db, P, bits))
    return rows


def _bound_row(cfg, batch, good, snr_db, P, bits_per_user) -> CurveRow:
    """Analytic expected-rate lower bound, averaged over the trial ensemble.

    Uses each trial's hypothetical interference-free rates through the
    actual filters, minus the deterministic RVQ rate-loss term.
    """
    dims = cfg.dims
    scale = P / dims.d
    rp_u = _batched_logdet2(
        np.eye(dims.d) + scale * (batch.sig_total - batch.sig_intf))
    rp_u = rp_u[good].real
    per_user = []
    for u, bits in enumerate(bits_per_user):
        rp_mean = float(np.mean(rp_u[:, u]))
        per_user.append(rvq_rate_loss_lower_bound(dims, bits, P, rp_mean))
    total = float(sum(per_user))
    return CurveRow(scheme="bound", snr_db=float(snr_db),
                    bits=int(max(bits_per_user)), mean_sum_rate=total,
                    stderr=0.0, mean_leakage=0.0, trials=int(np.sum(good)),
                    mean_user_rates=tuple(per_user))


def _scheme_rows(cfg: ExperimentConfig, spec: SchemeSpec) -> list:
    dims = cfg.dims
    grid = spec.snr_grid_db if spec.snr_grid_db is not None else cfg.snr_grid_db
    need_full = cfg.metric == "optimal"
    static = spec.scheme == "perfect" or spec.schedule.is_static

    if static:
        if spec.scheme == "perfect":
            bits = [0] * dims.K
            label, bits_col = "perfect", -1
        else:
            bits = schedule_bits(spec.schedule, 2.0)
            perturbed = (spec.scheme == "perturbed"
                         or any(b > cfg.max_quantizer_bits and b >= 1
                                for b in bits))
            label = "perturbed" if perturbed else spec.scheme
            bits_col = max(bits)
        batch = _TrialBatch(cfg.trials, dims, need_full)
        _fill_batch(cfg, spec, bits, batch)
        rows = _evaluate_rows(cfg, batch, label, [bits] * len(grid), grid,
                              spec.with_rate_bound)
        if spec.scheme == "perfect":
            rows = [replace(r, bits=bits_col) for r in rows]
        return rows

    rows = []
    for snr_db in grid:
        P = snr_db_to_linear(snr_db)
        bits = schedule_bits(spec.schedule, P)
        perturbed = (spec.scheme == "perturbed"
                     or any(b > cfg.max_quantizer_bits and b >= 1
                            for b in bits))
        label = "perturbed" if perturbed else spec.scheme
        batch = _TrialBatch(cfg.trials, dims, need_full)
        _fill_batch(cfg, spec, bits, batch)
        rows.extend(_evaluate_rows(cfg, batch, label, [bits], [snr_db],
                                   spec.with_rate_bound))
    return rows


def run_experiment(cfg: ExperimentConfig) -> list:
    """Run the full sweep and return one CurveRow per (scheme, SNR).

    Deterministic given the config: trial seeds derive from
    (base_seed, trial, receiver) only, and aggregation order is fixed.
    """
    rows: list = []
    for spec in cfg.schemes:
        rows.extend(_scheme_rows(cfg, spec))
    return rows


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

PRESETS = ("fig1", "fig2", "fig3", "fig4", "asym-dof")

# SNR abscissae at which the power-scaled budget is integral.
SCALED_SNRS = (0.0, 5.25, 9.75, 15.0, 19.5)
SCALED_SNRS_EXT = SCALED_SNRS + (24.85, 30.1, 35.4, 39.9)


def preset(name: str, trials: int | None = None,
           base_seed: int = 1234) -> ExperimentConfig:
    """Ready-made experiment configurations for the standard curve sets.

    fig1      sum rate with ideal receivers: perfect CSI vs quantized
              subspace feedback vs the NCQ baseline at 5 and 10 bits.
    fig2      sum rate through the projection filters for fixed budgets
              {5, 10, 15} plus the power-scaled schedule.
    fig3      quantizer-vs-perturbation overlay at matched seeds.
    fig4      perturbation path at 25 bits and power-scaled, each with its
              analytic expected-rate lower bound, plus perfect CSI.
    asym-dof  per-user budgets: user 0 pinned to 13 bits while the others
              scale with power.
    """
    dims = SystemDims(K=3, M=2, N=2, d=1)
    full_grid = tuple(float(s) for s in range(0, 41, 5))

    def fixed(bits, scheme="proposed", **kw):
        return SchemeSpec(scheme=scheme,
                          schedule=BitSchedule.fixed(bits, dims), **kw)

    def scaled(scheme="proposed", grid=SCALED_SNRS, **kw):
        return SchemeSpec(scheme=scheme, schedule=BitSchedule.scaled(dims),
                          snr_grid_db=grid, **kw)

    if name == "fig1":
        cfg = ExperimentConfig(
            dims=dims, snr_grid_db=full_grid, metric="optimal",
            schemes=(SchemeSpec("perfect"),
                     fixed(5), fixed(10),
                     fixed(5, "ncq"), fixed(10, "ncq")),
            trials=trials or 2000, base_seed=base_seed)
    elif name == "fig2":
        cfg = ExperimentConfig(
            dims=dims, snr_grid_db=full_grid, metric="projected",
            schemes=(fixed(5), fixed(10), fixed(15), scaled()),
            trials=trials or 2000, base_seed=base_seed)
    elif name == "fig3":
        cfg = ExperimentConfig(
            dims=dims, snr_grid_db=full_grid, metric="projected",
            schemes=(fixed(5), fixed(10), fixed(15),
                     fixed(5, "perturbed"), fixed(10, "perturbed"),
                     fixed(15, "perturbed"),
                     scaled(), scaled("perturbed", SCALED_SNRS_EXT)),
            trials=trials or 5000, base_seed=base_seed)
    elif name == "fig4":
        cfg = ExperimentConfig(
            dims=dims, snr_grid_db=full_grid, metric="projected",
            schemes=(fixed(25, "perturbed", with_rate_bound=True),
                     scaled("perturbed", SCALED_SNRS_EXT,
                            with_rate_bound=True),
                     SchemeSpec("perfect")),
            trials=trials or 2000, base_seed=base_seed)
    elif name == "asym-dof":
        sched = BitSchedule((("fixed", 13), ("scaled", 1.0), ("scaled", 1.0)),
                            dims)
        cfg = ExperimentConfig(
            dims=dims, snr_grid_db=full_grid, metric="projected",
            schemes=(SchemeSpec("proposed", schedule=sched,
                                snr_grid_db=SCALED_SNRS_EXT),
                     SchemeSpec("perfect",
                                snr_grid_db=SCALED_SNRS_EXT)),
            trials=trials or 2000, base_seed=base_seed)
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    return cfg


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def emit_csv(rows, path) -> None:
    """Write rows as CSV, sorted by (scheme, snr_db, bits), 6-decimal floats."""
    ordered = sorted(rows, key=lambda r: (r.scheme, r.snr_db, r.bits))
    lines = [CSV_HEADER]
    for r in ordered:
        lines.append(
            f"{r.scheme},{r.snr_db:.6f},{r.bits},{r.mean_sum_rate:.6f},"
            f"{r.stderr:.6f},{r.mean_leakage:.6f},{r.trials}"
        )
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


def read_csv(path) -> list:
    """Read back a CSV written by :func:`emit_csv`."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != CSV_HEADER:
                raise ValueError(f"{path}: unexpected header {header!r}")
            for line in fh:
                parts = line.strip().split(",")
                if len(parts) != 7:
                    raise ValueError(f"{path}: malformed row {line!r}")
                rows.append(CurveRow(
                    scheme=parts[0], snr_db=float(parts[1]),
                    bits=int(parts[2]), mean_sum_rate=float(parts[3]),
                    stderr=float(parts[4]), mean_leakage=float(parts[5]),
                    trials=int(parts[6])))
    except OSError as exc:
        raise OSError(f"reading {path}: {exc}") from exc
    return rows


def _series(rows) -> dict:
    grouped: dict = {}
    for r in sorted(rows, key=lambda r: (r.scheme, r.bits, r.snr_db)):
        grouped.setdefault((r.scheme, r.bits), []).append(r)
    return grouped


def _plot_script(rows) -> str:
    """Self-contained gnuplot script with inline data blocks."""
    parts = ["set xlabel 'SNR [dB]'",
             "set ylabel 'sum rate [bits/s/Hz]'",
             "set grid", "set key bottom right"]
    grouped = _series(rows)
    titles = []
    for (scheme, bits) in grouped:
        label = scheme if bits < 0 else f"{scheme} bits={bits}"
        titles.append(f"'-' using 1:2:3 with yerrorlines title '{label}'")
    parts.append("plot " + ", \\\n     ".join(titles))
    for series in grouped.values():
        for r in series:
            parts.append(f"{r.snr_db:.6f} {r.mean_sum_rate:.6f} {r.stderr:.6f}")
        parts.append("e")
    return "\n".join(parts) + "\n"


def emit_plot(rows, path) -> None:
    """Render one error-bar line per (scheme, bits) series.

    A ``.png`` path is rendered with matplotlib when available; any other
    extension, or a missing raster backend, produces a self-contained
    gnuplot-style script instead.
    """
    path = str(path)
    want_png = path.endswith(".png")
    if want_png:
        try:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            want_png = False
    try:
        if not want_png:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(_plot_script(rows))
            return
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        for (scheme, bits), series in _series(rows).items():
            label = scheme if bits < 0 else f"{scheme} bits={bits}"
            x = [r.snr_db for r in series]
            y = [r.mean_sum_rate for r in series]
            e = [r.stderr for r in series]
            marker = "o" if len(series) > 1 else "s"
            ax.errorbar(x, y, yerr=e, marker=marker, capsize=2, label=label)
        ax.set_xlabel("SNR [dB]")
        ax.set_ylabel("sum rate [bits/s/Hz]")
        ax.grid(True, alpha=0.4)
        ax.legend(loc="best", fontsize=8)
        fig.savefig(path, dpi=150, bbox_inches="tight",
                    metadata={"Software": None})
        plt.close(fig)
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc
