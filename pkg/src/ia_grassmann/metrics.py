"""Scalar performance quantities: leakage, sum rates, analytic bounds, DoF.

All logarithms are base 2; rates are in bits/s/Hz.  Wherever the analysis
provides per-realization inequality chains (leakage against the quantized
subspace mismatch, the rate-loss sandwich, the NCQ chain), the functions
here evaluate the exact per-realization quantities so tests can assert the
chains without statistical slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, SystemDims, concat_interference
from .feedback import FeedbackReport
from .grassmann import (ManifoldConstants, distortion_moment_bounds,
                        ncq_constants, packing_radius, subspace_constants)
from .ia import IASolution

__all__ = [
    "RatePoint",
    "leakage",
    "leakage_bound_theorem_curve",
    "ncq_leakage_bound",
    "sum_rate_optimal",
    "sum_rate_projected",
    "rate_pair_hypothetical",
    "rvq_rate_loss_lower_bound",
    "estimate_dof",
    "snr_db_to_linear",
]

_LOG2E = 1.0 / math.log(2.0)


@dataclass(frozen=True)
class RatePoint:
    """One (SNR, rate) evaluation: per-user rates, their sum, and leakage."""

    snr_db: float
    per_user_rate: tuple
    sum_rate: float
    leakage: tuple = ()
    scheme: str = ""


def snr_db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def _logdet2(A: np.ndarray) -> float:
    sign, ld = np.linalg.slogdet(A)
    if sign.real <= 0:
        raise ValueError("log-det argument is not positive definite")
    return float(ld) * _LOG2E


def _filters_as_arrays(filters) -> list:
    return [np.asarray(G) for G in filters]


# ---------------------------------------------------------------------------
# leakage
# ---------------------------------------------------------------------------

def leakage(ch: ChannelRealization, sol: IASolution, filters, P: float,
            d: int) -> np.ndarray:
    """Residual interference power after the receive filters.

    L_i = (P/d) sum_{j != i} ||G_i^H H_ij V_j||_F^2, evaluated on the true
    channels.  ``filters`` may hold the subspace-scheme filters G_i or the
    solver's receive subspaces (NCQ / surrogate diagnostics).
    """
    K = ch.dims.K
    Gs = _filters_as_arrays(filters)
    out = np.zeros(K)
    for i in range(K):
        acc = 0.0
        for j in range(K):
            if j != i:
                acc += float(np.linalg.norm(
                    Gs[i].conj().T @ ch.H[i, j] @ sol.V[j]) ** 2)
        out[i] = P / d * acc
    return out


def leakage_bound_theorem_curve(dims: SystemDims, bits: int, P: float) -> float:
    """Analytic worst-case leakage curve 2 P Delta^2 for sphere packing.

    The accompanying o(2^{-bits/dim}) factor of the underlying bound is not
    quantified, so this is a reference curve rather than a hard
    per-realization guarantee.
    """
    delta = packing_radius(subspace_constants(dims), bits)
    return 2.0 * P * delta * delta


def ncq_leakage_bound(ch: ChannelRealization, report: FeedbackReport,
                      P: float, d: int) -> np.ndarray:
    """Per-realization leakage bound of the NCQ baseline.

    bound_i = 2 P d B_max,i Dc^2(Z_i, Zhat_i) with B_max,i the largest
    squared norm among receiver i's interfering channels.  Holds for every
    realization once the solver has aligned the quantized surrogates.
    """
    if report.scheme != "ncq":
        raise ValueError("bound applies to NCQ reports only")
    dims = ch.dims
    out = np.zeros(dims.K)
    for i in range(dims.K):
        others = [j for j in range(dims.K) if j != i]
        norms2 = [float(np.linalg.norm(ch.H[i, j]) ** 2) for j in others]
        bmax = max(norms2)
        dc2 = 0.0
        for row, j in enumerate(others):
            v = ch.H[i, j].flatten(order="F")
            z = v / np.linalg.norm(v)
            dc2 += 1.0 - abs(np.vdot(report.zhat[i][row], z)) ** 2
        out[i] = 2.0 * P * d * bmax * dc2
    return out


# ---------------------------------------------------------------------------
# sum rates
# ---------------------------------------------------------------------------

def sum_rate_optimal(ch: ChannelRealization, V, P: float, d: int,
                     snr_db: float | None = None,
                     scheme: str = "") -> RatePoint:
    """Sum rate with optimum receivers (no projection filters).

    Per user: log2|I_N + (P/d) sum_j H_ij V_j V_j^H H_ij^H| minus the same
    expression with the own signal (j = i) removed.
    """
    dims = ch.dims
    eye = np.eye(dims.N)
    rates = []
    for i in range(dims.K):
        total = np.zeros((dims.N, dims.N), dtype=complex)
        intf = np.zeros((dims.N, dims.N), dtype=complex)
        for j in range(dims.K):
            W = ch.H[i, j] @ V[j]
            cov = W @ W.conj().T
            total += cov
            if j != i:
                intf += cov
        rates.append(_logdet2(eye + (P / d) * total)
                     - _logdet2(eye + (P / d) * intf))
    if snr_db is None:
        snr_db = 10.0 * math.log10(P)
    return RatePoint(snr_db=snr_db, per_user_rate=tuple(rates),
                     sum_rate=float(sum(rates)), scheme=scheme)


def sum_rate_projected(ch: ChannelRealization, sol: IASolution, filters,
                       P: float, d: int, snr_db: float | None = None,
                       scheme: str = "") -> RatePoint:
    """Sum rate achieved through the (non-orthonormal) receive filters.

    Same structure as :func:`sum_rate_optimal` but with every covariance
    sandwiched by G_i and the identity replaced by the Gram matrix G_i^H G_i.
    Raises if a Gram matrix is singular (a measure-zero event).
    """
    dims = ch.dims
    Gs = _filters_as_arrays(filters)
    rates = []
    for i in range(dims.K):
        G = Gs[i]
        gram = G.conj().T @ G
        total = np.zeros((G.shape[1], G.shape[1]), dtype=complex)
        intf = np.zeros_like(total)
        for j in range(dims.K):
            T = G.conj().T @ ch.H[i, j] @ sol.V[j]
            cov = T @ T.conj().T
            total += cov
            if j != i:
                intf += cov
        try:
            rates.append(_logdet2(gram + (P / d) * total)
                         - _logdet2(gram + (P / d) * intf))
        except ValueError as exc:
            raise ValueError(f"singular Gram matrix at receiver {i}") from exc
    if snr_db is None:
        snr_db = 10.0 * math.log10(P)
    return RatePoint(snr_db=snr_db, per_user_rate=tuple(rates),
                     sum_rate=float(sum(rates)), scheme=scheme)


def rate_pair_hypothetical(ch: ChannelRealization, sol: IASolution, G,
                           P: float, d: int, i: int) -> tuple[float, float]:
    """Interference-free rate and actually achievable rate of user ``i``.

    Through the filter G: with Q_S the filtered own-signal covariance and
    Q_I the filtered interference covariance,

        R_p = log2|I_d + (P/d) Q_S|
        R_q = log2|I_d + (P/d)(Q_S + Q_I)| - log2|I_d + (P/d) Q_I|.
    """
    dims = ch.dims
    G = np.asarray(G)
    eye = np.eye(G.shape[1])
    Ts = G.conj().T @ ch.H[i, i] @ sol.V[i]
    QS = Ts @ Ts.conj().T
    QI = np.zeros_like(QS)
    for j in range(dims.K):
        if j != i:
            T = G.conj().T @ ch.H[i, j] @ sol.V[j]
            QI += T @ T.conj().T
    rp = _logdet2(eye + (P / d) * QS)
    rq = _logdet2(eye + (P / d) * (QS + QI)) - _logdet2(eye + (P / d) * QI)
    return rp, rq


# ---------------------------------------------------------------------------
# analytic rate bound and DoF estimation
# ---------------------------------------------------------------------------

def rvq_rate_loss_lower_bound(dims: SystemDims, bits: int, P: float,
                              Rp: float) -> float:
    """Expected-rate lower bound under random codebooks.

    E[R_q] >= Rp - d log2(1 + (2P/d) * D2_upper) with D2_upper the upper
    second-moment bound of the quantization error on the fed-back manifold.
    Approaches Rp as the bit budget grows.
    """
    d2_up = distortion_moment_bounds(subspace_constants(dims), bits, 2)[1]
    return Rp - dims.d * math.log2(1.0 + (2.0 * P / dims.d) * d2_up)


def estimate_dof(curve, window: int = 3) -> tuple:
    """Least-squares per-user rate slope against log2(P) at high SNR.

    ``curve`` is a sequence of RatePoints on a common scheme; the slope is
    fitted over the ``window`` highest-SNR points (at least 3 required).
    Returns one slope per user, in bits per power doubling.
    """
    pts = sorted(curve, key=lambda r: r.snr_db)
    if window < 2:
        raise ValueError("window must span at least two points")
    if len(pts) < max(3, window):
        raise ValueError("need at least three rate points at distinct SNRs")
    tail = pts[-window:]
    x = np.array([math.log2(snr_db_to_linear(r.snr_db)) for r in tail])
    users = len(tail[0].per_user_rate)
    slopes = []
    for u in range(users):
        y = np.array([r.per_user_rate[u] for r in tail])
        slope = np.polyfit(x, y, 1)[0]
        slopes.append(float(slope))
    return tuple(slopes)
