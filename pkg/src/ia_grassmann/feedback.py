"""End-to-end CSI feedback pipelines and bit-budget schedules.

Three feedback families are implemented:

* ``proposed`` / ``perturbed`` / ``perfect``: each receiver reports (a
  quantized, perturbation-emulated, or exact representative of) the row
  space of its stacked cross-channel matrix, as a point on the subspace
  manifold.
* ``ncq``: each receiver vectorizes and normalizes its interfering channel
  matrices individually and quantizes them jointly on the composite line
  manifold (normalized-channel quantization baseline).

`surrogate_grid` converts the reported payload into the channel grid the
alignment solvers consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (ChannelRealization, RowSpaceFactorization, SystemDims,
                      concat_interference, row_space_qr, split_interference)
from .grassmann import Codebook, perturb, quantize
from .rng import as_rng

__all__ = [
    "SCHEMES",
    "FeedbackReport",
    "BitSchedule",
    "schedule_bits",
    "proposed_bit_slope",
    "ncq_bit_slope",
    "feedback_perfect",
    "feedback_proposed",
    "feedback_ncq",
    "feedback_perturbed",
    "surrogate_grid",
]

SCHEMES = ("perfect", "proposed", "ncq", "perturbed")


@dataclass(frozen=True)
class FeedbackReport:
    """What the receivers reported, plus their local factorizations.

    ``facs`` holds the per-receiver QR factorization of the stacked cross
    channels; it stays at the receiver and is needed later to build the
    receive filters.  Subspace-family schemes fill ``fhat`` (one point per
    receiver), the NCQ baseline fills ``zhat`` (the (K-1, M*N) unit-vector
    arrays) and ``hhat`` (reconstructed cross-channel grid, zero diagonal).
    """

    scheme: str
    dims: SystemDims
    facs: tuple
    bits_used: tuple
    fhat: tuple | None = None
    zhat: tuple | None = None
    hhat: np.ndarray | None = None
    indices: tuple | None = None


# ---------------------------------------------------------------------------
# bit schedules
# ---------------------------------------------------------------------------

def proposed_bit_slope(dims: SystemDims) -> int:
    """Bits per power-doubling that keep the subspace scheme's leakage bounded."""
    return dims.N * (dims.cross_dim - dims.N)


def ncq_bit_slope(dims: SystemDims) -> int:
    """Same growth constant for the normalized-channel baseline."""
    return (dims.K - 1) * (dims.M * dims.N - 1)


@dataclass(frozen=True)
class BitSchedule:
    """Per-user feedback budget, either fixed or scaled with transmit power.

    ``per_user`` holds one ``("fixed", bits)`` or ``("scaled", alpha)``
    entry per user.  A scaled entry at linear SNR P yields
    ``round(alpha * slope * log2(P))`` bits, floored at zero, where the
    slope constant depends on the quantization manifold (``scheme`` selects
    between the subspace scheme and the NCQ baseline).
    """

    per_user: tuple
    dims: SystemDims
    scheme: str = "proposed"

    def __post_init__(self) -> None:
        if len(self.per_user) != self.dims.K:
            raise ValueError("schedule needs one entry per user")
        for kind, value in self.per_user:
            if kind == "fixed":
                if value < 0 or value != int(value):
                    raise ValueError("fixed budgets must be nonnegative integers")
            elif kind == "scaled":
                if value < 0:
                    raise ValueError("alpha must be nonnegative")
            else:
                raise ValueError(f"unknown schedule entry kind {kind!r}")
        if self.scheme not in ("proposed", "ncq"):
            raise ValueError("schedule scheme must be 'proposed' or 'ncq'")

    @classmethod
    def fixed(cls, bits: int, dims: SystemDims,
              scheme: str = "proposed") -> "BitSchedule":
        return cls(tuple(("fixed", int(bits)) for _ in range(dims.K)),
                   dims, scheme)

    @classmethod
    def scaled(cls, dims: SystemDims, alpha=1.0,
               scheme: str = "proposed") -> "BitSchedule":
        alphas = [alpha] * dims.K if np.isscalar(alpha) else list(alpha)
        return cls(tuple(("scaled", float(a)) for a in alphas), dims, scheme)

    @property
    def is_static(self) -> bool:
        return all(kind == "fixed" for kind, _ in self.per_user)


def schedule_bits(sched: BitSchedule, P: float) -> list[int]:
    """Per-user feedback bits at linear SNR ``P``."""
    if P <= 0:
        raise ValueError("linear SNR must be positive")
    slope = (proposed_bit_slope(sched.dims) if sched.scheme == "proposed"
             else ncq_bit_slope(sched.dims))
    bits = []
    for kind, value in sched.per_user:
        if kind == "fixed":
            bits.append(int(value))
        else:
            bits.append(max(0, int(round(value * slope * math.log2(P)))))
    return bits


# ---------------------------------------------------------------------------
# feedback pipelines
# ---------------------------------------------------------------------------

def _factorize_all(ch: ChannelRealization) -> tuple:
    return tuple(row_space_qr(concat_interference(ch, i))
                 for i in range(ch.dims.K))


def feedback_perfect(ch: ChannelRealization) -> FeedbackReport:
    """Error-free subspace feedback: each receiver reports its F exactly."""
    facs = _factorize_all(ch)
    return FeedbackReport(scheme="perfect", dims=ch.dims, facs=facs,
                          bits_used=tuple(0 for _ in facs),
                          fhat=tuple(f.F for f in facs))


def feedback_proposed(ch: ChannelRealization, codebooks) -> FeedbackReport:
    """Quantized subspace feedback with one codebook per receiver.

    ``codebooks`` is either a single subspace codebook shared by all
    receivers or a sequence with one per receiver.
    """
    dims = ch.dims
    cbs = _per_receiver(codebooks, dims.K)
    for cb in cbs:
        if cb.kind != "subspace":
            raise ValueError("proposed feedback needs subspace codebooks")
        if cb.entries.shape[1:] != (dims.cross_dim, dims.N):
            raise ValueError("codebook entries do not match ((K-1)M, N)")
    facs = _factorize_all(ch)
    indices, fhat = [], []
    for fac, cb in zip(facs, cbs):
        idx, point = quantize(fac.F, cb)
        indices.append(idx)
        fhat.append(point)
    return FeedbackReport(scheme="proposed", dims=dims, facs=facs,
                          bits_used=tuple(cb.bits for cb in cbs),
                          fhat=tuple(fhat), indices=tuple(indices))


def feedback_ncq(ch: ChannelRealization, codebooks) -> FeedbackReport:
    """Normalized-channel quantization on the composite line manifold.

    Each interfering channel matrix is vectorized (column-major) and
    normalized; the resulting K-1 unit vectors are quantized jointly.  The
    surrogate channels are rebuilt from the quantized unit vectors, so the
    transmitters never see the channel norms.
    """
    dims = ch.dims
    cbs = _per_receiver(codebooks, dims.K)
    mn = dims.M * dims.N
    for cb in cbs:
        if cb.kind != "composite":
            raise ValueError("NCQ feedback needs composite codebooks")
        if cb.entries.shape[1:] != (dims.K - 1, mn):
            raise ValueError("codebook entries do not match (K-1, M*N)")
    facs = _factorize_all(ch)
    indices, zhat = [], []
    hhat = np.zeros_like(ch.H)
    for i, cb in enumerate(cbs):
        others = [j for j in range(dims.K) if j != i]
        Z = np.empty((dims.K - 1, mn), dtype=complex)
        for row, j in enumerate(others):
            v = ch.H[i, j].flatten(order="F")
            Z[row] = v / np.linalg.norm(v)
        idx, That = quantize(Z, cb)
        indices.append(idx)
        zhat.append(That)
        for row, j in enumerate(others):
            hhat[i, j] = That[row].reshape((dims.N, dims.M), order="F")
    return FeedbackReport(scheme="ncq", dims=dims, facs=facs,
                          bits_used=tuple(cb.bits for cb in cbs),
                          zhat=tuple(zhat), hhat=hhat,
                          indices=tuple(indices))


def feedback_perturbed(ch: ChannelRealization, bits, seed) -> FeedbackReport:
    """Subspace feedback with the quantizer replaced by the perturbation model.

    ``bits`` may be a single budget or one per receiver (each >= 1).
    Downstream processing treats the report exactly like quantized feedback.
    """
    dims = ch.dims
    per_user = [int(bits)] * dims.K if np.isscalar(bits) else [int(b) for b in bits]
    if len(per_user) != dims.K:
        raise ValueError("need one bit budget per receiver")
    facs = _factorize_all(ch)
    rng = as_rng(seed)
    fhat = tuple(perturb(fac.F, b, rng) for fac, b in zip(facs, per_user))
    return FeedbackReport(scheme="perturbed", dims=dims, facs=facs,
                          bits_used=tuple(per_user), fhat=fhat)


def _per_receiver(codebooks, K: int) -> list:
    if isinstance(codebooks, Codebook):
        return [codebooks] * K
    cbs = list(codebooks)
    if len(cbs) != K:
        raise ValueError(f"need one codebook per receiver (K={K})")
    return cbs


def surrogate_grid(report: FeedbackReport) -> np.ndarray:
    """Channel grid to hand to the alignment solver, zero diagonal.

    Subspace-family reports contribute the conjugate-transposed reported
    points, sliced back into per-transmitter blocks; NCQ reports contribute
    the reconstructed unit-norm channel matrices.
    """
    dims = report.dims
    if report.scheme == "ncq":
        return report.hhat.copy()
    A = np.zeros((dims.K, dims.K, dims.N, dims.M), dtype=complex)
    for i in range(dims.K):
        blocks = split_interference(report.fhat[i].conj().T, i, dims)
        for j, block in enumerate(blocks):
            if block is not None:
                A[i, j] = block
    return A
