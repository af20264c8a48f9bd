"""Random MIMO interference channels and their row-space factorization.

Channels are stored as a dense (K, K, N, M) complex grid ``H[i, j]`` holding
the matrix from transmitter ``j`` into receiver ``i`` (0-based user indices).
The diagonal carries the direct channels, which only the rate metrics use;
the feedback pipeline works on the off-diagonal blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import as_rng

__all__ = [
    "RANK_TOL",
    "SystemDims",
    "ChannelRealization",
    "RowSpaceFactorization",
    "RankDeficientChannel",
    "gen_channel",
    "concat_interference",
    "split_interference",
    "row_space_qr",
]

# A concatenated interference matrix is treated as rank deficient when its
# smallest singular value drops below RANK_TOL times the largest one.
RANK_TOL = 1e-12


class RankDeficientChannel(ValueError):
    """Concatenated interference matrix does not have full row rank."""


@dataclass(frozen=True)
class SystemDims:
    """Dimensions of a symmetric K-user MIMO interference channel.

    Attributes
    ----------
    K : int
        Number of transmitter/receiver pairs (>= 2).
    M : int
        Transmit antennas per node.
    N : int
        Receive antennas per node.
    d : int
        Data streams per user.
    """

    K: int
    M: int
    N: int
    d: int

    def __post_init__(self) -> None:
        if self.K < 2:
            raise ValueError("at least two users are required")
        if min(self.M, self.N, self.d) < 1:
            raise ValueError("antenna and stream counts must be positive")
        if (self.K - 1) * self.M < self.N:
            raise ValueError(
                "(K-1)*M >= N is required so that unaligned interference "
                "can fill the receive space"
            )
        if self.d > self.N or self.d > self.M:
            raise ValueError("streams per user cannot exceed M or N")

    @property
    def cross_dim(self) -> int:
        """Ambient dimension (K-1)*M of the concatenated cross channels."""
        return (self.K - 1) * self.M


@dataclass(frozen=True)
class ChannelRealization:
    """One fading draw: all K^2 channel matrices of shape (N, M)."""

    dims: SystemDims
    H: np.ndarray  # complex, shape (K, K, N, M)

    def __post_init__(self) -> None:
        expected = (self.dims.K, self.dims.K, self.dims.N, self.dims.M)
        if self.H.shape != expected:
            raise ValueError(f"channel grid must have shape {expected}")


@dataclass(frozen=True)
class RowSpaceFactorization:
    """Economy QR factorization of a stacked cross-channel matrix.

    ``F`` is (K-1)M x N with orthonormal columns spanning the column space
    of the conjugate-transposed interference matrix, and ``C`` is the N x N
    upper-triangular factor with strictly positive real diagonal so that
    ``F @ C`` reconstructs it.
    """

    F: np.ndarray
    C: np.ndarray


def gen_channel(dims: SystemDims, seed) -> ChannelRealization:
    """Draw one channel realization with i.i.d. CN(0, 1) entries.

    Parameters
    ----------
    dims : SystemDims
    seed : int, tuple or numpy.random.Generator
        Entropy source; the same seed always yields bit-identical output.
    """
    rng = as_rng(seed)
    shape = (dims.K, dims.K, dims.N, dims.M)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return ChannelRealization(dims, (re + 1j * im) / np.sqrt(2.0))


def concat_interference(ch: ChannelRealization, i: int) -> np.ndarray:
    """Horizontally stack all cross channels into receiver ``i``.

    The own channel ``H[i, i]`` is excluded and the original transmitter
    order is preserved, giving an N x (K-1)M matrix.
    """
    K = ch.dims.K
    if not 0 <= i < K:
        raise IndexError(f"receiver index {i} out of range for K={K}")
    return np.concatenate([ch.H[i, j] for j in range(K) if j != i], axis=1)


def split_interference(Ai: np.ndarray, i: int, dims: SystemDims) -> list:
    """Inverse of :func:`concat_interference` for one receiver.

    Returns a length-K list of N x M blocks with ``None`` at position ``i``.
    """
    if not 0 <= i < dims.K:
        raise IndexError(f"receiver index {i} out of range for K={dims.K}")
    if Ai.shape != (dims.N, dims.cross_dim):
        raise ValueError("surrogate row has wrong shape")
    blocks: list = []
    col = 0
    for j in range(dims.K):
        if j == i:
            blocks.append(None)
            continue
        blocks.append(Ai[:, col:col + dims.M])
        col += dims.M
    return blocks


def row_space_qr(Hi: np.ndarray) -> RowSpaceFactorization:
    """Factor ``Hi^H = F C`` with F truncated unitary and C upper triangular.

    The diagonal of ``C`` is made real and strictly positive, which pins the
    otherwise arbitrary per-column phases and makes the factorization unique,
    so repeated calls on the same input agree bit for bit.

    Raises
    ------
    RankDeficientChannel
        If ``Hi`` does not have full row rank (relative to RANK_TOL).
    """
    Hi = np.asarray(Hi)
    sv = np.linalg.svd(Hi, compute_uv=False)
    if sv[-1] < RANK_TOL * sv[0]:
        raise RankDeficientChannel(
            f"smallest singular value {sv[-1]:.3e} below tolerance "
            f"{RANK_TOL:.0e} * {sv[0]:.3e}"
        )
    Q, R = np.linalg.qr(Hi.conj().T)
    phases = np.diag(R).copy()
    phases = phases / np.abs(phases)
    F = Q * phases[np.newaxis, :]
    C = R * phases.conj()[:, np.newaxis]
    return RowSpaceFactorization(F=F, C=C)
