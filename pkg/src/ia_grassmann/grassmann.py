"""Grassmann-manifold machinery for quantized subspace feedback.

Subspaces of C^n are represented by n x p matrices with orthonormal columns
(truncated unitary matrices); plain ndarrays are used throughout.  Two
manifold kinds appear:

* ``subspace``: the complex Grassmann manifold of p-planes in C^n, carrying
  the chordal distance.  Used to quantize the row space of the stacked
  cross-channel matrix.
* ``composite``: the Cartesian product of L copies of the manifold of lines
  in C^m, represented as an (L, m) array of unit vectors.  Used by the
  normalized-channel quantization baseline.

Besides sampling, distances and random-vector-quantization codebooks, the
module provides the analytic constants of both manifolds (real dimension,
ball-volume coefficient, packing radius, distortion-moment bounds) and a
perturbation sampler that emulates the quantization error of codebooks too
large to materialize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import SystemDims
from .rng import as_rng

__all__ = [
    "BITS_CAP",
    "Codebook",
    "ManifoldConstants",
    "haar_point",
    "haar_points",
    "random_unit_vectors",
    "chordal_distance",
    "composite_distance",
    "grassmann_constants",
    "composite_constants",
    "subspace_constants",
    "ncq_constants",
    "ball_volume_coeff",
    "packing_radius",
    "distortion_moment_bounds",
    "perturbation_params",
    "perturb",
    "perturb_at",
    "rvq_codebook",
    "quantize",
    "save_codebook",
    "load_codebook",
    "is_orthonormal",
]

# Materialized codebooks are capped at 2^22 entries; larger feedback budgets
# must go through the perturbation sampler.
BITS_CAP = 22

_LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    if isinstance(shape, int):
        shape = (shape,)
    z = rng.standard_normal(tuple(shape) + (2,))
    return z.view(np.complex128)[..., 0] / np.sqrt(2.0)


def _orthonormalize_batch(G: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of a (batch, n, p) stack in place.

    Two passes of modified Gram-Schmidt, vectorized over the batch axis;
    much faster than per-matrix LAPACK QR for the small, well conditioned
    matrices drawn here.  Column phases are then fixed so that the leading
    diagonal entry of each column is real and positive, which makes the
    representative of every sampled subspace canonical and reproducible.
    """
    Q = np.array(G, dtype=np.complex128, copy=True)
    p = Q.shape[2]
    for _ in range(2):
        for j in range(p):
            v = Q[:, :, j]
            for k in range(j):
                u = Q[:, :, k]
                proj = np.einsum("bn,bn->b", u.conj(), v)
                v -= proj[:, np.newaxis] * u
            norms = np.sqrt(np.einsum("bn,bn->b", v.conj(), v).real)
            v /= norms[:, np.newaxis]
    diag = Q[:, np.arange(p), np.arange(p)]
    mags = np.abs(diag)
    phases = np.where(mags > 1e-300, diag / np.where(mags > 0, mags, 1.0), 1.0)
    Q *= phases.conj()[:, np.newaxis, :]
    return Q


def haar_points(n: int, p: int, count: int, seed) -> np.ndarray:
    """Draw ``count`` independent uniformly distributed p-planes in C^n.

    Each point is obtained by orthonormalizing an n x p standard complex
    Gaussian matrix; the induced subspace distribution is invariant under
    left multiplication by any fixed unitary matrix.
    """
    if p > n:
        raise ValueError("subspace dimension p cannot exceed ambient n")
    rng = as_rng(seed)
    return _orthonormalize_batch(_complex_gaussian(rng, (count, n, p)))


def haar_point(n: int, p: int, seed) -> np.ndarray:
    """Single uniformly distributed point, as an n x p truncated unitary."""
    return haar_points(n, p, 1, seed)[0]


def random_unit_vectors(count: int, L: int, m: int, seed) -> np.ndarray:
    """Draw ``count`` tuples of L isotropic unit vectors in C^m."""
    rng = as_rng(seed)
    g = _complex_gaussian(rng, (count, L, m))
    return g / np.linalg.norm(g, axis=2, keepdims=True)


def is_orthonormal(Q: np.ndarray, tol: float = 1e-10) -> bool:
    """True when Q^H Q equals the identity within ``tol``."""
    p = Q.shape[1]
    return bool(np.linalg.norm(Q.conj().T @ Q - np.eye(p)) <= tol)


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def chordal_distance(X: np.ndarray, Y: np.ndarray) -> float:
    """Chordal distance between the subspaces spanned by X and Y.

    Computed from the projector difference, (1/sqrt(2)) ||XX^H - YY^H||_F,
    which stays accurate down to machine precision for nearly identical
    subspaces.  The value only depends on the spans: replacing X by X @ U
    for unitary U leaves it unchanged.  Bounded by sqrt(p).
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Y.shape}")
    D = X @ X.conj().T - Y @ Y.conj().T
    return float(np.linalg.norm(D) / np.sqrt(2.0))


def composite_distance(Z, T, norm_tol: float = 1e-8) -> float:
    """Distance on the product of line manifolds: sqrt(sum_j (1 - |t_j^H z_j|^2)).

    ``Z`` and ``T`` are equal-length sequences (or (L, m) arrays) of unit
    vectors.  Evaluated through per-pair rank-one projector differences for
    accuracy near zero.  The value lies in [0, sqrt(L)].
    """
    Z = np.asarray(Z)
    T = np.asarray(T)
    if Z.shape != T.shape:
        raise ValueError(f"shape mismatch {Z.shape} vs {T.shape}")
    norms = np.concatenate([np.linalg.norm(Z, axis=1), np.linalg.norm(T, axis=1)])
    if np.any(np.abs(norms - 1.0) > norm_tol):
        raise ValueError("entries must be unit vectors")
    total = 0.0
    for z, t in zip(Z, T):
        D = np.outer(z, z.conj()) - np.outer(t, t.conj())
        total += 0.5 * float(np.linalg.norm(D)) ** 2
    return math.sqrt(max(total, 0.0))


# ---------------------------------------------------------------------------
# manifold constants and analytic bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifoldConstants:
    """Real dimension and ball-volume coefficient of a quantization manifold.

    The coefficient is kept in log form so that packing radii and moment
    bounds can be evaluated for arbitrarily large bit budgets without
    overflow.
    """

    dim_real: int
    log_ball_coeff: float

    @property
    def ball_coeff(self) -> float:
        return math.exp(self.log_ball_coeff)


def _log_ball_coeff(n: int, p: int) -> float:
    # log of  [1 / (p(n-p))!] * prod_{i=1..p} (n-i)! / (p-i)!
    s = -math.lgamma(p * (n - p) + 1)
    for i in range(1, p + 1):
        s += math.lgamma(n - i + 1) - math.lgamma(p - i + 1)
    return s


def grassmann_constants(n: int, p: int) -> ManifoldConstants:
    """Constants of the manifold of p-planes in C^n: dimension 2p(n-p)."""
    if p > n:
        raise ValueError("p cannot exceed n")
    return ManifoldConstants(dim_real=2 * p * (n - p),
                             log_ball_coeff=_log_ball_coeff(n, p))


def composite_constants(L: int, m: int) -> ManifoldConstants:
    """Constants of the product of L line manifolds in C^m.

    The real dimension is 2L(m-1).  The small-ball volume under the product
    metric D^2 = sum d_j^2 follows from a Dirichlet integral over the
    per-factor volumes v_j(delta) = delta^(2(m-1)), giving the coefficient
    Gamma(m)^L / Gamma(L(m-1) + 1).
    """
    if L < 1 or m < 1:
        raise ValueError("need at least one factor and one dimension")
    log_c = L * math.lgamma(m) - math.lgamma(L * (m - 1) + 1)
    return ManifoldConstants(dim_real=2 * L * (m - 1), log_ball_coeff=log_c)


def subspace_constants(dims: SystemDims) -> ManifoldConstants:
    """Constants of the fed-back subspace manifold: N-planes in C^{(K-1)M}."""
    return grassmann_constants(dims.cross_dim, dims.N)


def ncq_constants(dims: SystemDims) -> ManifoldConstants:
    """Constants of the composite manifold used by the NCQ baseline."""
    return composite_constants(dims.K - 1, dims.M * dims.N)


def ball_volume_coeff(dims: SystemDims) -> float:
    """Ball-volume coefficient of the fed-back subspace manifold."""
    return subspace_constants(dims).ball_coeff


def packing_radius(consts: ManifoldConstants, bits: int) -> float:
    """Sphere-packing bound on the worst-case quantization error.

    Delta = 2 / (c * 2^bits)^(1/dim); halves every ``dim`` additional bits.
    """
    if bits < 0:
        raise ValueError("bits must be nonnegative")
    e = (consts.log_ball_coeff + bits * _LN2) / consts.dim_real
    return 2.0 * math.exp(-e)


def distortion_moment_bounds(consts: ManifoldConstants, bits: int,
                             k: int) -> tuple[float, float]:
    """Asymptotic bracket on the k-th chordal-distance moment of RVQ.

    For a random codebook of 2^bits entries on a manifold of real dimension
    Nm with ball coefficient c:

        Nm / ((Nm + k) x)  <=  E[d^k]  <=  Gamma(k/Nm) * (k/Nm) / x,

    with x = (c 2^bits)^(k/Nm).  Returns ``(lower, upper)``.
    """
    if k < 1:
        raise ValueError("moment order k must be >= 1")
    if bits < 0:
        raise ValueError("bits must be nonnegative")
    Nm = consts.dim_real
    scale = math.exp(-(k / Nm) * (consts.log_ball_coeff + bits * _LN2))
    lower = Nm / (Nm + k) * scale
    upper = math.gamma(k / Nm) * (k / Nm) * scale
    return lower, upper


# ---------------------------------------------------------------------------
# codebooks and quantization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Codebook:
    """Indexed RVQ codebook of 2^bits points on one of the two manifolds.

    ``entries`` has shape (2^bits, n, p) for kind ``subspace`` and
    (2^bits, L, m) for kind ``composite``.  Entries are immutable after
    construction and safe to share across concurrent trials.
    """

    kind: str
    entries: np.ndarray
    bits: int
    seed: int | None = None

    @property
    def size(self) -> int:
        return int(self.entries.shape[0])


def rvq_codebook(kind: str, shape: tuple[int, int], bits: int, seed) -> Codebook:
    """Draw an i.i.d. random codebook of 2^bits entries.

    ``shape`` is (n, p) for kind ``subspace`` (Haar-distributed truncated
    unitary entries) and (L, m) for kind ``composite`` (L isotropic unit
    vectors per entry).  Deterministic given the seed; ``bits`` is capped
    at BITS_CAP to bound memory.
    """
    if bits < 0 or bits > BITS_CAP:
        raise ValueError(f"bits must lie in [0, {BITS_CAP}], got {bits}")
    size = 1 << bits
    seed_tag = seed if isinstance(seed, int) else None
    if kind == "subspace":
        n, p = shape
        entries = haar_points(n, p, size, seed)
    elif kind == "composite":
        L, m = shape
        entries = random_unit_vectors(size, L, m, seed)
    else:
        raise ValueError(f"unknown codebook kind {kind!r}")
    return Codebook(kind=kind, entries=entries, bits=bits, seed=seed_tag)


def quantize(point: np.ndarray, cb: Codebook) -> tuple[int, np.ndarray]:
    """Nearest codebook entry under the manifold's distance.

    Returns ``(index, entry)``; ties resolve to the lowest index so that
    results are reproducible.  Internally uses the Gram-based identity
    d^2 = p - ||S^H F||_F^2 (respectively L - sum |t^H z|^2), which gives
    the same ordering as the projector-based distances.
    """
    if cb.size == 0:
        raise ValueError("empty codebook")
    point = np.asarray(point)
    if point.shape != cb.entries.shape[1:]:
        raise ValueError(
            f"point shape {point.shape} does not match codebook entries "
            f"{cb.entries.shape[1:]}"
        )
    if cb.kind == "subspace":
        p = point.shape[1]
        # |S^H F| entrywise equals |F^H S|; conjugating the single point
        # instead of the whole codebook keeps this a plain batched matmul.
        gram = np.matmul(np.ascontiguousarray(point.conj().T), cb.entries)
        d2 = p - np.einsum("kqp,kqp->k", gram, gram.conj()).real
    elif cb.kind == "composite":
        L = point.shape[0]
        inner = np.einsum("lm,klm->kl", point.conj(), cb.entries)
        d2 = L - np.einsum("kl,kl->k", inner, inner.conj()).real
    else:
        raise ValueError(f"unknown codebook kind {cb.kind!r}")
    idx = int(np.argmin(d2))
    return idx, cb.entries[idx]


# ---------------------------------------------------------------------------
# codebook files
# ---------------------------------------------------------------------------

_CODEBOOK_MAGIC = "ia-grassmann-codebook-v1"


def save_codebook(cb: Codebook, path) -> None:
    """Write a codebook as an ASCII header line plus raw complex128 body.

    The body stores the entries row-major as interleaved little-endian
    float64 (real, imag) pairs, so experiments can pin exact codebooks
    across runs and platforms.
    """
    rows, cols = cb.entries.shape[1], cb.entries.shape[2]
    seed = cb.seed if cb.seed is not None else -1
    header = (
        f"{_CODEBOOK_MAGIC} kind={cb.kind} rows={rows} cols={cols} "
        f"bits={cb.bits} seed={seed}\n"
    )
    body = np.ascontiguousarray(cb.entries, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(body.tobytes())


def load_codebook(path) -> Codebook:
    """Read a codebook written by :func:`save_codebook`."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8").strip()
        body = fh.read()
    fields = header.split()
    if not fields or fields[0] != _CODEBOOK_MAGIC:
        raise ValueError(f"{path}: not a codebook file")
    meta = dict(item.split("=", 1) for item in fields[1:])
    kind = meta["kind"]
    rows, cols = int(meta["rows"]), int(meta["cols"])
    bits = int(meta["bits"])
    seed = int(meta["seed"])
    entries = np.frombuffer(body, dtype="<c16").reshape(1 << bits, rows, cols)
    return Codebook(kind=kind, entries=entries.astype(np.complex128),
                    bits=bits, seed=None if seed < 0 else seed)


# ---------------------------------------------------------------------------
# perturbation model for very large codebooks
# ---------------------------------------------------------------------------

def perturbation_params(consts: ManifoldConstants,
                        bits: int) -> tuple[float, float]:
    """Mean and variance of the modeled squared quantization error.

    Uses the upper distortion-moment bounds for k=2 and k=4 (the bracket is
    asymptotically tight, and either end works equally well in practice):
    mean = D2_upper, variance = D4_upper - mean^2.
    """
    rbar = distortion_moment_bounds(consts, bits, 2)[1]
    m4 = distortion_moment_bounds(consts, bits, 4)[1]
    var = m4 - rbar * rbar
    if not math.isfinite(var) or var <= 0.0:
        raise ValueError(f"degenerate perturbation variance {var}")
    return rbar, var


def _haar_complement(F: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random orthonormal basis of the orthogonal complement of span(F)."""
    n, p = F.shape
    G = _complex_gaussian(rng, (n, n - p))
    G -= F @ (F.conj().T @ G)
    return _orthonormalize_batch(G[np.newaxis])[0]


def perturb_at(F: np.ndarray, r: float, rng, max_tries: int = 1000) -> np.ndarray:
    """Random point at exact squared chordal distance ``r`` from span(F).

    Angles are drawn by splitting r over the principal angles through
    uniform weights s_1..s_p, theta_i = asin(s_i sqrt(r) / ||s||), and the
    perturbed representative is F cos(theta) + Fc sin(theta) in the basis
    completed by a random orthonormal complement Fc.  For r > 1 a weight
    draw can be unrealizable (asin argument above one); such draws are
    rejected and retried.
    """
    F = np.asarray(F)
    n, p = F.shape
    if n < 2 * p:
        raise ValueError("perturbation model requires n >= 2p")
    if r < 0.0 or r > p:
        raise ValueError(f"squared distance r={r} outside [0, p]")
    rng = as_rng(rng)
    for _ in range(max_tries):
        s = rng.uniform(size=p)
        ns = np.linalg.norm(s)
        if ns == 0.0:
            continue
        args = s * math.sqrt(r) / ns
        if np.all(args <= 1.0):
            theta = np.arcsin(args)
            Fc = _haar_complement(F, rng)
            return F * np.cos(theta)[np.newaxis, :] + \
                Fc[:, :p] * np.sin(theta)[np.newaxis, :]
    raise RuntimeError(f"could not realize squared distance r={r} "
                       f"after {max_tries} weight draws")


def perturb(F: np.ndarray, bits: int, seed,
            max_tries: int = 10 ** 6) -> np.ndarray:
    """Emulate quantization of span(F) with a 2^bits codebook.

    Draws the squared error r from a normal law with the parameters of
    :func:`perturbation_params`, truncated by rejection to the interval
    (0, Delta^2) with Delta the packing radius (further limited to the
    manifold's maximum p), then returns a point at exactly that distance.
    """
    F = np.asarray(F)
    n, p = F.shape
    if n < 2 * p:
        raise ValueError("perturbation model requires n >= 2p")
    if bits < 1:
        raise ValueError("perturbation model needs bits >= 1")
    consts = grassmann_constants(n, p)
    rbar, var = perturbation_params(consts, bits)
    sigma = math.sqrt(var)
    hi = min(packing_radius(consts, bits) ** 2, float(p))
    rng = as_rng(seed)
    for _ in range(max_tries):
        r = rng.normal(rbar, sigma)
        if not 0.0 < r < hi:
            continue
        try:
            return perturb_at(F, r, rng, max_tries=64)
        except RuntimeError:
            continue
    raise RuntimeError("truncated-normal rejection sampling did not "
                       f"terminate within {max_tries} draws")
