"""Scratch: profile codebook+quantize path; measure true RVQ mean d^2."""
import time

import numpy as np

from ia_grassmann.grassmann import (distortion_moment_bounds,
                                    grassmann_constants, haar_points,
                                    quantize, rvq_codebook)

# --- profile pieces at bits=15 on G_{4,2}
bits = 15
reps = 20
t0 = time.time()
for r in range(reps):
    cb = rvq_codebook("subspace", (4, 2), bits, (1, r))
t1 = time.time()
print(f"codebook gen: {(t1-t0)/reps*1e3:.1f} ms")
F = haar_points(4, 2, reps, 99)
t2 = time.time()
for r in range(reps):
    quantize(F[r], cb)
t3 = time.time()
print(f"quantize:     {(t3-t2)/reps*1e3:.1f} ms")

from ia_grassmann.grassmann import _complex_gaussian, _orthonormalize_batch
rng = np.random.default_rng(0)
t4 = time.time()
for _ in range(reps):
    G = _complex_gaussian(rng, (1 << bits, 4, 2))
t5 = time.time()
print(f"  gaussian:   {(t5-t4)/reps*1e3:.1f} ms")
t6 = time.time()
for _ in range(reps):
    Q = _orthonormalize_batch(G)
t7 = time.time()
print(f"  orthonorm:  {(t7-t6)/reps*1e3:.1f} ms")

# --- true RVQ mean d^2 at several budgets (fresh codebook per source batch)
consts = grassmann_constants(4, 2)
for b in (5, 10, 12, 15):
    lo, up = distortion_moment_bounds(consts, b, 2)
    n_cb = 40 if b <= 12 else 25
    per = 400
    vals = []
    for c in range(n_cb):
        cb = rvq_codebook("subspace", (4, 2), b, (7, c))
        src = haar_points(4, 2, per, (8, c))
        p = src.shape[2]
        gram = np.einsum("knp,snq->skpq", cb.entries.conj(), src)
        d2 = p - np.sum(np.abs(gram) ** 2, axis=(2, 3))
        vals.append(d2.min(axis=1))
    mean = float(np.mean(np.concatenate(vals)))
    se = float(np.std(np.concatenate(vals)) / np.sqrt(n_cb * per))
    print(f"bits={b:2d}: E[d^2]={mean:.5f} +- {3*se:.5f}   "
          f"bounds=[{lo:.5f}, {up:.5f}]  pos={(mean-lo)/(up-lo):.2f}")
