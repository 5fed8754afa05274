"""Pure numpy implementation of the compiled kernels in ``_ext/kernels.pyx``.

Same signature and semantics; one vectorized pass per bond instead of a
fused sweep.
"""
import numpy as np


def _popcount_small(words, half):
    table = _POP_CACHE.get(half)
    if table is None:
        w = np.arange(1 << half)
        table = np.zeros(w.size, dtype=np.int64)
        for p in range(half):
            table += (w >> p) & 1
        _POP_CACHE[half] = table
    return table[words]


_POP_CACHE: dict = {}


def h_step(configs, diag, masks, amps, lo_rank, hi_rank, half, x, out,
           scale=1.0, shift=0.0, beta=0.0, acc=None, coef=0.0):
    dim = configs.shape[0]
    if x.shape[0] != dim or out.shape[0] != dim:
        raise ValueError("vector length does not match the basis")
    if acc is not None and acc.shape[0] != dim:
        raise ValueError("accumulator length does not match the basis")
    lomask = (1 << half) - 1
    s = (diag - shift) * x
    for mask, amp in zip(masks, amps):
        m = configs & mask
        sel = np.flatnonzero((m != 0) & (m != mask))
        f = configs[sel] ^ mask
        lo = f & lomask
        j = lo_rank[lo] + hi_rank[_popcount_small(lo, half), f >> half]
        s[sel] += amp * x[j]
    if beta == 0.0:
        np.multiply(s, scale, out=out)
    else:
        out *= beta
        out += scale * s
    if acc is not None:
        acc += coef * out
