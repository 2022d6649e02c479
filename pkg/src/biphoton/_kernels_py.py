"""Numpy implementations of the compiled kernels, used when the extension is absent."""
import numpy as np

# pixels per block when materialising the (pixels x nodes) phase table
_BLOCK = 4096


def phase_sums(dk, z, wenv, num_threads=0):
    dk = np.ascontiguousarray(dk, dtype=float)
    out_re = np.empty(dk.shape[0])
    out_im = np.empty(dk.shape[0])
    for lo in range(0, dk.shape[0], _BLOCK):
        arg = np.multiply.outer(dk[lo:lo + _BLOCK], z)
        out_re[lo:lo + _BLOCK] = np.cos(arg) @ wenv
        out_im[lo:lo + _BLOCK] = np.sin(arg) @ wenv
    return out_re, out_im


def bin_events(pos1, pos2, counts):
    m1, m2 = counts.shape
    a = np.floor(pos1)
    b = np.floor(pos2)
    keep = (a >= 0) & (b >= 0) & (a < m1) & (b < m2)
    flat = a[keep].astype(np.int64) * m2 + b[keep].astype(np.int64)
    counts += np.bincount(flat, minlength=m1 * m2).reshape(m1, m2)
    return int(keep.sum())
