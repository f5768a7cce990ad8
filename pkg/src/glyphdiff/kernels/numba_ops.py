"""Numba JIT conv kernels.

Each output element is produced by exactly one thread (parallelism is over
disjoint batch/channel slices), so results do not depend on the thread
count and are reproducible run to run.
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, fastmath=True, cache=True)
def _conv_fwd(xp, w, stride, out):
    nb, no, ho, wo = out.shape
    nc = xp.shape[1]
    for bo in prange(nb * no):
        b = bo // no
        o = bo % no
        for h in range(ho):
            ih = h * stride
            row = out[b, o, h]
            for i in range(wo):
                row[i] = 0.0
            for c in range(nc):
                x0 = xp[b, c, ih]
                x1 = xp[b, c, ih + 1]
                x2 = xp[b, c, ih + 2]
                w00 = w[o, c, 0, 0]; w01 = w[o, c, 0, 1]; w02 = w[o, c, 0, 2]
                w10 = w[o, c, 1, 0]; w11 = w[o, c, 1, 1]; w12 = w[o, c, 1, 2]
                w20 = w[o, c, 2, 0]; w21 = w[o, c, 2, 1]; w22 = w[o, c, 2, 2]
                if stride == 1:
                    for i in range(wo):
                        row[i] += (x0[i] * w00 + x0[i + 1] * w01 + x0[i + 2] * w02
                                   + x1[i] * w10 + x1[i + 1] * w11 + x1[i + 2] * w12
                                   + x2[i] * w20 + x2[i + 1] * w21 + x2[i + 2] * w22)
                else:
                    for i in range(wo):
                        j = i * stride
                        row[i] += (x0[j] * w00 + x0[j + 1] * w01 + x0[j + 2] * w02
                                   + x1[j] * w10 + x1[j + 1] * w11 + x1[j + 2] * w12
                                   + x2[j] * w20 + x2[j + 1] * w21 + x2[j + 2] * w22)


@njit(parallel=True, fastmath=True, cache=True)
def _conv_dw(xp, dy, stride, dw):
    no, nc = dw.shape[:2]
    nb, _, ho, wo = dy.shape
    for oc in prange(no * nc):
        o = oc // nc
        c = oc % nc
        a00 = 0.0; a01 = 0.0; a02 = 0.0
        a10 = 0.0; a11 = 0.0; a12 = 0.0
        a20 = 0.0; a21 = 0.0; a22 = 0.0
        for b in range(nb):
            for h in range(ho):
                ih = h * stride
                g = dy[b, o, h]
                x0 = xp[b, c, ih]
                x1 = xp[b, c, ih + 1]
                x2 = xp[b, c, ih + 2]
                for i in range(wo):
                    d = g[i]
                    j = i * stride
                    a00 += x0[j] * d; a01 += x0[j + 1] * d; a02 += x0[j + 2] * d
                    a10 += x1[j] * d; a11 += x1[j + 1] * d; a12 += x1[j + 2] * d
                    a20 += x2[j] * d; a21 += x2[j + 1] * d; a22 += x2[j + 2] * d
        dw[o, c, 0, 0] = a00; dw[o, c, 0, 1] = a01; dw[o, c, 0, 2] = a02
        dw[o, c, 1, 0] = a10; dw[o, c, 1, 1] = a11; dw[o, c, 1, 2] = a12
        dw[o, c, 2, 0] = a20; dw[o, c, 2, 1] = a21; dw[o, c, 2, 2] = a22


def _pad1(x):
    return np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))


def conv2d_forward(x, w, stride):
    b, _, h, wd = x.shape
    ho = (h - 1) // stride + 1
    wo = (wd - 1) // stride + 1
    out = np.empty((b, w.shape[0], ho, wo), dtype=x.dtype)
    _conv_fwd(_pad1(x), w, stride, out)
    return out


def conv2d_backward_input(dy, w, stride, in_hw):
    b, o = dy.shape[:2]
    h, wd = in_hw
    if stride == 1:
        grid = dy
    else:
        grid = np.zeros((b, o, h, wd), dtype=dy.dtype)
        grid[:, :, ::stride, ::stride] = dy
    # stride-1 conv of the stuffed grid with the flipped, channel-swapped kernel
    wf = np.ascontiguousarray(np.transpose(w[:, :, ::-1, ::-1], (1, 0, 2, 3)))
    dx = np.empty((b, w.shape[1], h, wd), dtype=dy.dtype)
    _conv_fwd(_pad1(grid), wf, 1, dx)
    return dx


def conv2d_backward_weight(dy, x, stride):
    dw = np.empty((dy.shape[1], x.shape[1], 3, 3), dtype=x.dtype)
    _conv_dw(_pad1(x), dy, stride, dw)
    return dw
