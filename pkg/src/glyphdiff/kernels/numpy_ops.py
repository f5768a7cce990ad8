"""Pure-numpy conv kernels: sliding-window views feeding BLAS via tensordot."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x_padded, stride):
    win = sliding_window_view(x_padded, (3, 3), axis=(2, 3))
    if stride > 1:
        win = win[:, :, ::stride, ::stride]
    return win


def conv2d_forward(x, w, stride):
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = _windows(xp, stride)
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (B, Ho, Wo, O)
    return np.ascontiguousarray(np.moveaxis(out, 3, 1))


def conv2d_backward_input(dy, w, stride, in_hw):
    # Zero-stuff dy onto the input-resolution grid, then the input gradient
    # is a stride-1 convolution with the spatially-flipped, channel-swapped kernel.
    b, o = dy.shape[:2]
    h, wd = in_hw
    if stride == 1:
        grid = dy
    else:
        grid = np.zeros((b, o, h, wd), dtype=dy.dtype)
        grid[:, :, ::stride, ::stride] = dy
    wf = w[:, :, ::-1, ::-1]
    gp = np.pad(grid, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = _windows(gp, 1)
    dx = np.tensordot(win, wf, axes=([1, 4, 5], [0, 2, 3]))  # (B, H, W, C)
    return np.ascontiguousarray(np.moveaxis(dx, 3, 1))


def conv2d_backward_weight(dy, x, stride):
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = _windows(xp, stride)
    return np.tensordot(dy, win, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, 3, 3)
