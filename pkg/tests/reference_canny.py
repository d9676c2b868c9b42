"""Brute-force reference Canny detector used as an independent oracle.

Implements the same pinned algorithm definition as the production detector
(luma weights, Gaussian kernel radius ceil(3*sigma) with edge-replicate
padding, Sobel/8 gradients, magnitude rounding to 9 decimals, plateau
tie-break keeping the first pixel in scan order, border suppression,
8-connected hysteresis) but through an entirely different computational path:
direct 2-D convolution loops and a BFS flood fill instead of vectorized
separable filtering and component labeling.
"""

import math
from collections import deque

import numpy as np


def _pad_replicate(image, r):
    return np.pad(image, r, mode="edge")


def _convolve2d_loops(image, kernel):
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    padded = np.pad(image, ((ry, ry), (rx, rx)), mode="edge")
    h, w = image.shape
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for di in range(kh):
                for dj in range(kw):
                    acc += kernel[di, dj] * padded[i + di, j + dj]
            out[i, j] = acc
    return out


def reference_canny(frame, low=0.1, high=0.2, sigma=1.4):
    h, w = frame.shape[:2]
    gray = np.zeros((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            r, g, b = frame[i, j]
            gray[i, j] = 0.299 * float(r) + 0.587 * float(g) + 0.114 * float(b)

    radius = max(1, int(math.ceil(3.0 * sigma)))
    ks = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel1d = np.exp(-(ks * ks) / (2.0 * sigma * sigma))
    kernel1d /= kernel1d.sum()
    kernel2d = np.outer(kernel1d, kernel1d)
    blurred = _convolve2d_loops(gray, kernel2d)

    sx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64) / 8.0
    gx = _convolve2d_loops(blurred, sx)
    gy = _convolve2d_loops(blurred, sx.T)

    mag = np.zeros((h, w))
    angle = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            mag[i, j] = round(math.hypot(gx[i, j], gy[i, j]), 9)
            angle[i, j] = math.degrees(math.atan2(gy[i, j], gx[i, j])) % 180.0

    neighbors = {
        0: ((0, -1), (0, 1)),
        45: ((-1, 1), (1, -1)),
        90: ((-1, 0), (1, 0)),
        135: ((-1, -1), (1, 1)),
    }
    nms = np.zeros((h, w))
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            a = angle[i, j]
            if a < 22.5 or a >= 157.5:
                direction = 0
            elif a < 67.5:
                direction = 45
            elif a < 112.5:
                direction = 90
            else:
                direction = 135
            (dy1, dx1), (dy2, dx2) = neighbors[direction]
            m = mag[i, j]
            if m > mag[i + dy1, j + dx1] and m >= mag[i + dy2, j + dx2]:
                nms[i, j] = m

    strong = nms >= high
    candidate = nms >= low
    edges = np.zeros((h, w), dtype=np.float32)
    visited = np.zeros((h, w), dtype=bool)
    queue = deque()
    for i in range(h):
        for j in range(w):
            if strong[i, j]:
                queue.append((i, j))
                visited[i, j] = True
                edges[i, j] = 1.0
    while queue:
        i, j = queue.popleft()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                ni, nj = i + di, j + dj
                if 0 <= ni < h and 0 <= nj < w and not visited[ni, nj] and candidate[ni, nj]:
                    visited[ni, nj] = True
                    edges[ni, nj] = 1.0
                    queue.append((ni, nj))
    return edges
