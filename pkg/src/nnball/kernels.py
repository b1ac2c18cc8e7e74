"""Hot numeric kernels: nearest-neighbor radii and disk/square intersection area.

Every kernel exists twice, a numba version (``*_nb``) and a pure-numpy
version (``*_np``).  The public names at the bottom of the module point at
the numba versions unless numba is unavailable or disabled through
``NNBALL_DISABLE_NUMBA``.

All nearest-neighbor routines compute a distance as
``sqrt(sum_k (a_k - b_k) * (a_k - b_k))`` accumulated in coordinate order, so
the brute-force, sorted and grid variants return bit-identical radii.
"""
import math

import numpy as np

from ._accel import HAVE_NUMBA, njit

__all__ = [
    "nn_brute",
    "nn_sorted_1d",
    "nn_grid",
    "nn_batch_sorted_1d",
    "nn_batch_grid_2d",
    "disk_square_area",
    "NUMPY_KERNELS",
    "NUMBA_KERNELS",
]


# ---------------------------------------------------------------------------
# numpy versions
# ---------------------------------------------------------------------------

def _pair_dist_np(a, b):
    # a, b: (..., d)
    diff = a - b
    acc = diff[..., 0] * diff[..., 0]
    for k in range(1, diff.shape[-1]):
        acc = acc + diff[..., k] * diff[..., k]
    return np.sqrt(acc)


def nn_brute_np(points, block=512):
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    out = np.empty(n)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        dist = _pair_dist_np(points[lo:hi, None, :], points[None, :, :])
        dist[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        out[lo:hi] = dist.min(axis=1)
    return out


def nn_sorted_1d_np(x):
    x = np.asarray(x, dtype=np.float64).ravel()
    return nn_batch_sorted_1d_np(x[None, :])[0]


def nn_batch_sorted_1d_np(X):
    """Row-wise 1-d nearest-neighbor distances for a (T, n) array."""
    X = np.asarray(X, dtype=np.float64)
    order = np.argsort(X, axis=1, kind="stable")
    xs = np.take_along_axis(X, order, axis=1)
    gap = xs[:, 1:] - xs[:, :-1]
    gap = np.sqrt(gap * gap)
    best = np.empty_like(xs)
    best[:, 0] = gap[:, 0]
    best[:, -1] = gap[:, -1]
    best[:, 1:-1] = np.minimum(gap[:, :-1], gap[:, 1:])
    out = np.empty_like(best)
    np.put_along_axis(out, order, best, axis=1)
    return out


def _grid_layout(points):
    n, d = points.shape
    lo = points.min(axis=0)
    extent = points.max(axis=0) - lo
    span = float(extent.max())
    if d == 1:
        g = n
    else:
        g = max(1, math.isqrt(n))
    if span == 0.0:
        return lo, 1.0, np.ones(d, dtype=np.int64), True
    h = span / g
    dims = np.minimum((extent / h).astype(np.int64) + 1, g + 1)
    return lo, h, dims, False


def _ring_offsets(k, d):
    if d == 1:
        return np.array([[0]]) if k == 0 else np.array([[-k], [k]])
    if k == 0:
        return np.array([[0, 0]])
    r = np.arange(-k, k + 1)
    top = np.stack([r, np.full_like(r, k)], axis=1)
    bottom = np.stack([r, np.full_like(r, -k)], axis=1)
    inner = np.arange(-k + 1, k)
    left = np.stack([np.full_like(inner, -k), inner], axis=1)
    right = np.stack([np.full_like(inner, k), inner], axis=1)
    return np.concatenate([top, bottom, left, right])


def nn_grid_np(points):
    """Uniform-bucket search with ring expansion, vectorized over points."""
    points = np.asarray(points, dtype=np.float64)
    n, d = points.shape
    if d > 2:
        raise ValueError("grid search supports d <= 2")
    lo, h, dims, degenerate = _grid_layout(points)
    if degenerate:
        return np.zeros(n)
    cell = np.minimum(((points - lo) / h).astype(np.int64), dims - 1)
    strides = np.ones(d, dtype=np.int64)
    if d == 2:
        strides[0] = dims[1]
    cid = cell @ strides
    ncell = int(np.prod(dims))
    counts = np.bincount(cid, minlength=ncell)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    order = np.argsort(cid, kind="stable")
    maxocc = int(counts.max())
    best = np.full(n, np.inf)
    active = np.arange(n)
    kmax = int(dims.max())
    k = 0
    while active.size:
        qcell = cell[active]
        for off in _ring_offsets(k, d):
            nb = qcell + off
            valid = np.all((nb >= 0) & (nb < dims), axis=1)
            if not valid.any():
                continue
            c = np.where(valid, nb @ strides, 0)
            st = starts[c]
            cnt = np.where(valid, counts[c], 0)
            for s in range(maxocc):
                m = s < cnt
                if not m.any():
                    break
                qi = active[m]
                j = order[st[m] + s]
                dist = _pair_dist_np(points[qi], points[j])
                dist[j == qi] = np.inf
                best[qi] = np.minimum(best[qi], dist)
        # one ring of slack guards against cell-assignment rounding
        done = (best[active] <= (k - 1) * h) | (k > kmax)
        active = active[~done]
        k += 1
    return best


def nn_batch_grid_2d_np(X):
    X = np.asarray(X, dtype=np.float64)
    return np.stack([nn_grid_np(X[t]) for t in range(X.shape[0])])


def _quadrant_np(a, b, r):
    # area of {u >= a, v >= b, u^2 + v^2 <= r^2} for b >= 0
    bb = np.minimum(b, r)
    w = np.sqrt(np.maximum(r * r - bb * bb, 0.0))
    lo = np.clip(np.maximum(a, -w), -r, r)
    hi = w
    area = _semi_np(lo, hi, r) - b * (hi - lo)
    return np.where((b < r) & (lo < hi), np.maximum(area, 0.0), 0.0)


def _semi_np(lo, hi, r):
    # integral of sqrt(r^2 - u^2) over [lo, hi], with lo, hi inside [-r, r]
    def prim(u):
        t = np.clip(u / r, -1.0, 1.0)
        return 0.5 * (u * np.sqrt(np.maximum(r * r - u * u, 0.0)) + r * r * np.arcsin(t))

    return prim(hi) - prim(lo)


def _quad_signed_np(a, b, r):
    half = 2.0 * _semi_np(np.clip(a, -r, r), r, r)
    pos = _quadrant_np(a, np.abs(b), r)
    return np.where(b >= 0, pos, half - pos)


def disk_square_area_np(cx, cy, r):
    """Area of the disk S((cx, cy), r) intersected with the unit square."""
    cx, cy, r = np.broadcast_arrays(
        np.asarray(cx, dtype=np.float64),
        np.asarray(cy, dtype=np.float64),
        np.asarray(r, dtype=np.float64),
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        rs = np.where(r > 0, r, 1.0)
        x0, x1 = -cx, 1.0 - cx
        y0, y1 = -cy, 1.0 - cy
        area = (
            _quad_signed_np(x0, y0, rs)
            - _quad_signed_np(x1, y0, rs)
            - _quad_signed_np(x0, y1, rs)
            + _quad_signed_np(x1, y1, rs)
        )
    # disk contains all four corners: the square is covered exactly
    fx = np.maximum(np.abs(cx), np.abs(1.0 - cx))
    fy = np.maximum(np.abs(cy), np.abs(1.0 - cy))
    area = np.where(r >= np.hypot(fx, fy), 1.0, area)
    return np.where(r > 0, np.clip(area, 0.0, 1.0), 0.0)


# ---------------------------------------------------------------------------
# numba versions
# ---------------------------------------------------------------------------

@njit
def _dist_nb(P, i, j):
    acc = 0.0
    for k in range(P.shape[1]):
        t = P[i, k] - P[j, k]
        acc = acc + t * t
    return math.sqrt(acc)


@njit
def nn_brute_nb(P):
    n = P.shape[0]
    out = np.full(n, np.inf)
    for i in range(n):
        best = np.inf
        for j in range(n):
            if j != i:
                dd = _dist_nb(P, i, j)
                if dd < best:
                    best = dd
        out[i] = best
    return out


@njit
def _sorted_row_nb(x, out):
    n = x.shape[0]
    order = np.argsort(x, kind="mergesort")
    prev = np.inf
    for k in range(n):
        i = order[k]
        if k + 1 < n:
            t = x[order[k + 1]] - x[i]
            nxt = math.sqrt(t * t)
        else:
            nxt = np.inf
        out[i] = prev if prev < nxt else nxt
        prev = nxt


@njit
def nn_batch_sorted_1d_nb(X):
    T, n = X.shape
    out = np.empty((T, n))
    for t in range(T):
        _sorted_row_nb(X[t], out[t])
    return out


def nn_sorted_1d_nb(x):
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64).ravel())
    return nn_batch_sorted_1d_nb(x[None, :])[0]


@njit
def _nn_grid_nb(P, out):
    n, d = P.shape
    lo = np.empty(d)
    hi = np.empty(d)
    for k in range(d):
        lo[k] = P[:, k].min()
        hi[k] = P[:, k].max()
    span = 0.0
    for k in range(d):
        if hi[k] - lo[k] > span:
            span = hi[k] - lo[k]
    if span == 0.0:
        out[:] = 0.0
        return
    if d == 1:
        g = n
    else:
        g = int(math.sqrt(n))
        while g * g > n:
            g -= 1
        while (g + 1) * (g + 1) <= n:
            g += 1
        g = max(1, g)
    h = span / g
    dims = np.ones(2, dtype=np.int64)
    for k in range(d):
        dims[k] = min(int((hi[k] - lo[k]) / h) + 1, g + 1)
    cx = np.zeros(n, dtype=np.int64)
    cy = np.zeros(n, dtype=np.int64)
    ncell = dims[0] * dims[1]
    counts = np.zeros(ncell + 1, dtype=np.int64)
    for i in range(n):
        cx[i] = min(int((P[i, 0] - lo[0]) / h), dims[0] - 1)
        if d == 2:
            cy[i] = min(int((P[i, 1] - lo[1]) / h), dims[1] - 1)
        counts[cx[i] * dims[1] + cy[i] + 1] += 1
    for c in range(ncell):
        counts[c + 1] += counts[c]
    fill = counts[:-1].copy()
    order = np.empty(n, dtype=np.int64)
    for i in range(n):
        c = cx[i] * dims[1] + cy[i]
        order[fill[c]] = i
        fill[c] += 1
    kmax = max(dims[0], dims[1])
    for i in range(n):
        best = np.inf
        k = 0
        while True:
            ylo = -k if d == 2 else 0
            yhi = k if d == 2 else 0
            for ox in range(-k, k + 1):
                gx = cx[i] + ox
                if gx < 0 or gx >= dims[0]:
                    continue
                for oy in range(ylo, yhi + 1):
                    if abs(ox) != k and abs(oy) != k:
                        continue
                    gy = cy[i] + oy
                    if gy < 0 or gy >= dims[1]:
                        continue
                    c = gx * dims[1] + gy
                    for s in range(counts[c], counts[c + 1]):
                        j = order[s]
                        if j != i:
                            dd = _dist_nb(P, i, j)
                            if dd < best:
                                best = dd
            if best <= (k - 1) * h or k > kmax:
                break
            k += 1
        out[i] = best


def nn_grid_nb(points):
    P = np.ascontiguousarray(points, dtype=np.float64)
    if P.shape[1] > 2:
        raise ValueError("grid search supports d <= 2")
    out = np.empty(P.shape[0])
    _nn_grid_nb(P, out)
    return out


@njit
def nn_batch_grid_2d_nb(X):
    T, n, _ = X.shape
    out = np.empty((T, n))
    for t in range(T):
        _nn_grid_nb(X[t], out[t])
    return out


@njit
def _semi_nb(lo, hi, r):
    a = min(max(lo / r, -1.0), 1.0)
    b = min(max(hi / r, -1.0), 1.0)
    pa = 0.5 * (lo * math.sqrt(max(r * r - lo * lo, 0.0)) + r * r * math.asin(a))
    pb = 0.5 * (hi * math.sqrt(max(r * r - hi * hi, 0.0)) + r * r * math.asin(b))
    return pb - pa


@njit
def _quadrant_nb(a, b, r):
    if b >= r:
        return 0.0
    w = math.sqrt(max(r * r - b * b, 0.0))
    lo = min(max(max(a, -w), -r), r)
    hi = w
    if lo >= hi:
        return 0.0
    area = _semi_nb(lo, hi, r) - b * (hi - lo)
    return max(area, 0.0)


@njit
def _quad_signed_nb(a, b, r):
    if b >= 0:
        return _quadrant_nb(a, b, r)
    half = 2.0 * _semi_nb(min(max(a, -r), r), r, r)
    return half - _quadrant_nb(a, -b, r)


@njit
def _disk_square_nb(cx, cy, r, out):
    for i in range(cx.shape[0]):
        ri = r[i]
        if ri <= 0.0:
            out[i] = 0.0
            continue
        x0 = -cx[i]
        x1 = 1.0 - cx[i]
        y0 = -cy[i]
        y1 = 1.0 - cy[i]
        fx = max(abs(x0), abs(x1))
        fy = max(abs(y0), abs(y1))
        if ri >= math.hypot(fx, fy):
            out[i] = 1.0
            continue
        v = (
            _quad_signed_nb(x0, y0, ri)
            - _quad_signed_nb(x1, y0, ri)
            - _quad_signed_nb(x0, y1, ri)
            + _quad_signed_nb(x1, y1, ri)
        )
        out[i] = min(max(v, 0.0), 1.0)


def disk_square_area_nb(cx, cy, r):
    cx, cy, r = np.broadcast_arrays(
        np.asarray(cx, dtype=np.float64),
        np.asarray(cy, dtype=np.float64),
        np.asarray(r, dtype=np.float64),
    )
    shape = cx.shape
    out = np.empty(cx.size)
    _disk_square_nb(
        np.ascontiguousarray(cx).ravel(),
        np.ascontiguousarray(cy).ravel(),
        np.ascontiguousarray(r).ravel(),
        out,
    )
    return out.reshape(shape)


def _nn_brute_nb_wrapper(points):
    return nn_brute_nb(np.ascontiguousarray(points, dtype=np.float64))


def _nn_batch_sorted_nb_wrapper(X):
    return nn_batch_sorted_1d_nb(np.ascontiguousarray(X, dtype=np.float64))


def _nn_batch_grid_nb_wrapper(X):
    return nn_batch_grid_2d_nb(np.ascontiguousarray(X, dtype=np.float64))


NUMPY_KERNELS = {
    "nn_brute": nn_brute_np,
    "nn_sorted_1d": nn_sorted_1d_np,
    "nn_grid": nn_grid_np,
    "nn_batch_sorted_1d": nn_batch_sorted_1d_np,
    "nn_batch_grid_2d": nn_batch_grid_2d_np,
    "disk_square_area": disk_square_area_np,
}

if HAVE_NUMBA:
    NUMBA_KERNELS = {
        "nn_brute": _nn_brute_nb_wrapper,
        "nn_sorted_1d": nn_sorted_1d_nb,
        "nn_grid": nn_grid_nb,
        "nn_batch_sorted_1d": _nn_batch_sorted_nb_wrapper,
        "nn_batch_grid_2d": _nn_batch_grid_nb_wrapper,
        "disk_square_area": disk_square_area_nb,
    }
    _ACTIVE = NUMBA_KERNELS
else:
    NUMBA_KERNELS = {}
    _ACTIVE = NUMPY_KERNELS

nn_brute = _ACTIVE["nn_brute"]
nn_sorted_1d = _ACTIVE["nn_sorted_1d"]
nn_grid = _ACTIVE["nn_grid"]
nn_batch_sorted_1d = _ACTIVE["nn_batch_sorted_1d"]
nn_batch_grid_2d = _ACTIVE["nn_batch_grid_2d"]
disk_square_area = _ACTIVE["disk_square_area"]
