"""Matrix-free stencil kernels and a geometric multigrid V-cycle.

Grids are square, vertex-centred and stored with one ghost layer of zeros:
an array of shape (n + 2, n + 2) holds n x n active nodes at indices 1..n.
A symmetric 9-point operator is kept as its diagonal ``c`` plus the entries
towards (i+1, j) ``ax``, (i, j+1) ``ay``, (i+1, j+1) ``ad`` and
(i+1, j-1) ``aa``; the remaining four follow by symmetry.  Nodes with
``mask == 0`` are eliminated (Dirichlet) and carry a unit diagonal.

Coarse operators are Galerkin products P^T A P with bilinear interpolation,
recovered from nine probe vectors coloured by index mod 3.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit

_MAX_COARSE = 65


@njit(cache=True)
def _matvec(c, ax, ay, ad, aa, diag9, m, x, y):
    n = c.shape[0] - 2
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if m[i, j]:
                s = (
                    c[i, j] * x[i, j]
                    + ax[i, j] * x[i + 1, j]
                    + ax[i - 1, j] * x[i - 1, j]
                    + ay[i, j] * x[i, j + 1]
                    + ay[i, j - 1] * x[i, j - 1]
                )
                if diag9:
                    s += (
                        ad[i, j] * x[i + 1, j + 1]
                        + ad[i - 1, j - 1] * x[i - 1, j - 1]
                        + aa[i, j] * x[i + 1, j - 1]
                        + aa[i - 1, j + 1] * x[i - 1, j + 1]
                    )
                y[i, j] = s
            else:
                y[i, j] = 0.0


@njit(cache=True)
def _residual(c, ax, ay, ad, aa, diag9, m, x, b, r):
    n = c.shape[0] - 2
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if m[i, j]:
                s = (
                    c[i, j] * x[i, j]
                    + ax[i, j] * x[i + 1, j]
                    + ax[i - 1, j] * x[i - 1, j]
                    + ay[i, j] * x[i, j + 1]
                    + ay[i, j - 1] * x[i, j - 1]
                )
                if diag9:
                    s += (
                        ad[i, j] * x[i + 1, j + 1]
                        + ad[i - 1, j - 1] * x[i - 1, j - 1]
                        + aa[i, j] * x[i + 1, j - 1]
                        + aa[i - 1, j + 1] * x[i - 1, j + 1]
                    )
                r[i, j] = b[i, j] - s
            else:
                r[i, j] = 0.0


@njit(cache=True)
def _gs_colour(c, ax, ay, ad, aa, diag9, m, x, b, pi, pj):
    n = c.shape[0] - 2
    for i in range(2 - pi, n + 1, 2):
        for j in range(2 - pj, n + 1, 2):
            if m[i, j]:
                s = (
                    ax[i, j] * x[i + 1, j]
                    + ax[i - 1, j] * x[i - 1, j]
                    + ay[i, j] * x[i, j + 1]
                    + ay[i, j - 1] * x[i, j - 1]
                )
                if diag9:
                    s += (
                        ad[i, j] * x[i + 1, j + 1]
                        + ad[i - 1, j - 1] * x[i - 1, j - 1]
                        + aa[i, j] * x[i + 1, j - 1]
                        + aa[i - 1, j + 1] * x[i - 1, j + 1]
                    )
                x[i, j] = (b[i, j] - s) / c[i, j]


@njit(cache=True)
def _restrict(rf, mf, rc):
    """rc = P^T (mf * rf), full weighting without normalisation."""
    nc = rc.shape[0] - 2
    for I in range(1, nc + 1):
        fi = 2 * I - 1
        for J in range(1, nc + 1):
            fj = 2 * J - 1
            s = 0.0
            for di in range(-1, 2):
                wi = 1.0 if di == 0 else 0.5
                for dj in range(-1, 2):
                    wj = 1.0 if dj == 0 else 0.5
                    if mf[fi + di, fj + dj]:
                        s += wi * wj * rf[fi + di, fj + dj]
            rc[I, J] = s


@njit(cache=True)
def _prolong_add(xc, mf, xf):
    """xf += mf * (P xc), bilinear interpolation."""
    nf = xf.shape[0] - 2
    for i in range(1, nf + 1):
        if i % 2 == 1:
            i0 = (i + 1) // 2
            i1 = i0
            wi0 = 1.0
            wi1 = 0.0
        else:
            i0 = i // 2
            i1 = i0 + 1
            wi0 = 0.5
            wi1 = 0.5
        for j in range(1, nf + 1):
            if not mf[i, j]:
                continue
            if j % 2 == 1:
                j0 = (j + 1) // 2
                j1 = j0
                wj0 = 1.0
                wj1 = 0.0
            else:
                j0 = j // 2
                j1 = j0 + 1
                wj0 = 0.5
                wj1 = 0.5
            xf[i, j] += (
                wi0 * wj0 * xc[i0, j0]
                + wi0 * wj1 * xc[i0, j1]
                + wi1 * wj0 * xc[i1, j0]
                + wi1 * wj1 * xc[i1, j1]
            )


@njit(cache=True)
def _probe_vector(nc, ci, cj, out):
    for I in range(1, nc + 1):
        for J in range(1, nc + 1):
            out[I, J] = 1.0 if (I % 3 == ci and J % 3 == cj) else 0.0


@njit(cache=True)
def _collect_coarse(Q, c, ax, ay, ad, aa):
    nc = c.shape[0] - 2
    for I in range(1, nc + 1):
        for J in range(1, nc + 1):
            c[I, J] = Q[(I % 3) * 3 + J % 3, I, J]
            if I < nc:
                ax[I, J] = Q[((I + 1) % 3) * 3 + J % 3, I, J]
            if J < nc:
                ay[I, J] = Q[(I % 3) * 3 + (J + 1) % 3, I, J]
            if I < nc and J < nc:
                ad[I, J] = Q[((I + 1) % 3) * 3 + (J + 1) % 3, I, J]
            if I < nc and J > 1:
                aa[I, J] = Q[((I + 1) % 3) * 3 + (J - 1) % 3, I, J]


@njit(cache=True)
def _kill_dead(c, ax, ay, ad, aa, m):
    n = c.shape[0] - 2
    for I in range(1, n + 1):
        for J in range(1, n + 1):
            if not m[I, J]:
                c[I, J] = 1.0
                ax[I, J] = 0.0
                ay[I, J] = 0.0
                ad[I, J] = 0.0
                aa[I, J] = 0.0
                ax[I - 1, J] = 0.0
                ay[I, J - 1] = 0.0
                ad[I - 1, J - 1] = 0.0
                aa[I - 1, J + 1] = 0.0


@njit(cache=True)
def dot(x, y):
    """Sequential inner product (fixed summation order)."""
    xf = x.ravel()
    yf = y.ravel()
    s = 0.0
    for k in range(xf.size):
        s += xf[k] * yf[k]
    return s


_EMPTY = np.zeros((1, 1))


class Level:
    """One grid level: operator arrays, mask and work vectors."""

    def __init__(self, c, ax, ay, mask, ad=None, aa=None):
        self.n = c.shape[0] - 2
        self.c, self.ax, self.ay = c, ax, ay
        self.diag9 = ad is not None
        self.ad = ad if ad is not None else _EMPTY
        self.aa = aa if aa is not None else _EMPTY
        self.mask = mask
        shape = c.shape
        self.x = np.zeros(shape)
        self.r = np.zeros(shape)
        self.b = np.zeros(shape)

    def _args(self):
        return self.c, self.ax, self.ay, self.ad, self.aa, self.diag9, self.mask

    def matvec(self, x, out):
        _matvec(*self._args(), x, out)
        return out

    def residual(self, x, b, out):
        _residual(*self._args(), x, b, out)
        return out

    def smooth(self, x, b, order):
        for pi, pj in order:
            _gs_colour(*self._args(), x, b, pi, pj)


def padded_size(n: int, max_coarse: int = _MAX_COARSE) -> tuple[int, int]:
    """Smallest q*2**p + 1 >= n with q + 1 <= max_coarse; returns (size, levels)."""
    p = 0
    while math.ceil((n - 1) / 2**p) + 1 > max_coarse:
        p += 1
    q = math.ceil((n - 1) / 2**p)
    return q * 2**p + 1, p + 1


def fine_level(wx: np.ndarray, wy: np.ndarray, free: np.ndarray, size: int | None = None) -> Level:
    """Ghosted 5-point level for the edge weights of an n x n node grid.

    ``wx[i, j]`` weights edge (i,j)-(i+1,j), ``wy[i, j]`` edge (i,j)-(i,j+1).
    Edges to eliminated nodes enter the diagonal only.  The grid is embedded
    in a ``size`` x ``size`` array of dead nodes when ``size > n``.
    """
    n = free.shape[0]
    N = n if size is None else size
    c = np.zeros((N + 2, N + 2))
    ax = np.zeros((N + 2, N + 2))
    ay = np.zeros((N + 2, N + 2))
    mask = np.zeros((N + 2, N + 2), dtype=np.uint8)
    a = slice(1, n + 1)
    mask[a, a] = free
    diag = np.zeros((n, n))
    diag[:-1, :] += wx
    diag[1:, :] += wx
    diag[:, :-1] += wy
    diag[:, 1:] += wy
    c[a, a] = np.where(free, diag, 1.0)
    c[mask == 0] = 1.0
    both_x = free[:-1, :] & free[1:, :]
    both_y = free[:, :-1] & free[:, 1:]
    ax[1:n, 1 : n + 1] = np.where(both_x, -wx, 0.0)
    ay[1 : n + 1, 1:n] = np.where(both_y, -wy, 0.0)
    return Level(c, ax, ay, mask)


def galerkin_coarse(fine: Level) -> Level:
    nf = fine.n
    nc = (nf + 1) // 2
    shape_c = (nc + 2, nc + 2)
    Q = np.zeros((9,) + shape_c)
    pc = np.zeros(shape_c)
    pf = np.zeros_like(fine.c)
    qf = np.zeros_like(fine.c)
    for ci in range(3):
        for cj in range(3):
            _probe_vector(nc, ci, cj, pc)
            pf[...] = 0.0
            _prolong_add(pc, fine.mask, pf)
            fine.matvec(pf, qf)
            _restrict(qf, fine.mask, Q[ci * 3 + cj])
    c = np.zeros(shape_c)
    ax = np.zeros(shape_c)
    ay = np.zeros(shape_c)
    ad = np.zeros(shape_c)
    aa = np.zeros(shape_c)
    _collect_coarse(Q, c, ax, ay, ad, aa)
    cmax = np.abs(c).max()
    mask = np.zeros(shape_c, dtype=np.uint8)
    mask[1:-1, 1:-1] = c[1:-1, 1:-1] > 1e-12 * cmax
    _kill_dead(c, ax, ay, ad, aa, mask)
    return Level(c, ax, ay, mask, ad, aa)


class CoarseDirect:
    """Sparse LU of the coarsest level restricted to its free nodes."""

    def __init__(self, lev: Level):
        n = lev.n
        act = lev.mask[1:-1, 1:-1].astype(bool)
        num = -np.ones((n + 2, n + 2), dtype=np.int64)
        num[1:-1, 1:-1][act] = np.arange(act.sum())
        self.num = num
        self.act = act
        rows, cols, vals = [], [], []
        I, J = np.nonzero(act)
        I = I + 1
        J = J + 1
        k = num[I, J]
        rows.append(k)
        cols.append(k)
        vals.append(lev.c[I, J])
        offs = [(1, 0, lev.ax), (0, 1, lev.ay)]
        if lev.diag9:
            offs += [(1, 1, lev.ad), (1, -1, lev.aa)]
        for di, dj, arr in offs:
            k2 = num[I + di, J + dj]
            ok = k2 >= 0
            v = arr[I, J][ok]
            rows += [k[ok], k2[ok]]
            cols += [k2[ok], k[ok]]
            vals += [v, v]
        nf = int(act.sum())
        A = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nf, nf)
        )
        self.solve_lu = spla.factorized(A) if nf else None

    def __call__(self, b, out):
        out[...] = 0.0
        if self.solve_lu is not None:
            out[1:-1, 1:-1][self.act] = self.solve_lu(b[1:-1, 1:-1][self.act])
        return out


_PRE = ((0, 0), (1, 0), (0, 1), (1, 1))
_POST = _PRE[::-1]


class Multigrid:
    """Symmetric V-cycle usable as an SPD preconditioner for CG."""

    def __init__(self, fine: Level, nlevels: int, sweeps: int = 1):
        self.levels = [fine]
        for _ in range(nlevels - 1):
            self.levels.append(galerkin_coarse(self.levels[-1]))
        self.coarse = CoarseDirect(self.levels[-1])
        self.sweeps = sweeps

    def _cycle(self, k: int, b: np.ndarray, x: np.ndarray) -> None:
        lev = self.levels[k]
        if k == len(self.levels) - 1:
            self.coarse(b, x)
            return
        x[...] = 0.0
        for _ in range(self.sweeps):
            lev.smooth(x, b, _PRE)
        lev.residual(x, b, lev.r)
        nxt = self.levels[k + 1]
        _restrict(lev.r, lev.mask, nxt.b)
        nxt.b *= nxt.mask
        self._cycle(k + 1, nxt.b, nxt.x)
        _prolong_add(nxt.x, lev.mask, x)
        for _ in range(self.sweeps):
            lev.smooth(x, b, _POST)

    def __call__(self, r: np.ndarray, out: np.ndarray) -> np.ndarray:
        self._cycle(0, r, out)
        return out
