# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled PIC kernels: CIC deposit/gather and the damped Jacobi solve."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs

cnp.import_array()


def deposit_cic(const double[::1] x, const double[::1] y, const double[::1] q,
                int nx, int ny, double hx, double hy):
    cdef Py_ssize_t n = x.shape[0], p
    cdef int i, j, ip, jp
    cdef double gxp, gyp, fx, fy, qp
    out = np.zeros((nx, ny), dtype=np.float64)
    cdef double[:, ::1] rho = out
    for p in range(n):
        gxp = x[p] / hx
        gyp = y[p] / hy
        i = <int>floor(gxp)
        j = <int>floor(gyp)
        fx = gxp - i
        fy = gyp - j
        i = i % nx
        j = j % ny
        if i < 0:
            i += nx
        if j < 0:
            j += ny
        ip = i + 1
        jp = j + 1
        if ip == nx:
            ip = 0
        if jp == ny:
            jp = 0
        qp = q[p]
        rho[i, j] += qp * (1.0 - fx) * (1.0 - fy)
        rho[ip, j] += qp * fx * (1.0 - fy)
        rho[i, jp] += qp * (1.0 - fx) * fy
        rho[ip, jp] += qp * fx * fy
    return out


def gather_cic(const double[::1] x, const double[::1] y,
               const double[:, ::1] ex, const double[:, ::1] ey,
               double hx, double hy):
    cdef Py_ssize_t n = x.shape[0], p
    cdef int nx = ex.shape[0], ny = ex.shape[1]
    cdef int i, j, ip, jp
    cdef double gxp, gyp, fx, fy, w00, w10, w01, w11
    outx = np.empty(n, dtype=np.float64)
    outy = np.empty(n, dtype=np.float64)
    cdef double[::1] ox = outx, oy = outy
    for p in range(n):
        gxp = x[p] / hx
        gyp = y[p] / hy
        i = <int>floor(gxp)
        j = <int>floor(gyp)
        fx = gxp - i
        fy = gyp - j
        i = i % nx
        j = j % ny
        if i < 0:
            i += nx
        if j < 0:
            j += ny
        ip = i + 1
        jp = j + 1
        if ip == nx:
            ip = 0
        if jp == ny:
            jp = 0
        w00 = (1.0 - fx) * (1.0 - fy)
        w10 = fx * (1.0 - fy)
        w01 = (1.0 - fx) * fy
        w11 = fx * fy
        ox[p] = w00 * ex[i, j] + w10 * ex[ip, j] + w01 * ex[i, jp] + w11 * ex[ip, jp]
        oy[p] = w00 * ey[i, j] + w10 * ey[ip, j] + w01 * ey[i, jp] + w11 * ey[ip, jp]
    return outx, outy


cdef inline double _sweep_row(const double[::1] rm, const double[::1] rc, const double[::1] rp,
                              const double[::1] rr, double[::1] out, int ny,
                              double ihx2, double ihy2, double step, double rmax) noexcept nogil:
    cdef int j
    cdef double p, r
    for j in range(ny):
        p = rc[j]
        if j == 0:
            r = (rp[j] + rm[j] - 2.0 * p) * ihx2 + (rc[1] + rc[ny - 1] - 2.0 * p) * ihy2 + rr[j]
        elif j == ny - 1:
            r = (rp[j] + rm[j] - 2.0 * p) * ihx2 + (rc[0] + rc[j - 1] - 2.0 * p) * ihy2 + rr[j]
        else:
            r = (rp[j] + rm[j] - 2.0 * p) * ihx2 + (rc[j + 1] + rc[j - 1] - 2.0 * p) * ihy2 + rr[j]
        if fabs(r) > rmax:
            rmax = fabs(r)
        out[j] = p + step * r
    return rmax


def jacobi_solve(const double[:, ::1] rho, double[:, ::1] phi, double hx, double hy,
                 double tol, int max_iter, double omega):
    """Damped Jacobi on the periodic 5-point Laplacian, updating ``phi`` in place.

    Returns (iterations, max residual of the returned phi).
    """
    cdef int nx = rho.shape[0], ny = rho.shape[1]
    cdef int i, ip, im, it = 0
    cdef double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy)
    cdef double step = omega / (2.0 * ihx2 + 2.0 * ihy2)
    cdef double rmax = 0.0
    buf = np.empty((nx, ny), dtype=np.float64)
    cdef double[:, ::1] nxt = buf
    cdef double[:, ::1] cur = phi
    cdef double[:, ::1] tmp
    with nogil:
        while True:
            rmax = 0.0
            for i in range(nx):
                ip = i + 1 if i + 1 < nx else 0
                im = i - 1 if i > 0 else nx - 1
                rmax = _sweep_row(cur[im], cur[i], cur[ip], rho[i], nxt[i], ny, ihx2, ihy2, step, rmax)
            if rmax <= tol or it >= max_iter:
                break
            tmp = cur
            cur = nxt
            nxt = tmp
            it += 1
    if &cur[0, 0] != &phi[0, 0]:
        phi[:, :] = cur
    return it, rmax


def touched_elements(const double[::1] x, const double[::1] y, const long[::1] rank,
                     int nx, int ny, double hx, double hy, int cx, int cy, int gy, int n_ranks):
    """(n_ranks, n_elements) mask of grid elements holding a CIC stencil node."""
    cdef Py_ssize_t n = x.shape[0], p
    cdef int n_elem = (nx // cx) * gy
    cdef int i, j, ip, jp
    cdef long base
    out = np.zeros((n_ranks, n_elem), dtype=np.bool_)
    cdef cnp.npy_bool[:, ::1] mask = out
    for p in range(n):
        i = <int>floor(x[p] / hx) % nx
        j = <int>floor(y[p] / hy) % ny
        if i < 0:
            i += nx
        if j < 0:
            j += ny
        ip = i + 1
        jp = j + 1
        if ip == nx:
            ip = 0
        if jp == ny:
            jp = 0
        base = rank[p]
        mask[base, (i // cx) * gy + j // cy] = 1
        mask[base, (ip // cx) * gy + j // cy] = 1
        mask[base, (i // cx) * gy + jp // cy] = 1
        mask[base, (ip // cx) * gy + jp // cy] = 1
    return out
