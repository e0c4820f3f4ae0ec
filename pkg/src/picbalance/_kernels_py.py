"""numpy fallback for the compiled kernels; same formulas, same signatures."""
import numpy as np


def _cic(x, y, nx, ny, hx, hy):
    gxp = x / hx
    gyp = y / hy
    i = np.floor(gxp)
    j = np.floor(gyp)
    fx = gxp - i
    fy = gyp - j
    i = i.astype(np.int64) % nx
    j = j.astype(np.int64) % ny
    ip = i + 1
    jp = j + 1
    ip[ip == nx] = 0
    jp[jp == ny] = 0
    return i, j, ip, jp, fx, fy


def deposit_cic(x, y, q, nx, ny, hx, hy):
    i, j, ip, jp, fx, fy = _cic(x, y, nx, ny, hx, hy)
    size = nx * ny
    rho = np.bincount(i * ny + j, weights=q * (1.0 - fx) * (1.0 - fy), minlength=size)
    rho += np.bincount(ip * ny + j, weights=q * fx * (1.0 - fy), minlength=size)
    rho += np.bincount(i * ny + jp, weights=q * (1.0 - fx) * fy, minlength=size)
    rho += np.bincount(ip * ny + jp, weights=q * fx * fy, minlength=size)
    return rho.reshape(nx, ny)


def gather_cic(x, y, ex, ey, hx, hy):
    nx, ny = ex.shape
    i, j, ip, jp, fx, fy = _cic(x, y, nx, ny, hx, hy)
    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy
    ox = w00 * ex[i, j] + w10 * ex[ip, j] + w01 * ex[i, jp] + w11 * ex[ip, jp]
    oy = w00 * ey[i, j] + w10 * ey[ip, j] + w01 * ey[i, jp] + w11 * ey[ip, jp]
    return ox, oy


def jacobi_solve(rho, phi, hx, hy, tol, max_iter, omega):
    ihx2 = 1.0 / (hx * hx)
    ihy2 = 1.0 / (hy * hy)
    step = omega / (2.0 * ihx2 + 2.0 * ihy2)
    cur = phi.copy()
    it = 0
    while True:
        r = ((np.roll(cur, -1, 0) + np.roll(cur, 1, 0) - 2.0 * cur) * ihx2
             + (np.roll(cur, -1, 1) + np.roll(cur, 1, 1) - 2.0 * cur) * ihy2 + rho)
        rmax = float(np.abs(r).max())
        if rmax <= tol or it >= max_iter:
            break
        cur = cur + step * r
        it += 1
    phi[...] = cur
    return it, rmax


def touched_elements(x, y, rank, nx, ny, hx, hy, cx, cy, gy, n_ranks):
    n_elem = (nx // cx) * gy
    mask = np.zeros(n_ranks * n_elem, dtype=bool)
    i = np.floor(x / hx).astype(np.int64) % nx
    j = np.floor(y / hy).astype(np.int64) % ny
    base = rank * n_elem
    for ii in (i, (i + 1) % nx):
        for jj in (j, (j + 1) % ny):
            mask[base + (ii // cx) * gy + jj // cy] = True
    return mask.reshape(n_ranks, n_elem)
