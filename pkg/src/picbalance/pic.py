"""Electrostatic 2D PIC kernel: deposit, field solve, gather, push."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grid import Domain, FieldGrid

logger = logging.getLogger(__name__)

JACOBI_OMEGA = 0.8


@dataclass
class ParticleSet:
    """Structure-of-arrays particle store. Arrays share one length."""

    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    q: np.ndarray
    m: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        n = len(self.x)
        for name in ("y", "vx", "vy", "q", "m", "ids"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"particle array {name!r} has wrong length")
        if n and (np.asarray(self.m) <= 0).any():
            raise ValueError("particle masses must be positive")

    def __len__(self):
        return len(self.x)

    @classmethod
    def empty(cls) -> "ParticleSet":
        z = np.zeros(0)
        return cls(z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy(), np.zeros(0, dtype=np.int64))

    @classmethod
    def from_arrays(cls, x, y, vx=None, vy=None, q=1.0, m=1.0, ids=None) -> "ParticleSet":
        x = np.atleast_1d(np.asarray(x, dtype=np.float64)).copy()
        y = np.atleast_1d(np.asarray(y, dtype=np.float64)).copy()
        n = len(x)
        vx = np.zeros(n) if vx is None else np.broadcast_to(np.asarray(vx, dtype=np.float64), (n,)).copy()
        vy = np.zeros(n) if vy is None else np.broadcast_to(np.asarray(vy, dtype=np.float64), (n,)).copy()
        q = np.broadcast_to(np.asarray(q, dtype=np.float64), (n,)).copy()
        m = np.broadcast_to(np.asarray(m, dtype=np.float64), (n,)).copy()
        ids = np.arange(n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64).copy()
        return cls(x, y, vx, vy, q, m, ids)

    def copy(self) -> "ParticleSet":
        return ParticleSet(*(getattr(self, f).copy() for f in ("x", "y", "vx", "vy", "q", "m", "ids")))


@dataclass(frozen=True)
class TwoStreamConfig:
    n_particles: int = 100_000
    v0: float = 0.2
    q: float = -1.68e-4
    m: float = 1.68e-4
    eps: float = 0.01
    k_mode: int = 2
    seed: int = 1234
    phase: float = 0.0

    def __post_init__(self):
        if self.n_particles < 0 or self.n_particles % 2:
            raise ValueError(f"n_particles must be even and non-negative, got {self.n_particles}")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        if self.m <= 0:
            raise ValueError("mass must be positive")


def init_two_stream(cfg: TwoStreamConfig, dom: Domain) -> ParticleSet:
    """Two counter-streaming cold beams with a sinusoidal displacement in x.

    Positions are uniform, then x -> x + eps*sin(2*pi*k_mode*x/lx + phase).

    Beams are interleaved (even index +v0, odd index -v0) so the momentum
    of every consecutive pair cancels exactly.
    """
    n = cfg.n_particles
    rng = np.random.default_rng(cfg.seed)
    x = rng.random(n) * dom.lx
    y = rng.random(n) * dom.ly
    x = x + cfg.eps * np.sin(2.0 * np.pi * cfg.k_mode * x / dom.lx + cfg.phase)
    x, y = dom.wrap(x, y)
    vx = np.empty(n)
    vx[0::2] = cfg.v0
    vx[1::2] = -cfg.v0
    return ParticleSet(
        x=x,
        y=y,
        vx=vx,
        vy=np.zeros(n),
        q=np.full(n, cfg.q),
        m=np.full(n, cfg.m),
        ids=np.arange(n, dtype=np.int64),
    )


def cic_weights(x, y, fg: FieldGrid):
    """Lower-left node indices and the four CIC weights (00, 10, 01, 11)."""
    gxp = np.asarray(x, dtype=np.float64) / fg.hx
    gyp = np.asarray(y, dtype=np.float64) / fg.hy
    i = np.floor(gxp)
    j = np.floor(gyp)
    fx = gxp - i
    fy = gyp - j
    w = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy])
    return i.astype(np.int64) % fg.nx, j.astype(np.int64) % fg.ny, w


def deposit_raw(particles: ParticleSet, fg: FieldGrid) -> np.ndarray:
    """Raw CIC charge per node, before area normalization."""
    if len(particles) == 0:
        return np.zeros((fg.nx, fg.ny))
    return kernels.deposit_cic(particles.x, particles.y, particles.q, fg.nx, fg.ny, fg.hx, fg.hy)


def deposit_charge(particles: ParticleSet, fg: FieldGrid) -> np.ndarray:
    """Charge density with a neutralizing background (zero mean)."""
    rho = deposit_raw(particles, fg) / (fg.hx * fg.hy)
    return rho - rho.mean()


@dataclass
class FieldSolution:
    phi: np.ndarray
    ex: np.ndarray
    ey: np.ndarray
    iterations: int
    residual: float
    converged: bool


def electric_field(phi: np.ndarray, fg: FieldGrid):
    ex = -(np.roll(phi, -1, 0) - np.roll(phi, 1, 0)) / (2.0 * fg.hx)
    ey = -(np.roll(phi, -1, 1) - np.roll(phi, 1, 1)) / (2.0 * fg.hy)
    return ex, ey


def default_max_iter(fg: FieldGrid) -> int:
    return 20 * max(fg.nx, fg.ny)


def solve_fields(rho, fg: FieldGrid, tol: float = 1e-6, max_iter: int | None = None,
                 phi0=None, omega: float = JACOBI_OMEGA) -> FieldSolution:
    """Solve lap(phi) = -rho on the periodic grid by damped Jacobi.

    ``phi0`` warm-starts the iteration. Non-convergence is not an error:
    the returned solution carries ``converged=False`` and the last residual.
    """
    if max_iter is None:
        max_iter = default_max_iter(fg)
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    phi = np.zeros((fg.nx, fg.ny)) if phi0 is None else np.array(phi0, dtype=np.float64, order="C")
    iters, res = kernels.jacobi_solve(rho, phi, fg.hx, fg.hy, tol, max_iter, omega)
    phi -= phi.mean()
    converged = res <= tol
    if not converged:
        logger.debug("field solve stopped at max_iter=%d with residual %.3e", iters, res)
    ex, ey = electric_field(phi, fg)
    return FieldSolution(phi, ex, ey, int(iters), float(res), bool(converged))


def gather_field(particles: ParticleSet, ex, ey, fg: FieldGrid):
    """Bilinear (CIC) interpolation of nodal E at particle positions."""
    if len(particles) == 0:
        return np.zeros(0), np.zeros(0)
    return kernels.gather_cic(particles.x, particles.y, ex, ey, fg.hx, fg.hy)


def push_particles(particles: ParticleSet, epx, epy, dt: float, dom: Domain) -> None:
    """Leapfrog kick-drift in place, then periodic wrap."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    qm = particles.q / particles.m
    particles.vx += qm * epx * dt
    particles.vy += qm * epy * dt
    particles.x += particles.vx * dt
    particles.y += particles.vy * dt
    particles.x, particles.y = dom.wrap(particles.x, particles.y)


def field_energy(ex, ey, fg: FieldGrid) -> float:
    return float(np.sum(ex * ex + ey * ey) * fg.hx * fg.hy / 2.0)


@dataclass
class PicState:
    """Particles, field grid and solver warm-start kept across steps."""

    particles: ParticleSet
    fg: FieldGrid
    dt: float
    tol: float = 1e-6
    max_iter: int | None = None
    phi: np.ndarray | None = None
    last: FieldSolution | None = field(default=None, repr=False)

    @property
    def dom(self) -> Domain:
        return self.fg.dom

    def solve(self) -> FieldSolution:
        rho = deposit_charge(self.particles, self.fg)
        sol = solve_fields(rho, self.fg, self.tol, self.max_iter, phi0=self.phi)
        self.phi = sol.phi
        self.last = sol
        return sol

    def half_kick_back(self) -> None:
        """Stagger velocities to t = -dt/2."""
        sol = self.solve()
        epx, epy = gather_field(self.particles, sol.ex, sol.ey, self.fg)
        qm = self.particles.q / self.particles.m
        self.particles.vx -= qm * epx * self.dt / 2.0
        self.particles.vy -= qm * epy * self.dt / 2.0


def pic_step(state: PicState) -> float:
    """One A-B-C-D cycle; returns the field energy of this step's solve."""
    sol = state.solve()
    epx, epy = gather_field(state.particles, sol.ex, sol.ey, state.fg)
    push_particles(state.particles, epx, epy, state.dt, state.dom)
    return field_energy(sol.ex, sol.ey, state.fg)
