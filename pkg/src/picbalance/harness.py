"""Virtual-rank superstep engine.

Particles live in one global id-ordered store with an owning-rank label,
so the physics is identical across strategies and policies; only the
ownership bookkeeping (and therefore loads, migrations and locality)
differs. Cross-rank effects are applied after the push, in id order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from . import kernels
from .config import DYNAMIC, RunConfig
from .grid import CostField, Domain, FieldGrid, GridElementGrid, cost_field_from_particles, imbalance, locate_grid_element
from .orbh import DiffusionParams, OrbHLayout, column_exchange, diffusion_round, orbh_init, orbh_to_map, split_ranks
from .partition import (X, Y, PartitionMap, PartitionTree, boundary_perimeter, migration_cost, rcb,
                        tree_to_map, uniform_blocks, urb, urb_limited)
from .pic import PicState, TwoStreamConfig, init_two_stream, pic_step

logger = logging.getLogger(__name__)


@dataclass
class StepMetrics:
    step: int
    loads: np.ndarray
    imbalance: float
    particles_migrated: int
    cost_migrated: float
    perimeter: int
    touched: np.ndarray      # distinct grid elements reached by each rank's CIC stencils
    owned: np.ndarray        # grid elements owned by each rank
    locality: np.ndarray     # touched / owned (Eulerian) or touched / total (Lagrangian)
    solver_iters: int
    solver_residual: float
    solver_converged: bool
    field_energy: float
    rebalanced: bool

    @property
    def max_load(self) -> int:
        return int(self.loads.max())

    @property
    def mean_load(self) -> float:
        return float(self.loads.mean())

    @property
    def locality_max(self) -> float:
        return float(self.locality.max())


@dataclass
class RankState:
    rank: int
    owned_elements: np.ndarray   # flat element indices
    particle_ids: np.ndarray
    migrated_in: int
    migrated_out: int


class Simulation:
    """One configured run: physics state plus the virtual-rank ownership."""

    def __init__(self, cfg: RunConfig, check_invariants: bool = False):
        cfg = cfg.resolved()
        self.cfg = cfg
        self.check_invariants = check_invariants
        self.dom = Domain(cfg.lx, cfg.ly)
        self.fg = FieldGrid(cfg.nx, cfg.ny, self.dom)
        self.geg = GridElementGrid(cfg.gx, cfg.gy)
        self.fg.check_compatible(self.geg)
        self.P = cfg.ranks
        self.eulerian = cfg.policy == "eulerian"
        self.first_dim = X if cfg.first_cut_dim == "x" else Y
        self.diffusion = DiffusionParams(alpha=cfg.alpha, M=cfg.exchange_period)
        cells = (cfg.nx // cfg.gx) * (cfg.ny // cfg.gy)
        self.fe = np.full(self.geg.shape, cells, dtype=np.int64)

        ts = TwoStreamConfig(cfg.n_particles, cfg.v0, cfg.charge, cfg.mass, cfg.eps, cfg.k_mode, cfg.seed,
                            cfg.perturbation_phase)
        particles = init_two_stream(ts, self.dom)
        self.pic = PicState(particles, self.fg, cfg.dt, cfg.solver_tol, cfg.solver_max_iter)
        if len(particles):
            self.pic.half_kick_back()

        self.tree: Optional[PartitionTree] = None
        self.layout: Optional[OrbHLayout] = None
        self.round = 0
        self.step_no = 0
        ei, ej = self._elements()
        self.pmap = self._initial_map(self.cost_field(ei, ej))
        self.rank = self.pmap.owner[ei, ej]
        self.initial_ids = [np.sort(self.pic.particles.ids[self.rank == r]) for r in range(self.P)]
        self._in = np.zeros(self.P, dtype=np.int64)
        self._out = np.zeros(self.P, dtype=np.int64)

    # -- helpers ---------------------------------------------------------------

    @property
    def particles(self):
        return self.pic.particles

    def _elements(self):
        p = self.pic.particles
        return locate_grid_element(p.x, p.y, self.geg, self.dom)

    def cost_field(self, ei=None, ej=None) -> CostField:
        if ei is None:
            ei, ej = self._elements()
        return cost_field_from_particles(ei, ej, self.geg, self.fe, self.cfg.beta)

    def _initial_map(self, cf: CostField) -> PartitionMap:
        s = self.cfg.strategy
        if s == "static_uniform":
            return uniform_blocks(self.P, self.geg)
        if s == "orbh":
            self.layout = orbh_init(cf, split_ranks(self.P, self.cfg.orbh_columns))
            return orbh_to_map(self.layout)
        build = rcb if s == "rcb" else urb
        self.tree = build(cf, self.P, self.geg, self.first_dim)
        return tree_to_map(self.tree)

    def loads(self) -> np.ndarray:
        return np.bincount(self.rank, minlength=self.P)

    def touched_mask(self) -> np.ndarray:
        """(P, n_elements) mask of elements each rank's CIC stencils reach now."""
        p = self.pic.particles
        if len(p) == 0:
            return np.zeros((self.P, self.geg.n_elements), dtype=bool)
        return kernels.touched_elements(p.x, p.y, self.rank, self.fg.nx, self.fg.ny, self.fg.hx, self.fg.hy,
                                        self.fg.nx // self.geg.gx, self.fg.ny // self.geg.gy,
                                        self.geg.gy, self.P)

    # -- rebalance -----------------------------------------------------------------

    def should_rebalance(self, step: int, ratio: float) -> bool:
        if self.cfg.strategy not in DYNAMIC:
            return False
        if self.cfg.strategy == "orbh":
            return True  # diffusion is incremental: one local round per iteration
        return step % self.cfg.rebalance_every == 0 or ratio > self.cfg.imbalance_threshold

    def rebalance(self, cf: CostField):
        """New map from the active strategy; returns (map, migrated element cost)."""
        s = self.cfg.strategy
        if s in ("urb", "rcb"):
            build = rcb if s == "rcb" else urb
            self.tree = build(cf, self.P, self.geg, self.first_dim)
            new = tree_to_map(self.tree)
        elif s == "urb_limited":
            self.tree = urb_limited(self.tree, cf, self.cfg.adjust_depth_min)
            new = tree_to_map(self.tree)
        elif s == "orbh":
            self.layout, _ = diffusion_round(self.layout, cf, self.round, self.diffusion)
            self.layout = column_exchange(self.layout, cf, self.round, self.diffusion)
            self.round += 1
            new = orbh_to_map(self.layout)
        else:
            return self.pmap, 0
        return new, migration_cost(self.pmap, new, cf)

    # -- stepping ------------------------------------------------------------------

    def superstep(self) -> StepMetrics:
        self.step_no += 1
        step = self.step_no
        touched = self.touched_mask().sum(axis=1)
        energy = pic_step(self.pic)
        sol = self.pic.last
        ei, ej = self._elements()

        migrated = 0
        if self.eulerian:
            migrated += self._reassign(self.pmap.owner[ei, ej])

        ratio = imbalance(self.loads())
        cost_moved = 0
        rebalanced = self.should_rebalance(step, ratio)
        if rebalanced:
            cf = self.cost_field(ei, ej)
            new, cost_moved = self.rebalance(cf)
            self.pmap = new
            if self.eulerian:
                migrated += self._reassign(new.owner[ei, ej])

        loads = self.loads()
        owned = self.pmap.elements_owned()
        if self.eulerian:
            locality = touched / np.maximum(owned, 1)
        else:
            locality = touched / self.geg.n_elements
        if self.check_invariants:
            self.verify(ei, ej)
        return StepMetrics(
            step=step,
            loads=loads,
            imbalance=imbalance(loads),
            particles_migrated=int(migrated),
            cost_migrated=float(cost_moved),
            perimeter=boundary_perimeter(self.pmap),
            touched=touched,
            owned=owned,
            locality=locality,
            solver_iters=sol.iterations,
            solver_residual=sol.residual,
            solver_converged=sol.converged,
            field_energy=energy,
            rebalanced=rebalanced,
        )

    def _reassign(self, new_rank: np.ndarray) -> int:
        moved = new_rank != self.rank
        n = int(moved.sum())
        if n:
            self._out += np.bincount(self.rank[moved], minlength=self.P)
            self._in += np.bincount(new_rank[moved], minlength=self.P)
            self.rank = new_rank
        return n

    def verify(self, ei=None, ej=None) -> None:
        if ei is None:
            ei, ej = self._elements()
        assert self.loads().sum() == self.cfg.n_particles
        if self.eulerian:
            off = int((self.pmap.owner[ei, ej] != self.rank).sum())
            assert off == 0, f"{off} particles reside off their owning rank"
        else:
            for r in range(self.P):
                assert np.array_equal(np.sort(self.pic.particles.ids[self.rank == r]), self.initial_ids[r])

    def rank_states(self) -> List[RankState]:
        flat = self.pmap.owner.ravel()
        return [RankState(r, np.flatnonzero(flat == r), self.pic.particles.ids[self.rank == r],
                          int(self._in[r]), int(self._out[r])) for r in range(self.P)]

    def locality_summary(self) -> np.ndarray:
        """Per-rank touched-element ratio for the current positions."""
        touched = self.touched_mask().sum(axis=1)
        if self.eulerian:
            return touched / np.maximum(self.pmap.elements_owned(), 1)
        return touched / self.geg.n_elements

    def steps(self, n_steps: Optional[int] = None) -> Iterator[StepMetrics]:
        n = self.cfg.n_steps if n_steps is None else n_steps
        unconverged = 0
        for _ in range(n):
            m = self.superstep()
            unconverged += not m.solver_converged
            yield m
        if unconverged:
            logger.info("field solve hit max_iter on %d of %d steps", unconverged, n)


def run(cfg: RunConfig, n_steps: Optional[int] = None, check_invariants: bool = False) -> List[StepMetrics]:
    sim = Simulation(cfg, check_invariants=check_invariants)
    return list(sim.steps(n_steps))


def modeled_step_work(m: StepMetrics, max_iter: int, solver_share: float = 0.1) -> float:
    """Critical-path work of one step.

    Push work is the most loaded rank's particle count; the field solve
    adds at most ``solver_share`` of it, scaled by the fraction of the
    iteration budget it used.
    """
    return m.max_load * (1.0 + solver_share * m.solver_iters / max_iter)
