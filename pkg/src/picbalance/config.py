"""Run configuration: flat ``key = value`` text with ``#`` comments."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import Optional

from .grid import GridElementGrid
from .partition import factor_pairs, hostable, is_power_of_two

STRATEGIES = ("static_uniform", "static_urb", "rcb", "urb", "urb_limited", "orbh")
DYNAMIC = ("rcb", "urb", "urb_limited", "orbh")
POLICIES = ("eulerian", "lagrangian")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    lx: float = 1.0
    ly: float = 1.0
    nx: int = 64
    ny: int = 64
    gx: int = 16
    gy: int = 16
    ranks: int = 8
    strategy: str = "urb"
    policy: str = "eulerian"
    n_particles: int = 100_000
    v0: float = 0.2
    # auto: total plasma frequency `plasma_frequency`, q/m = -1
    charge: Optional[float] = None
    mass: Optional[float] = None
    plasma_frequency: float = 4.1
    eps: float = 0.01
    k_mode: int = 2
    # quarter-wavelength shift keeps the bunches off the static block edges
    perturbation_phase: float = 1.5707963267948966
    # auto: 0.1 * min(hx, hy) / v0
    dt: Optional[float] = None
    n_steps: int = 500
    seed: int = 1234
    rebalance_every: int = 10
    imbalance_threshold: float = 1.2
    beta: float = 0.0
    alpha: float = 0.5
    exchange_period: int = 4
    adjust_depth_min: int = 1
    first_cut_dim: str = "y"
    # 0: most-square factor of ranks along x
    orbh_columns: int = 0
    solver_tol: float = 1e-6
    # 0: 20 * max(nx, ny)
    solver_max_iter: int = 0
    output_dir: str = "out"
    snapshot_every: int = 100

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    def resolved(self) -> "RunConfig":
        """Fill every auto value with its concrete number, then validate."""
        changes = {}
        if self.charge is None:
            n = max(self.n_particles, 1)
            changes["charge"] = -(self.plasma_frequency ** 2) * self.lx * self.ly / n
        q = changes.get("charge", self.charge)
        if self.mass is None:
            changes["mass"] = abs(q) if q else 1.0
        if self.dt is None:
            h = min(self.lx / self.nx, self.ly / self.ny)
            changes["dt"] = 0.1 * h / self.v0 if self.v0 > 0 else 0.1 * h
        if self.orbh_columns == 0:
            changes["orbh_columns"] = _auto_columns(self)
        if self.solver_max_iter == 0:
            changes["solver_max_iter"] = 20 * max(self.nx, self.ny)
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg}")

        need(self.lx > 0, "lx", "must be > 0")
        need(self.ly > 0, "ly", "must be > 0")
        need(self.nx >= 2 and self.ny >= 2, "nx/ny", "need at least 2 field nodes per axis")
        need(self.gx >= 1 and self.gy >= 1, "gx/gy", "need at least one grid element per axis")
        need(self.nx % self.gx == 0, "nx", f"nx={self.nx} must be divisible by gx={self.gx}")
        need(self.ny % self.gy == 0, "ny", f"ny={self.ny} must be divisible by gy={self.gy}")
        need(self.strategy in STRATEGIES, "strategy", f"must be one of {', '.join(STRATEGIES)}")
        need(self.policy in POLICIES, "policy", f"must be one of {', '.join(POLICIES)}")
        need(self.ranks >= 1, "ranks", "must be >= 1")
        need(self.ranks <= self.gx * self.gy, "ranks", f"{self.ranks} ranks exceed {self.gx * self.gy} grid elements")
        if self.strategy == "rcb":
            need(is_power_of_two(self.ranks), "ranks",
                 f"RCB requires a power-of-two rank count, got {self.ranks} (use strategy = urb)")
        if self.strategy in ("static_urb", "rcb", "urb", "urb_limited"):
            need(hostable(self.gx, self.gy, self.ranks), "ranks",
                 f"{self.gx}x{self.gy} elements cannot be bisected into {self.ranks} rectangles")
        if self.strategy == "static_uniform":
            need(any(a <= self.gx and b <= self.gy for a, b in factor_pairs(self.ranks)), "ranks",
                 f"no {self.ranks}-rank block grid fits {self.gx}x{self.gy} elements")
        if self.strategy == "orbh":
            c = self.orbh_columns
            need(1 <= c <= min(self.ranks, self.gx), "orbh_columns",
                 f"must be in [1, min(ranks, gx)], got {c}")
            need(-(-self.ranks // c) <= self.gy, "orbh_columns",
                 f"{c} columns put more ranks in a column than gy={self.gy} rows")
        need(self.n_particles >= 0 and self.n_particles % 2 == 0, "n_particles", "must be even and >= 0")
        need(self.v0 >= 0, "v0", "must be >= 0")
        need(self.mass is None or self.mass > 0, "mass", "must be > 0")
        need(self.eps >= 0, "eps", "must be >= 0")
        need(self.dt is None or self.dt > 0, "dt", "must be > 0")
        need(self.n_steps >= 0, "n_steps", "must be >= 0")
        need(self.rebalance_every >= 1, "rebalance_every", "must be >= 1")
        need(self.imbalance_threshold >= 1.0, "imbalance_threshold", "must be >= 1")
        need(self.beta >= 0, "beta", "must be >= 0")
        need(0.0 <= self.alpha <= 1.0, "alpha", "must lie in [0, 1]")
        need(self.exchange_period >= 1, "exchange_period", "must be >= 1")
        need(self.adjust_depth_min >= 0, "adjust_depth_min", "must be >= 0")
        need(self.first_cut_dim in ("x", "y"), "first_cut_dim", "must be x or y")
        need(self.solver_tol > 0, "solver_tol", "must be > 0")
        need(self.solver_max_iter >= 0, "solver_max_iter", "must be >= 0")
        need(self.snapshot_every >= 0, "snapshot_every", "must be >= 0")


def _auto_columns(cfg: RunConfig) -> int:
    for a, b in factor_pairs(cfg.ranks):
        if a <= cfg.gx and b <= cfg.gy:
            return a
    return min(cfg.ranks, cfg.gx)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_AUTO = {"charge", "mass", "dt"}


def _convert(key: str, raw: str):
    f = _FIELDS[key]
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    if key in _AUTO and raw.lower() == "auto":
        return None
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {'an integer' if 'int' in kind else 'a number'}, got {raw!r}") from None
    return raw


def parse_config(text: str, resolve: bool = True) -> RunConfig:
    """Parse config text; unknown keys and bad values raise ConfigError."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{key}: unknown configuration key")
        values[key] = _convert(key, raw)
    cfg = RunConfig(**values)
    return cfg.resolved() if resolve else cfg


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {'auto' if v is None else repr(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"
