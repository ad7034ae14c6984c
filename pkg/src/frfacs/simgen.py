"""Synthetic imbalanced functional data: Gaussian coefficients on a sinusoidal basis plus noise."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .fdata import FunctionalDataset, Grid, fourier_basis

DEFAULT_SEPARATION = 1.0


def default_class_means(m0: int, delta: float = DEFAULT_SEPARATION) -> list:
    """Class 0 at the origin, class 1 at (delta, delta/2, delta/4, ...)."""
    return [[0.0] * m0, [delta / 2.0**m for m in range(m0)]]


def default_tau(m0: int) -> list:
    return [1.0 / (m + 1) for m in range(m0)]


@dataclass(frozen=True)
class SimConfig:
    """Data-generating parameters.

    Curves are ``sum_m alpha_m phi_m(t) + eps(t)`` on a uniform grid over
    [0, 1], with ``phi`` the normalised Fourier family (constant, sin, cos,
    ...), ``alpha_m | y=k ~ N(class_means[k][m], tau[m]^2)`` and i.i.d.
    ``N(0, noise_sd^2)`` noise per grid point. ``R`` is the majority:minority
    ratio; class 0 is the majority.
    """

    n: int = 500
    R: float = 5.0
    grid_size: int = 101
    M0: int = 5
    class_means: Optional[list] = None
    tau: Optional[list] = None
    noise_sd: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.class_means is None:
            object.__setattr__(self, "class_means", default_class_means(self.M0))
        if self.tau is None:
            object.__setattr__(self, "tau", default_tau(self.M0))
        if self.R < 1:
            raise ConfigurationError("R must be >= 1")
        if self.n < 4:
            raise ConfigurationError("n must be >= 4")
        if self.M0 < 1:
            raise ConfigurationError("M0 must be >= 1")
        if self.grid_size < 2:
            raise ConfigurationError("grid_size must be >= 2")
        if len(self.tau) != self.M0 or any(t <= 0 for t in self.tau):
            raise ConfigurationError("tau must hold M0 positive values")
        if len(self.class_means) != 2 or any(len(m) != self.M0 for m in self.class_means):
            raise ConfigurationError("class_means must hold two vectors of length M0")
        if self.noise_sd < 0:
            raise ConfigurationError("noise_sd must be >= 0")

    @property
    def class_sizes(self) -> tuple:
        n0 = int(np.floor(self.R / (1.0 + self.R) * self.n))
        return n0, self.n - n0

    def to_dict(self) -> dict:
        return asdict(self)


def generate(cfg: SimConfig) -> FunctionalDataset:
    """Draw a dataset with ``n0 = floor(R/(1+R) n)`` class-0 and ``n - n0`` class-1 curves."""
    n0, n1 = cfg.class_sizes
    if n1 < 1:
        raise ConfigurationError(f"R={cfg.R} leaves no minority samples for n={cfg.n}")
    grid = Grid.uniform(cfg.grid_size)
    phi = fourier_basis(grid, cfg.M0).values
    rng = np.random.default_rng(cfg.seed)
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    means = np.asarray(cfg.class_means, dtype=float)[labels]
    alpha = means + rng.standard_normal((cfg.n, cfg.M0)) * np.asarray(cfg.tau, dtype=float)
    noise = rng.standard_normal((cfg.n, cfg.grid_size)) * cfg.noise_sd
    values = alpha @ phi.T + noise
    return FunctionalDataset(grid, values, labels, ["0", "1"])


@dataclass(frozen=True)
class Scenario:
    """A named simulation setting: DGP plus the FPCA dimension and model variant to run."""

    name: str
    sim: SimConfig
    fpca_dim: int = 10
    variant: str = "smote"

    def to_dict(self) -> dict:
        return {"name": self.name, "sim": self.sim.to_dict(), "fpca_dim": self.fpca_dim, "variant": self.variant}


# (noise SD, majority:minority, FPCA dimension) per imbalance scenario
SIMULATION_ROWS = [
    (0.05, 2, 5),
    (0.05, 5, 10),
    (0.10, 5, 10),
    (0.10, 10, 15),
    (0.20, 10, 15),
]
SAMPLE_SIZES = (100, 300, 500, 800, 1000)


def default_scenarios(seed: int = 0, n: int = 500) -> list:
    """Imbalance scenarios x {baseline, smote} plus the sample-size ladder."""
    out = []
    for noise, ratio, dim in SIMULATION_ROWS:
        for variant in ("baseline", "smote"):
            name = f"t2_noise{noise:.2f}_r{ratio}_m{dim}_{variant}"
            out.append(Scenario(name, SimConfig(n=n, R=float(ratio), noise_sd=noise, seed=seed), dim, variant))
    for size in SAMPLE_SIZES:
        out.append(Scenario(f"n{size}", SimConfig(n=size, R=5.0, noise_sd=0.05, seed=seed), 10, "smote"))
    return out


def get_scenario(name: str, seed: int = 0) -> Scenario:
    for s in default_scenarios(seed):
        if s.name == name:
            return s
    raise KeyError(f"unknown scenario {name!r}")


def scenario_manifest(scenarios) -> str:
    return json.dumps([s.to_dict() for s in scenarios], indent=2, sort_keys=True)
