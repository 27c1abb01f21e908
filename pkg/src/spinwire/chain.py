"""Chain state, Hamiltonian and observables for the classical ferromagnetic chain.

Everything runs in reduced units: exchange J = 1, spin length S = 1, lattice
spacing d = 1, so energies are in units of JS^2, times in 1/(JS) and the only
tunable chain parameter is the reduced field h along +z.  ``PhysicalUnits``
converts reduced velocities back to laboratory numbers for a given exchange
scale; nothing else in the package touches physical constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

ZHAT = np.array([0.0, 0.0, 1.0])

# k_B / hbar in 1/(s K); fixes the precession rate JS = (JS^2/k_B) * (k_B/hbar) / (S/hbar)
KB_OVER_HBAR = 1.380649e-23 / 1.054571817e-34

UNIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class ChainParams:
    """Chain size and couplings. J, S, d are kept for documentation but the
    simulation assumes the reduced values 1."""

    N: int
    h: float
    J: float = 1.0
    S: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        if self.N < 2:
            raise ConfigError(f"chain needs N >= 2 sites, got N={self.N}")
        if self.h < 0:
            raise ConfigError(f"reduced field must be >= 0, got h={self.h}")
        if self.J <= 0 or self.S <= 0 or self.d <= 0:
            raise ConfigError("J, S, d must all be positive (ferromagnetic chain)")


@dataclass(frozen=True)
class PhysicalUnits:
    """Laboratory-scale sidecar: exchange energy JS^2 in kelvin and the spin
    length in units of hbar (>= 1, chain spins close to classical)."""

    JS2_kelvin: float
    S_over_hbar: float = 1.0
    kB_over_hbar: float = KB_OVER_HBAR

    def __post_init__(self):
        if self.JS2_kelvin <= 0:
            raise ConfigError("exchange energy scale must be positive")
        if self.S_over_hbar < 1:
            raise ConfigError("S/hbar must be >= 1")


class SpinConfig:
    """One chain configuration: an (N, 3) array of unit vectors."""

    __slots__ = ("spins",)

    def __init__(self, spins):
        spins = np.ascontiguousarray(spins, dtype=np.float64)
        if spins.ndim != 2 or spins.shape[1] != 3:
            raise ConfigError(f"spin configuration must have shape (N, 3), got {spins.shape}")
        err = np.abs(np.linalg.norm(spins, axis=1) - 1.0).max()
        if err > UNIT_NORM_TOL:
            raise ConfigError(f"spins must be unit vectors: worst |1-|s|| = {err:.3e}")
        self.spins = spins

    def __len__(self):
        return self.spins.shape[0]

    def __eq__(self, other):
        return isinstance(other, SpinConfig) and np.array_equal(self.spins, other.spins)

    def copy(self) -> "SpinConfig":
        return SpinConfig(self.spins.copy())

    @property
    def sz(self) -> np.ndarray:
        return self.spins[:, 2]


def ground_state(params: ChainParams) -> SpinConfig:
    """Minimum-energy product state: all spins along +z (the h=0 degeneracy is
    resolved by the same convention)."""
    spins = np.zeros((params.N, 3))
    spins[:, 2] = 1.0
    return SpinConfig(spins)


def energy_of(spins: np.ndarray, h: float) -> np.ndarray:
    """Reduced energy of raw spin arrays (..., N, 3); open-chain bond sum."""
    bonds = -np.sum(spins[..., :-1, :] * spins[..., 1:, :], axis=(-1, -2))
    return bonds - h * np.sum(spins[..., 2], axis=-1)


def chain_energy(config: SpinConfig, params: ChainParams) -> float:
    """Open-chain reduced energy: -sum_n s_n.s_{n+1} - h sum_n s_n^z.

    The Zeeman sum runs over all N real sites; the boundary-drive virtual spin
    is externally enforced and carries no Zeeman term of its own.
    """
    if len(config) != params.N:
        raise ConfigError(f"configuration has {len(config)} sites, params.N = {params.N}")
    return float(energy_of(config.spins, params.h))


@dataclass(frozen=True)
class PhysicalEstimate:
    velocity_spacings_per_s: float
    traversal_time_s: float


def to_physical_units(params: ChainParams, phys: PhysicalUnits, scales) -> PhysicalEstimate:
    """Convert a reduced soliton velocity to lattice spacings per second and
    the chain traversal time.

    The reduced velocity is in units d*JS, and the precession rate is
    JS = (JS^2/k_B)(k_B/hbar)/(S/hbar).
    """
    rate = phys.JS2_kelvin * phys.kB_over_hbar / phys.S_over_hbar
    v = scales.v * rate
    return PhysicalEstimate(velocity_spacings_per_s=v, traversal_time_s=params.N / v)
