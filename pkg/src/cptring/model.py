"""System parameters and the ring dynamical matrix.

Cavities are ordered ``c = (a_1, b_1, ..., a_n, b_n)`` and indexed from 0:
even indices are gain cavities (``a``), odd indices are loss cavities (``b``).
The equation of motion is ``i dc/dt = M c + d(t)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

GAIN = "gain"
LOSS = "loss"


def site_label(index: int) -> str:
    """1-based cavity label, e.g. ``0 -> 'a1'``, ``5 -> 'b3'``."""
    if index < 0:
        raise ValueError(f"site index must be non-negative, got {index}")
    return ("a" if index % 2 == 0 else "b") + str(index // 2 + 1)


def site_index(label: str) -> int:
    """Inverse of :func:`site_label`."""
    label = label.strip().lower()
    if len(label) < 2 or label[0] not in "ab" or not label[1:].isdigit():
        raise ValueError(f"not a cavity label: {label!r}")
    k = int(label[1:])
    if k < 1:
        raise ValueError(f"cavity labels are 1-based: {label!r}")
    return 2 * (k - 1) + (0 if label[0] == "a" else 1)


def is_gain_site(index: int) -> bool:
    return index % 2 == 0


@dataclass(frozen=True)
class DriveSpec:
    """Coherent drive ``d_site = i E exp(i Delta t)`` on a single cavity."""

    site_index: int = 0
    amplitude_e: float = 0.0
    detuning_delta: float = 0.0

    def __post_init__(self):
        if self.site_index < 0:
            raise ValueError(f"drive site_index must be >= 0, got {self.site_index}")
        if not self.amplitude_e >= 0:
            raise ValueError(f"drive amplitude must be >= 0, got {self.amplitude_e}")
        if not np.isfinite(self.detuning_delta):
            raise ValueError("drive detuning must be finite")


@dataclass(frozen=True)
class SystemParams:
    """Physical configuration of a ring of ``2 * n_pairs`` cavities.

    Parameters
    ----------
    n_pairs : int
        Number of gain/loss pairs.
    kappa : float
        Balanced amplification/dissipation rate, > 0.
    coupling_j : float
        Nearest-neighbour coupling strength, >= 0.
    drive : DriveSpec
        Coherent drive. ``amplitude_e == 0`` means undriven.
    gamma_out : float
        Cavity-to-fiber output coupling rate, >= 0.
    noise_enabled : bool
        Include the amplification noise accompanying the gain.
    """

    n_pairs: int
    kappa: float = 1.0
    coupling_j: float = 0.0
    drive: DriveSpec = field(default_factory=DriveSpec)
    gamma_out: float = 0.0
    noise_enabled: bool = False

    def __post_init__(self):
        if int(self.n_pairs) != self.n_pairs or self.n_pairs < 1:
            raise ValueError(f"n_pairs must be a positive integer, got {self.n_pairs}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not self.coupling_j >= 0:
            raise ValueError(f"coupling_j must be >= 0, got {self.coupling_j}")
        if not self.gamma_out >= 0:
            raise ValueError(f"gamma_out must be >= 0, got {self.gamma_out}")
        if self.drive.site_index >= self.n_cavities:
            raise ValueError(
                f"drive site {self.drive.site_index} outside ring of {self.n_cavities} cavities"
            )

    @property
    def n_cavities(self) -> int:
        return 2 * self.n_pairs

    def with_drive(self, **changes) -> SystemParams:
        """Copy with some drive fields replaced."""
        return replace(self, drive=replace(self.drive, **changes))

    def replace(self, **changes) -> SystemParams:
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class DynamicalMatrix:
    """The ``N x N`` complex matrix ``M`` plus gain/loss tags per site."""

    entries: np.ndarray
    site_parity: tuple[str, ...]

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"dynamical matrix must be square, got shape {entries.shape}")
        if len(self.site_parity) != entries.shape[0]:
            raise ValueError("site_parity length does not match matrix dimension")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "site_parity", tuple(self.site_parity))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def gain_sites(self) -> np.ndarray:
        return np.array([k for k, p in enumerate(self.site_parity) if p == GAIN], dtype=int)

    @property
    def generator(self) -> np.ndarray:
        """``-i M``, the matrix with ``dc/dt = -i M c`` in the undriven case."""
        return -1j * self.entries


def ring_matrix(n_cavities: int, kappa: float, coupling_j: float) -> DynamicalMatrix:
    """Build ``M`` for a ring of ``n_cavities`` alternating gain/loss cavities.

    For two cavities the ring's closing edge and the nearest-neighbour edge join
    the same pair; the entry is ``J`` rather than ``2J``.
    """
    if n_cavities < 2 or n_cavities % 2:
        raise ValueError(f"the ring needs an even number of cavities >= 2, got {n_cavities}")
    diag = np.where(np.arange(n_cavities) % 2 == 0, 1j * kappa, -1j * kappa)
    m = np.diag(diag.astype(complex))
    for k in range(n_cavities):
        nxt = (k + 1) % n_cavities
        m[k, nxt] = coupling_j
        m[nxt, k] = coupling_j
    parity = tuple(GAIN if k % 2 == 0 else LOSS for k in range(n_cavities))
    return DynamicalMatrix(m, parity)


def build_matrix(params: SystemParams) -> DynamicalMatrix:
    return ring_matrix(params.n_cavities, params.kappa, params.coupling_j)


def build_drive(params: SystemParams, t: float) -> np.ndarray:
    """Drive vector ``d(t)``: ``i E exp(i Delta t)`` on the driven site, zero elsewhere."""
    d = np.zeros(params.n_cavities, dtype=complex)
    drive = params.drive
    if drive.amplitude_e != 0:
        d[drive.site_index] = 1j * drive.amplitude_e * np.exp(1j * drive.detuning_delta * t)
    return d


def cyclic_shift(n: int) -> np.ndarray:
    """Permutation matrix ``P`` with ``(P c)_k = c_{k+1 mod n}``."""
    return np.roll(np.eye(n), 1, axis=1)


def check_cpt_symmetry(m: DynamicalMatrix, atol: float = 0.0) -> tuple[bool, float]:
    """Test ``P M P^-1 == conj(M)`` for the one-site cyclic shift ``P``.

    Returns ``(holds, max_violation)``. With the default ``atol=0`` the check is
    exact, which is appropriate because the ring matrix has exactly
    representable entries.
    """
    entries = m.entries
    # P M P^T permutes rows and columns by the same shift; no rounding involved.
    shifted = np.roll(np.roll(entries, -1, axis=0), -1, axis=1)
    violation = float(np.max(np.abs(shifted - np.conj(entries)))) if entries.size else 0.0
    return violation <= atol, violation
