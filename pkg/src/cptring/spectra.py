"""Eigen-analysis of ``-i M``: supermode spectra, exceptional points, regimes.

The ring has a two-site unit cell, so ``-i M`` block-diagonalises over the
``n`` Bloch momenta ``q = 2 pi k / n``. Each block gives a pair

    lambda_k = +/- sqrt(kappa^2 - 4 J^2 cos^2(pi k / n)),

with ``k`` and ``n - k`` degenerate. A single pair (``n = 1``) has one edge,
so its pair is ``+/- sqrt(kappa^2 - J^2)``. Families with ``cos = 0`` (present
only for even ``n``) are pinned at ``+/- kappa`` for every ``J``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import DynamicalMatrix, SystemParams, build_matrix

#: Relative singular-value threshold below which a cluster's eigenvectors are
#: considered linearly dependent.
DEFECT_RTOL = 1e-6
#: Relative clustering tolerance for eigenvalues.
CLUSTER_RTOL = 1e-8
#: Cosines smaller than this are treated as exactly zero (pinned families).
_COS_ZERO = 1e-12


class SpectrumError(RuntimeError):
    """The eigensolver failed or returned non-finite values."""


class Regime(str, enum.Enum):
    ALL_OSCILLATORY = "all_oscillatory"
    MIXED = "mixed"
    FULLY_BROKEN = "fully_broken"
    AT_EXCEPTIONAL_POINT = "at_exceptional_point"


@dataclass(frozen=True, eq=False)
class Eigenpair:
    """A cluster of (numerically) equal eigenvalues.

    ``eigenvectors`` has one column per member of the cluster, each of unit
    norm with its first non-negligible entry real and positive.
    """

    value: complex
    multiplicity: int
    eigenvectors: np.ndarray
    geometric_multiplicity: int

    @property
    def is_defective(self) -> bool:
        return self.geometric_multiplicity < self.multiplicity


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenpairs: list[Eigenpair]
    is_defective: bool
    regime: Regime
    tol: float

    @property
    def values(self) -> np.ndarray:
        """All eigenvalues repeated by multiplicity."""
        out = [p.value for p in self.eigenpairs for _ in range(p.multiplicity)]
        return np.array(out, dtype=complex)

    @property
    def multiplicities(self) -> list[int]:
        return [p.multiplicity for p in self.eigenpairs]

    def __len__(self):
        return len(self.eigenpairs)


@dataclass(frozen=True)
class ExceptionalPointSet:
    """Exceptional points as ``(J/kappa, family index k)`` sorted by ``J/kappa``.

    ``pinned_families`` lists the momentum indices whose eigenvalue pair stays
    at ``+/- kappa`` for every coupling and therefore has no exceptional point.
    """

    points: list[tuple[float, int]]
    pinned_families: list[int] = field(default_factory=list)

    @property
    def j_over_kappa(self) -> list[float]:
        return [p[0] for p in self.points]


def _scale(kappa: float, coupling_j: float) -> float:
    s = max(abs(kappa), abs(coupling_j))
    return s if s > 0 else 1.0


def _normalize_columns(vecs: np.ndarray) -> np.ndarray:
    vecs = np.array(vecs, dtype=complex)
    for c in range(vecs.shape[1]):
        v = vecs[:, c]
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        v = v / norm
        big = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))
        phase = v[big[0]] / abs(v[big[0]])
        vecs[:, c] = v / phase
    return vecs


def _cluster(values: np.ndarray, tol: float, zero_radius: float) -> list[np.ndarray]:
    """Group indices of ``values`` into clusters (single linkage).

    Values closer than ``tol`` share a cluster. In addition every value with
    modulus below ``zero_radius`` joins a common zero cluster: eigenvalues of
    a Jordan block split by ``O(sqrt(eps))`` under rounding, far more than
    ``tol``.
    """
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    near_zero = [i for i in range(n) if abs(values[i]) <= zero_radius]
    for i in near_zero[1:]:
        parent[find(i)] = find(near_zero[0])
    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                parent[find(j)] = find(i)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()]


def _sort_key(z: complex):
    return (round(z.real, 12), round(z.imag, 12))


def _pairs_from_clusters(values, vectors, clusters, zero_radius) -> list[Eigenpair]:
    pairs = []
    for idx in clusters:
        val = complex(np.mean(values[idx]))
        if abs(val) <= zero_radius and len(idx) > 1:
            val = 0j
        val = complex(val.real + 0.0, val.imag + 0.0)  # drop signed zeros
        vecs = _normalize_columns(vectors[:, idx])
        if len(idx) > 1:
            sv = np.linalg.svd(vecs, compute_uv=False)
            geo = int(np.sum(sv > DEFECT_RTOL * sv[0]))
        else:
            geo = 1
        pairs.append(Eigenpair(val, len(idx), vecs, geo))
    pairs.sort(key=lambda p: _sort_key(p.value))
    return pairs


def _is_real(z: complex, tol: float) -> bool:
    return abs(z.imag) <= tol


def _regime(values: np.ndarray, n_pairs: int, kappa: float, coupling_j: float,
            tol: float, ep_radius: float) -> Regime:
    """Classify a full eigenvalue list.

    The pinned ``+/- kappa`` pair (even ``n_pairs``, ``J > 0``) is not counted
    among the tunable families.
    """
    values = np.asarray(values, dtype=complex)
    if np.any(np.abs(values) < ep_radius):
        return Regime.AT_EXCEPTIONAL_POINT
    if np.all(np.abs(values.real) <= tol):
        return Regime.ALL_OSCILLATORY
    tunable = list(values)
    if n_pairs % 2 == 0 and coupling_j > 0:
        for target in (kappa, -kappa):
            k = int(np.argmin([abs(v - target) for v in tunable]))
            tunable.pop(k)
    if all(_is_real(v, tol) for v in tunable):
        return Regime.FULLY_BROKEN
    return Regime.MIXED


def _matrix_rates(m: DynamicalMatrix) -> tuple[float, float]:
    kappa = float(np.max(np.abs(np.diag(m.entries).imag)))
    off = m.entries - np.diag(np.diag(m.entries))
    coupling = float(np.max(np.abs(off))) if off.size else 0.0
    return kappa, coupling


def numerical_spectrum(m: DynamicalMatrix, tol: float | None = None) -> SpectrumReport:
    """Eigenvalues of ``-i M`` by dense eigendecomposition, with clustering.

    Parameters
    ----------
    m : DynamicalMatrix
    tol : float, optional
        Absolute clustering tolerance. Defaults to ``1e-8 * max(kappa, J)``.
        Eigenvalues within ``sqrt(tol * scale)`` of zero are merged into one
        cluster, because a defective zero eigenvalue splits by roughly the
        square root of the rounding error.

    Raises
    ------
    SpectrumError
        If LAPACK fails or produces non-finite output.
    """
    kappa, coupling = _matrix_rates(m)
    scale = _scale(kappa, coupling)
    if tol is None:
        tol = CLUSTER_RTOL * scale
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    try:
        values, vectors = np.linalg.eig(m.generator)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"eigendecomposition failed: {exc}") from exc
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(vectors))):
        raise SpectrumError("eigensolver returned non-finite values")
    zero_radius = np.sqrt(tol * scale)
    clusters = _cluster(values, tol, zero_radius)
    pairs = _pairs_from_clusters(values, vectors, clusters, zero_radius)
    regime = _regime(
        np.array([p.value for p in pairs for _ in range(p.multiplicity)]),
        m.dim // 2, kappa, coupling, tol=zero_radius, ep_radius=zero_radius,
    )
    return SpectrumReport(pairs, any(p.is_defective for p in pairs), regime, tol)


def family_squares(params: SystemParams) -> np.ndarray:
    """``lambda_k^2`` for momentum families ``k = 0 .. n_pairs - 1``."""
    n = params.n_pairs
    kappa, j = params.kappa, params.coupling_j
    if n == 1:
        return np.array([kappa**2 - j**2])
    k = np.arange(n)
    return kappa**2 - 4.0 * j**2 * np.cos(np.pi * k / n) ** 2


def _bloch_vector(params: SystemParams, k: int, lam: complex) -> np.ndarray:
    n = params.n_pairs
    kappa, j = params.kappa, params.coupling_j
    q = 2.0 * np.pi * k / n
    s = 1.0 if n == 1 else 1.0 + np.exp(1j * q)
    # Two-component amplitude from either row of the 2x2 Bloch block.
    cand1 = np.array([1j * j * np.conj(s), kappa - lam])
    cand2 = np.array([lam + kappa, -1j * j * s])
    cell = cand1 if np.linalg.norm(cand1) >= np.linalg.norm(cand2) else cand2
    phases = np.exp(1j * q * np.arange(n))
    return np.column_stack([cell[0] * phases, cell[1] * phases]).ravel()


def analytic_spectrum(params: SystemParams, tol: float | None = None) -> SpectrumReport:
    """Closed-form spectrum of ``-i M`` with Bloch-wave eigenvectors."""
    scale = _scale(params.kappa, params.coupling_j)
    if tol is None:
        tol = CLUSTER_RTOL * scale
    squares = family_squares(params)
    values, vectors = [], []
    for k, sq in enumerate(squares):
        root = np.sqrt(complex(sq))
        for lam in (root, -root):
            values.append(lam)
            vectors.append(_bloch_vector(params, k, lam))
    values = np.array(values, dtype=complex)
    vectors = np.column_stack(vectors)
    zero_radius = np.sqrt(tol * scale)
    clusters = _cluster(values, tol, zero_radius)
    pairs = _pairs_from_clusters(values, vectors, clusters, zero_radius)
    regime = _regime(values, params.n_pairs, params.kappa, params.coupling_j,
                     tol=zero_radius, ep_radius=zero_radius)
    return SpectrumReport(pairs, any(p.is_defective for p in pairs), regime, tol)


def exceptional_points(params: SystemParams) -> ExceptionalPointSet:
    """Couplings ``J/kappa`` at which an eigenvalue pair coalesces at zero."""
    n = params.n_pairs
    if n == 1:
        return ExceptionalPointSet([(1.0, 0)], [])
    found: dict[float, tuple[float, int]] = {}
    pinned = []
    for k in range(n):
        c = abs(np.cos(np.pi * k / n))
        if c < _COS_ZERO:
            pinned.append(k)
            continue
        ratio = 1.0 / (2.0 * c)
        found.setdefault(round(ratio, 12), (float(ratio), k))
    return ExceptionalPointSet(sorted(found.values()), pinned)


def classify_regime(params: SystemParams, tol: float | None = None) -> Regime:
    """Dynamical regime from the closed-form spectrum.

    ``at_exceptional_point`` wins when any ``|lambda| < tol`` (default
    ``1e-6 * max(kappa, J)``). Otherwise ``all_oscillatory`` when every
    eigenvalue is imaginary, ``fully_broken`` when every tunable family is
    real, and ``mixed`` in between.
    """
    scale = _scale(params.kappa, params.coupling_j)
    if tol is None:
        tol = 1e-6 * scale
    squares = family_squares(params)
    # |lambda| < tol  <=>  |lambda^2| < tol^2; squares avoid sqrt rounding at the EP.
    if np.any(np.abs(squares) < tol**2):
        return Regime.AT_EXCEPTIONAL_POINT
    roots = np.sqrt(squares.astype(complex))
    values = np.concatenate([roots, -roots])
    return _regime(values, params.n_pairs, params.kappa, params.coupling_j,
                   tol=0.0, ep_radius=0.0)


def multiset_distance(a, b) -> float:
    """Largest pairwise gap after optimally matching two equal-size multisets."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.shape != b.shape:
        raise ValueError(f"multisets differ in size: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols]))
