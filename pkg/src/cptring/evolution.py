"""First- and second-moment propagation with coherent drive and gain noise.

With ``A = -i M`` and the drive ``f(t) = -i d(t)`` the mean obeys

    dmu/dt = A mu + f(t).

The normal-ordered correlation matrix ``C_ij = <c_i^dag c_j>`` splits into a
coherent part ``conj(mu) mu^T`` and a fluctuation part ``D`` which obeys

    dD/dt = conj(A) D + D A^T + S,

where ``S`` is diagonal with ``2 kappa`` on gain sites (when noise is on) and
zero elsewhere. Loss-site vacuum noise does not enter normal-ordered moments.
``C`` itself follows ``dC/dt = conj(A) C + C A^T + S + conj(f) mu^T + conj(mu) f^T``;
``mu`` and ``D`` are integrated instead so that ``D`` never suffers
cancellation against a large coherent part.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .model import DynamicalMatrix, SystemParams, build_matrix, is_gain_site, site_label

#: Adaptive Runge-Kutta tolerances used by default.
RTOL = 1e-11
ATOL = 1e-14
#: Eigenvector condition number above which the propagator falls back to expm.
_EIG_COND_MAX = 1e5

DRIVEN_SITE_CAVEAT = (
    "output of the driven cavity carries an additional input-field term that is not modelled"
)


class IntegrationError(RuntimeError):
    """The ODE integrator failed (e.g. step size underflow)."""


class InvariantViolation(RuntimeError):
    """A moment invariant (Hermiticity, positivity) was broken beyond tolerance."""


class Propagator(NamedTuple):
    matrix: np.ndarray
    method: str


def propagator(m: DynamicalMatrix, t: float, method: str = "auto") -> Propagator:
    """``G(t) = exp(-i M t)``.

    ``method`` is ``"eig"``, ``"expm"`` (scaling and squaring) or ``"auto"``,
    which uses the eigendecomposition unless the eigenvector matrix is
    ill-conditioned (at or near an exceptional point).
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    a = m.generator
    if t == 0:
        return Propagator(np.eye(m.dim, dtype=complex), "identity")
    if method not in ("auto", "eig", "expm"):
        raise ValueError(f"unknown propagator method {method!r}")
    if method in ("auto", "eig"):
        w, v = np.linalg.eig(a)
        if method == "eig" or np.linalg.cond(v) < _EIG_COND_MAX:
            g = v @ np.diag(np.exp(w * t)) @ np.linalg.inv(v)
            return Propagator(g, "eig")
    return Propagator(expm(a * t), "expm")


def noise_source_matrix(params: SystemParams) -> np.ndarray:
    """Diagonal source ``S`` of the fluctuation equation (``2 kappa`` on gain sites)."""
    n = params.n_cavities
    if not params.noise_enabled:
        return np.zeros((n, n))
    diag = np.array([2.0 * params.kappa if is_gain_site(k) else 0.0 for k in range(n)])
    return np.diag(diag)


def coherent_force(params: SystemParams, t: float) -> np.ndarray:
    """``f(t) = -i d(t)``; equals ``E exp(i Delta t)`` on the driven site."""
    f = np.zeros(params.n_cavities, dtype=complex)
    drive = params.drive
    if drive.amplitude_e != 0:
        f[drive.site_index] = drive.amplitude_e * np.exp(1j * drive.detuning_delta * t)
    return f


@dataclass(frozen=True, eq=False)
class MomentState:
    """Mean amplitudes and normal-ordered correlations at one time.

    ``corr`` includes the coherent contribution ``conj(mean) mean^T``.
    """

    time: float
    mean: np.ndarray
    corr: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=complex)
        corr = np.asarray(self.corr, dtype=complex)
        n = mean.shape[0]
        if mean.ndim != 1 or corr.shape != (n, n):
            raise ValueError(f"shape mismatch: mean {mean.shape}, corr {corr.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "corr", corr)

    @classmethod
    def vacuum(cls, n_cavities: int, time: float = 0.0) -> MomentState:
        return cls(time, np.zeros(n_cavities, complex), np.zeros((n_cavities, n_cavities), complex))

    @property
    def n_cavities(self) -> int:
        return self.mean.shape[0]

    @property
    def fluctuation(self) -> np.ndarray:
        return self.corr - np.outer(np.conj(self.mean), self.mean)

    def check(self, rtol: float = 1e-9) -> None:
        """Raise :class:`InvariantViolation` if the state is unphysical."""
        scale = 1.0 + float(np.max(np.abs(self.corr), initial=0.0))
        herm = float(np.max(np.abs(self.corr - self.corr.conj().T), initial=0.0))
        if herm > rtol * scale:
            raise InvariantViolation(f"t={self.time}: corr not Hermitian (max defect {herm:.3e})")
        d = self.fluctuation
        lowest = float(np.min(np.linalg.eigvalsh(0.5 * (d + d.conj().T))))
        if lowest < -rtol * scale:
            raise InvariantViolation(
                f"t={self.time}: fluctuation matrix not positive semidefinite (min eig {lowest:.3e})"
            )


@dataclass(frozen=True, eq=False)
class MomentSeries:
    """Moment trajectory sampled on a uniform output grid."""

    times: np.ndarray
    means: np.ndarray          # (T, N)
    fluctuations: np.ndarray   # (T, N, N)
    params: SystemParams

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k: int) -> MomentState:
        return MomentState(float(self.times[k]), self.means[k], self.corrs[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def corrs(self) -> np.ndarray:
        coherent = np.conj(self.means)[:, :, None] * self.means[:, None, :]
        return self.fluctuations + coherent

    def photon_numbers(self) -> np.ndarray:
        """``(T, N)`` array of ``<c_k^dag c_k>``."""
        fluct = np.real(np.diagonal(self.fluctuations, axis1=1, axis2=2))
        return np.abs(self.means) ** 2 + fluct

    def contrast(self, i: int, j: int, tol: float = 1e-12) -> list[float | None]:
        return [average_contrast(s, i, j, tol) for s in self]


def _unpack(y: np.ndarray, n: int):
    return y[:n], y[n:].reshape(n, n)


def evolve_moments(
    params: SystemParams,
    t_final: float,
    dt_out: float,
    initial: MomentState | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    method: str = "DOP853",
) -> MomentSeries:
    """Integrate the mean and correlation equations and sample every ``dt_out``.

    Parameters
    ----------
    params : SystemParams
    t_final : float
        End time (> 0).
    dt_out : float
        Output spacing; states are emitted at ``0, dt_out, 2 dt_out, ...`` up
        to ``t_final``.
    initial : MomentState, optional
        Defaults to the vacuum.
    rtol, atol : float
        Tolerances of the adaptive Runge-Kutta integrator.
    method : str
        Any explicit ``scipy.integrate.solve_ivp`` method of order >= 4.

    Raises
    ------
    IntegrationError
        If the integrator does not reach ``t_final``.
    InvariantViolation
        If the correlation matrix loses Hermiticity beyond tolerance.
    """
    if not t_final > 0:
        raise ValueError(f"t_final must be > 0, got {t_final}")
    if not 0 < dt_out <= t_final:
        raise ValueError(f"dt_out must lie in (0, t_final], got {dt_out}")
    n = params.n_cavities
    if initial is None:
        initial = MomentState.vacuum(n)
    if initial.n_cavities != n:
        raise ValueError("initial state dimension does not match the system")
    initial.check()

    a = build_matrix(params).generator
    a_conj = np.conj(a)
    a_t = a.T
    s = noise_source_matrix(params).astype(complex)
    drive = params.drive
    e_amp, delta, site = drive.amplitude_e, drive.detuning_delta, drive.site_index

    def rhs(t, y):
        mu, d = _unpack(y, n)
        dmu = a @ mu
        if e_amp:
            dmu[site] += e_amp * np.exp(1j * delta * t)
        dd = a_conj @ d + d @ a_t + s
        return np.concatenate([dmu, dd.ravel()])

    n_out = int(np.floor(t_final / dt_out + 1e-9))
    times = dt_out * np.arange(n_out + 1)
    y0 = np.concatenate([initial.mean, initial.fluctuation.ravel()])
    sol = solve_ivp(rhs, (0.0, times[-1]), y0, method=method, t_eval=times,
                    rtol=rtol, atol=atol)
    if sol.status != 0:
        raise IntegrationError(f"moment integration failed at t={sol.t[-1] if sol.t.size else 0}: {sol.message}")
    y = sol.y.T
    means = np.ascontiguousarray(y[:, :n])
    fluct = np.ascontiguousarray(y[:, n:].reshape(-1, n, n))

    herm = np.max(np.abs(fluct - np.conj(np.transpose(fluct, (0, 2, 1)))), axis=(1, 2))
    bound = 1e-9 * (1.0 + np.max(np.abs(fluct), axis=(1, 2)))
    bad = np.flatnonzero(herm > bound)
    if bad.size:
        k = bad[0]
        raise InvariantViolation(
            f"correlation matrix lost Hermiticity at t={times[k]:.6g} "
            f"(defect {herm[k]:.3e} > {bound[k]:.3e})"
        )
    return MomentSeries(times, means, fluct, params)


def photon_numbers(state: MomentState, tol: float | None = None) -> np.ndarray:
    """Cavity photon numbers ``Re diag(C)``."""
    n = np.real(np.diag(state.corr)).copy()
    if tol is None:
        tol = 1e-9 * (1.0 + float(np.max(np.abs(state.corr), initial=0.0)))
    if np.any(n < -tol):
        k = int(np.argmin(n))
        raise InvariantViolation(f"negative photon number {n[k]:.3e} at {site_label(k)}")
    return n


def average_contrast(state: MomentState, i: int, j: int, tol: float = 1e-12) -> float | None:
    """Phase-coherence contrast ``2 |C_ij| / (C_ii + C_jj)``.

    Returns ``None`` when the two modes are (numerically) empty, where the
    ratio has no value.
    """
    if i == j:
        raise ValueError("contrast needs two distinct sites")
    c = state.corr
    denom = float(np.real(c[i, i] + c[j, j]))
    if denom < tol:
        return None
    return 2.0 * abs(c[i, j]) / denom


class OutputFlux(NamedTuple):
    values: np.ndarray
    uncorrected_site: int | None
    caveat: str | None


def output_flux(state: MomentState, params: SystemParams) -> OutputFlux:
    """Output photon flux ``2 gamma <c^dag c>`` through each cavity's fiber.

    The driven cavity's output also contains the reflected input field; that
    term is not computed and the site is flagged in the result instead.
    """
    values = 2.0 * params.gamma_out * photon_numbers(state)
    if params.drive.amplitude_e > 0:
        return OutputFlux(values, params.drive.site_index, DRIVEN_SITE_CAVEAT)
    return OutputFlux(values, None, None)


@dataclass(frozen=True, eq=False)
class ReciprocityResult:
    times: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    site_fwd: int
    site_bwd: int

    @property
    def difference(self) -> np.ndarray:
        return np.abs(self.forward - self.backward)


def reciprocity_experiment(
    params: SystemParams,
    site_fwd: int = 0,
    site_bwd: int | None = None,
    t_final: float = 8.0,
    dt_out: float = 0.01,
    **solver_kwargs,
) -> ReciprocityResult:
    """Compare transport gain -> loss with the reverse path.

    Forward: drive ``site_fwd`` (a gain cavity) and record the photon number
    of ``site_bwd``. Backward: drive ``site_bwd`` (a loss cavity) with the
    same amplitude and detuning and record ``site_fwd``. ``site_bwd`` defaults
    to the last loss cavity.
    """
    if site_bwd is None:
        site_bwd = params.n_cavities - 1
    if not is_gain_site(site_fwd):
        raise ValueError(f"forward drive site {site_label(site_fwd)} is not a gain cavity")
    if is_gain_site(site_bwd) or site_bwd >= params.n_cavities:
        raise ValueError(f"backward drive site {site_bwd} is not a loss cavity of this ring")
    fwd = evolve_moments(params.with_drive(site_index=site_fwd), t_final, dt_out, **solver_kwargs)
    bwd = evolve_moments(params.with_drive(site_index=site_bwd), t_final, dt_out, **solver_kwargs)
    return ReciprocityResult(
        fwd.times,
        fwd.photon_numbers()[:, site_bwd],
        bwd.photon_numbers()[:, site_fwd],
        site_fwd,
        site_bwd,
    )


def saturation_check(series: MomentSeries, i_sat: float, threshold: float) -> list[tuple[float, int, float]]:
    """Flag gain cavities whose intensity is not small against saturation.

    Returns ``(time, site, n / i_sat)`` for every sample where the ratio exceeds
    ``threshold``. Dynamics are not modified.
    """
    if not i_sat > 0:
        raise ValueError(f"i_sat must be > 0, got {i_sat}")
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    numbers = series.photon_numbers()
    out = []
    for k, t in enumerate(series.times):
        for site in range(0, numbers.shape[1], 2):
            ratio = numbers[k, site] / i_sat
            if ratio > threshold:
                out.append((float(t), site, float(ratio)))
    return out
