"""Monte Carlo cross-check of the moment equations.

Each trajectory integrates the classical linear SDE

    dc = (A c + f(t)) dt + dW,    A = -i M,

where ``dW`` has independent complex Gaussian increments with
``E[|dW_k|^2] = 2 kappa dt`` on gain sites and zero on loss sites. The ensemble
averages ``E[c]`` and ``E[conj(c_i) c_j]`` equal the quantum mean and the
*normal-ordered* correlations ``<c_i^dag c_j>``. Nothing else (anti-normal or
higher-order moments) is reproduced, and nothing else is reported.

Every trajectory owns a Philox stream keyed by ``(seed, trajectory index)``,
so results do not depend on batching or execution order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evolution import MomentSeries
from .model import SystemParams, build_matrix, is_gain_site

#: Largest allowed ``dt * max(kappa, 2J)``.
MAX_STEP_RATE = 0.05
#: Default ``dt * max(kappa, 2J)``.
DEFAULT_STEP_RATE = 1e-3


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    n_traj: int
    seed: int
    dt: float
    times: np.ndarray
    mean_amplitude: np.ndarray     # (T, N) complex
    mean_stderr: np.ndarray        # (T, N)
    photon_numbers: np.ndarray     # (T, N)
    photon_stderr: np.ndarray      # (T, N)


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _stderr(samples: np.ndarray) -> np.ndarray:
    n = samples.shape[0]
    if n < 2:
        return np.zeros(samples.shape[1:])
    return np.std(samples, axis=0, ddof=1) / np.sqrt(n)


def sample_trajectories(
    params: SystemParams,
    t_final: float,
    dt: float | None = None,
    n_traj: int = 1000,
    seed: int = 0,
    dt_out: float | None = None,
    noise_refinement: int = 1,
    batch_size: int = 2048,
) -> TrajectoryEnsemble:
    """Euler-Maruyama ensemble on a fixed step ``dt``.

    Parameters
    ----------
    params : SystemParams
        The system; ``noise_enabled=False`` gives deterministic trajectories.
    t_final : float
    dt : float
        Integration step. Must satisfy ``dt * max(kappa, 2J) < 0.05``. The
        default ``1e-3 / max(kappa, 2J)`` is ``1e-3 / kappa`` unless the
        coupling dominates; explicit Euler inflates oscillating modes by about
        ``exp(omega^2 dt t)``, so the step has to follow the fastest frequency.
    n_traj : int
    seed : int
    dt_out : float, optional
        Output spacing, an integer multiple of ``dt``. Defaults to ``t_final / 8``
        rounded to a multiple of ``dt``.
    noise_refinement : int
        Draw Wiener increments on the finer step ``dt / noise_refinement`` and
        sum them. ``(dt, 2)`` and ``(dt / 2, 1)`` then see the same Brownian
        paths, which isolates the time-discretisation bias.
    batch_size : int
        Trajectories advanced together; affects memory only, not results.
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    rate = max(params.kappa, 2.0 * params.coupling_j)
    if dt is None:
        dt = DEFAULT_STEP_RATE / rate
    if not dt > 0 or not t_final > 0:
        raise ValueError("dt and t_final must be positive")
    if dt * rate >= MAX_STEP_RATE:
        raise ValueError(
            f"unstable step: dt*max(kappa, 2J) = {dt * rate:.3g} must be < {MAX_STEP_RATE}"
        )
    if noise_refinement < 1:
        raise ValueError("noise_refinement must be >= 1")
    if dt_out is None:
        dt_out = max(1, round(t_final / 8 / dt)) * dt
    steps_per_out = int(round(dt_out / dt))
    if steps_per_out < 1 or abs(steps_per_out * dt - dt_out) > 1e-9 * dt_out:
        raise ValueError(f"dt_out={dt_out} is not an integer multiple of dt={dt}")
    n_out = int(np.floor(t_final / dt_out + 1e-9))
    times = dt_out * np.arange(n_out + 1)

    n = params.n_cavities
    gain = np.array([k for k in range(n) if is_gain_site(k)])
    sigma = np.sqrt(params.kappa * dt / noise_refinement)
    drive = params.drive
    noisy = params.noise_enabled

    # One Euler-Maruyama step is c <- B c + dt f + w with B = I + A dt. Over an
    # output interval of m steps this unrolls to
    #   c_m = B^m c_0 + sum_i B^(m-1-i) (dt f_i + w_i),
    # evaluated with a single product instead of m sequential updates.
    m = steps_per_out
    step_matrix = np.eye(n) + build_matrix(params).generator * dt
    powers = np.empty((m, n, n), dtype=complex)  # powers[i] = B^(m-1-i)
    powers[m - 1] = np.eye(n)
    for i in range(m - 2, -1, -1):
        powers[i] = step_matrix @ powers[i + 1]
    hop = (step_matrix @ powers[0]).T  # (B^m)^T for row-vector states
    noise_map = powers[:, :, gain].transpose(0, 2, 1).reshape(m * len(gain), n)
    drive_unit = np.zeros(n, dtype=complex)
    if drive.amplitude_e:
        phases = np.exp(1j * drive.detuning_delta * dt * np.arange(m))
        drive_unit = drive.amplitude_e * dt * np.einsum("i,ik->k", phases, powers[:, :, drive.site_index])

    samples = np.zeros((n_traj, n_out + 1, n), dtype=complex)
    for start in range(0, n_traj, batch_size):
        idx = range(start, min(start + batch_size, n_traj))
        streams = [_stream(seed, i) for i in idx] if noisy else []
        c = np.zeros((len(idx), n), dtype=complex)
        for out in range(1, n_out + 1):
            c = c @ hop
            if drive.amplitude_e:
                c = c + np.exp(1j * drive.detuning_delta * dt * m * (out - 1)) * drive_unit
            if noisy:
                draws = np.stack([
                    g.standard_normal((m, noise_refinement, len(gain), 2)) for g in streams
                ])
                incr = sigma * (draws[..., 0] + 1j * draws[..., 1]).sum(axis=2)
                c = c + incr.reshape(len(idx), m * len(gain)) @ noise_map
            samples[start:start + len(idx), out] = c

    photons = np.abs(samples) ** 2
    mean_err = np.sqrt(_stderr(samples.real) ** 2 + _stderr(samples.imag) ** 2)
    return TrajectoryEnsemble(
        n_traj=n_traj,
        seed=seed,
        dt=dt,
        times=times,
        mean_amplitude=samples.mean(axis=0),
        mean_stderr=mean_err,
        photon_numbers=photons.mean(axis=0),
        photon_stderr=_stderr(photons),
    )


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Per-site, per-time z-scores of Monte Carlo photon numbers."""

    times: np.ndarray
    z: np.ndarray  # (T, N)

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))

    def fraction_within(self, k: float = 3.0) -> float:
        return float(np.mean(np.abs(self.z) <= k))


def compare_to_deterministic(ensemble: TrajectoryEnsemble, reference: MomentSeries) -> ComparisonReport:
    """z-scores ``(estimate - reference) / stderr`` for every site and time.

    Points with zero standard error score 0 when estimate and reference agree
    exactly and ``inf`` otherwise.
    """
    ref_times = np.asarray(reference.times)
    if ref_times.shape != ensemble.times.shape or not np.allclose(ref_times, ensemble.times, rtol=1e-9, atol=1e-12):
        raise ValueError("time grids of ensemble and reference do not match")
    ref = reference.photon_numbers()
    if ref.shape != ensemble.photon_numbers.shape:
        raise ValueError(f"site count mismatch: {ref.shape} vs {ensemble.photon_numbers.shape}")
    diff = ensemble.photon_numbers - ref
    err = ensemble.photon_stderr
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(err > 0, diff / np.where(err > 0, err, 1.0), np.where(diff == 0, 0.0, np.inf))
    return ComparisonReport(ensemble.times, z)
