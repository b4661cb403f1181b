"""Acceptance suite: one PASS/FAIL line per criterion at the agreed tolerances.

Run ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; a summary section is printed at the end of every pytest run.
"""
import math
import time

import numpy as np
import pytest

from cptring.cli import main as cli_main
from cptring.evolution import evolve_moments, reciprocity_experiment
from cptring.model import DriveSpec, SystemParams, build_matrix, cyclic_shift, ring_matrix
from cptring.noise_mc import compare_to_deterministic, sample_trajectories
from cptring.scenarios import PRESETS
from cptring.spectra import exceptional_points, multiset_distance, numerical_spectrum
from oracles import SUPERMODE_TABLE, quadrature_moments, table_eigenvalues

A1, B1, A2, B2, A3, B3 = range(6)


def six(j, e=0.0, site=0, noise=False):
    return SystemParams(3, 1.0, j, DriveSpec(site, e, 0.0), noise_enabled=noise)


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_criterion_01_spectrum_regression(acceptance_report):
    worst = 0.0
    with Clock() as clock:
        for n_cav in sorted(SUPERMODE_TABLE):
            for kappa in (0.5, 1.0, 3.0):
                for ratio in (0.2, 0.4, 0.6, 1.2, 2.5):
                    j = ratio * kappa
                    got = numerical_spectrum(ring_matrix(n_cav, kappa, j)).values
                    scale = max(kappa, 2 * j)
                    worst = max(worst, multiset_distance(got, table_eigenvalues(n_cav, kappa, j)) / scale)
    ok = worst < 1e-9 and clock.elapsed < 1.0
    acceptance_report(1, "spectrum matches supermode table", ok,
                      f"max rel dev {worst:.2e}, {clock.elapsed:.2f}s")
    assert ok


def test_criterion_02_exceptional_points(acceptance_report):
    with Clock() as clock:
        six_eps = exceptional_points(SystemParams(3)).j_over_kappa
        two_eps = exceptional_points(SystemParams(1)).j_over_kappa
        defective = all(numerical_spectrum(build_matrix(SystemParams(n, 1.0, r))).is_defective
                        for n, eps in ((3, six_eps), (1, two_eps)) for r in eps)
    ok = (len(six_eps) == 2 and np.allclose(six_eps, [0.5, 1.0], rtol=0, atol=1e-6)
          and len(two_eps) == 1 and abs(two_eps[0] - 1.0) < 1e-6
          and defective and clock.elapsed < 1.0)
    acceptance_report(2, "exceptional points located", ok,
                      f"N=6 {six_eps}, N=2 {two_eps}, defective={defective}, {clock.elapsed:.2f}s")
    assert ok


def test_criterion_03_cpt_symmetry(acceptance_report):
    rng = np.random.default_rng(3)
    checked = 0
    failures = 0
    for n_cav in range(2, 26, 2):
        p = cyclic_shift(n_cav)
        pairs = [(1.0, 0.0), (1.0, 1.0), (0.3, 2.5)] + [tuple(rng.uniform(0.01, 5.0, 2)) for _ in range(20)]
        for kappa, j in pairs:
            m = ring_matrix(n_cav, kappa, j).entries
            failures += not np.array_equal(p @ m @ np.linalg.inv(p), np.conj(m))
            checked += 1
    ok = failures == 0
    acceptance_report(3, "P M P^-1 = M* entrywise", ok, f"{checked} matrices, {failures} failures")
    assert ok


def test_criterion_04_noiseless_reciprocity(acceptance_report):
    worst = 0.0
    with Clock() as clock:
        for j in (1.2, 0.6, 0.4):
            r = reciprocity_experiment(six(j, 5.0), A1, B3, 8.0, 0.01)
            worst = max(worst, float(np.max(r.difference / np.maximum(r.forward, 1.0))))
    ok = worst < 1e-8 and clock.elapsed < 5.0
    acceptance_report(4, "noiseless transport is reciprocal", ok,
                      f"max rel diff {worst:.2e}, {clock.elapsed:.2f}s")
    assert ok


def test_criterion_05_noisy_nonreciprocity(acceptance_report):
    notes = []
    ok = True
    with Clock() as clock:
        for j in (1.2, 0.6, 0.4):
            r = reciprocity_experiment(six(j, 5.0, noise=True), A1, B3, 8.0, 0.01)
            positive = bool(np.all(r.difference[r.times > 0.5] > 0))
            ok &= positive
            if j in (0.6, 0.4):
                window = r.difference[r.times >= 2.0 - 1e-9]
                increasing = bool(np.all(np.diff(window) > 0))
                ok &= increasing
                notes.append(f"J={j}: >0 {positive}, increasing {increasing}")
            else:
                notes.append(f"J={j}: >0 {positive}")
    ok &= clock.elapsed < 5.0
    acceptance_report(5, "noise breaks reciprocity", ok, "; ".join(notes) + f", {clock.elapsed:.2f}s")
    assert ok


def test_criterion_06_degeneracy_symmetry(acceptance_report):
    worst = 0.0
    for j in (2.5, 1.0, 0.6, 0.5, 0.4):
        for noise in (False, True):
            n = evolve_moments(six(j, 20.0, noise=noise), 8.0, 0.01).photon_numbers()[1:]
            for x, y in ((B1, B3), (A2, A3)):
                worst = max(worst, float(np.max(np.abs(n[:, x] - n[:, y]) / np.abs(n[:, x]))))
    ok = worst < 1e-8
    acceptance_report(6, "b1=b3 and a2=a3 photon numbers", ok, f"max rel diff {worst:.2e}")
    assert ok


def test_criterion_07_growth_rate(acceptance_report):
    series = evolve_moments(six(0.6, 20.0), 15.0, 0.01)
    total = series.photon_numbers().sum(axis=1)
    window = (series.times >= 10 - 1e-9) & (series.times <= 15 + 1e-9)
    slope = np.polyfit(series.times[window], np.log(total[window]), 1)[0]
    target = 2 * math.sqrt(1 - 0.6**2)
    rel = abs(slope - target) / target
    ok = rel < 0.02
    acceptance_report(7, "broken-regime growth rate", ok, f"slope {slope:.5f} vs {target:.5f} ({rel:.2%})")
    assert ok


def test_criterion_08_oscillatory_boundedness(acceptance_report):
    series = evolve_moments(six(2.5, 20.0), 40.0, 0.01)
    n = series.photon_numbers()
    early = n[series.times <= 20 + 1e-9].max()
    late = n[series.times >= 20 - 1e-9].max()
    ok = late < 10 * early
    acceptance_report(8, "oscillatory regime stays bounded", ok, f"max[20,40]/max[0,20] = {late / early:.3f}")
    assert ok


@pytest.mark.slow
def test_criterion_09_oracle_triangle(acceptance_report):
    with Clock() as clock:
        quad_worst = 0.0
        for j in (2.5, 0.6, 0.4):
            series = evolve_moments(six(j, 5.0, noise=True), 8.0, 1.0)
            for state in list(series)[1:]:
                mu, c = quadrature_moments(6, 1.0, j, 5.0, 0.0, A1, True, state.time)
                quad_worst = max(quad_worst, float(np.max(np.abs(state.corr - c)) / np.max(np.abs(c))))
                quad_worst = max(quad_worst, float(np.max(np.abs(state.mean - mu)) / np.max(np.abs(mu))))

        within = total = 0
        max_z = 0.0
        for j in (2.5, 0.6, 0.4):
            p = six(j, 5.0, noise=True)
            # Default step: 1e-3 / max(kappa, 2J).
            ens = sample_trajectories(p, 4.0, n_traj=10_000, seed=20240601, dt_out=0.25)
            report = compare_to_deterministic(ens, evolve_moments(p, 4.0, 0.25))
            z = np.abs(report.z[1:])  # t=0 is exact vacuum on both sides
            within += int(np.sum(z <= 3.0))
            total += z.size
            max_z = max(max_z, float(z.max()))
    frac = within / total
    ok = quad_worst < 1e-6 and frac >= 0.99 and clock.elapsed < 120.0
    acceptance_report(9, "moments vs quadrature vs Monte Carlo", ok,
                      f"quadrature rel dev {quad_worst:.2e}; MC {within}/{total} = {frac:.3f} within 3 SE "
                      f"(max|z| {max_z:.2f}); {clock.elapsed:.1f}s")
    assert ok


def test_criterion_10_decoupled_closed_form(acceptance_report):
    worst_gain = worst_loss = 0.0
    for kappa in (1.0, 0.7):
        p = SystemParams(1, kappa, 0.0, noise_enabled=True)
        for kt in (0.5, 1.0, 2.0):
            c = evolve_moments(p, kt / kappa, kt / kappa / 4)[-1].corr
            exact = math.expm1(2 * kt)
            worst_gain = max(worst_gain, abs(c[0, 0].real - exact) / exact)
            worst_loss = max(worst_loss, abs(c[1, 1]))
    ok = worst_gain < 1e-8 and worst_loss < 1e-12
    acceptance_report(10, "decoupled gain/loss closed forms", ok,
                      f"gain rel err {worst_gain:.2e}, loss abs {worst_loss:.1e}")
    assert ok


@pytest.mark.slow
def test_criterion_11_preset_determinism(acceptance_report, tmp_path):
    mismatched = []
    slowest = 0.0
    for name in PRESETS:
        out = tmp_path / f"{name}.csv"
        blobs = []
        for _ in range(2):
            with Clock() as clock:
                code = cli_main(["preset", name, "--seed", "0", "--out", str(out)])
            slowest = max(slowest, clock.elapsed)
            blobs.append(out.read_bytes() if code == 0 else None)
        if blobs[0] is None or blobs[0] != blobs[1]:
            mismatched.append(name)
    ok = not mismatched and slowest < 60.0
    acceptance_report(11, "presets are byte-identical across runs", ok,
                      f"{len(PRESETS)} presets, mismatched {mismatched or 'none'}, slowest {slowest:.1f}s")
    assert ok
