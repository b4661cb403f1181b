"""Batch scenarios: configuration, dispatch, figure presets and file output.

All times in a :class:`ScenarioConfig` and in emitted columns are ``kappa t``;
all rates are quoted as ratios to ``kappa``.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from . import __version__
from .evolution import average_contrast, evolve_moments, reciprocity_experiment
from .model import DriveSpec, SystemParams, build_matrix, site_label
from .noise_mc import compare_to_deterministic, sample_trajectories
from .spectra import (
    analytic_spectrum,
    classify_regime,
    exceptional_points,
    multiset_distance,
    numerical_spectrum,
)

SCENARIOS = ("spectrum", "evolve", "contrast", "reciprocity", "sweep", "mc", "figure-preset")
SWEEP_PARAMETERS = ("j_over_kappa", "e_over_kappa", "delta_over_kappa")
FORMATS = ("csv", "json")
PRESETS = ("fig2", "fig3", "fig4", "fig5", "fig5a", "fig5b", "fig6", "fig6a", "fig6b", "fig6c")

#: J/kappa grid for the fig5 presets.
FIG5_GRID = tuple(round(0.03 * k, 10) for k in range(1, 101))
FIG5_SNAPSHOTS = (5.0, 20.0)
FIG6_COUPLINGS = {"fig6a": 1.2, "fig6b": 0.6, "fig6c": 0.4}


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...] = ()


@dataclass(frozen=True)
class OutputSpec:
    path: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class ScenarioConfig:
    system: SystemParams
    scenario: str
    t_final: float = 8.0
    dt_out: float | None = None
    sweep: SweepSpec | None = None
    output: OutputSpec = field(default_factory=OutputSpec)
    seed: int | None = None
    preset: str | None = None
    n_traj: int = 1000
    mc_dt: float | None = None
    pairs: tuple[tuple[int, int], ...] | None = None
    site_fwd: int = 0
    site_bwd: int | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError("scenario", f"must be one of {SCENARIOS}, got {self.scenario!r}")
        if not self.t_final > 0:
            raise ConfigError("time_grid.t_final", f"must be > 0, got {self.t_final}")
        if self.dt_out is not None and not 0 < self.dt_out <= self.t_final:
            raise ConfigError("time_grid.dt_out", f"must lie in (0, t_final], got {self.dt_out}")
        if self.output.format not in FORMATS:
            raise ConfigError("output.format", f"must be one of {FORMATS}, got {self.output.format!r}")
        if self.scenario == "sweep":
            if self.sweep is None:
                raise ConfigError("sweep", "a sweep scenario needs a sweep specification")
            if self.sweep.parameter not in SWEEP_PARAMETERS:
                raise ConfigError("sweep.parameter",
                                  f"must be one of {SWEEP_PARAMETERS}, got {self.sweep.parameter!r}")
        if self.scenario == "figure-preset" and self.preset not in PRESETS:
            raise ConfigError("preset", f"must be one of {PRESETS}, got {self.preset!r}")
        if self.n_traj < 1:
            raise ConfigError("n_traj", "must be >= 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        n = self.system.n_cavities
        for i, j in self.pairs or ():
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ConfigError("pairs", f"invalid site pair ({i}, {j}) for {n} cavities")

    @property
    def resolved_dt_out(self) -> float:
        return self.dt_out if self.dt_out is not None else self.t_final / 800

    def to_dict(self) -> dict:
        d = asdict(self)
        d["time_grid"] = {"t_final": d.pop("t_final"), "dt_out": d.pop("dt_out")}
        if d["pairs"] is not None:
            d["pairs"] = [list(p) for p in d["pairs"]]
        if d["sweep"] is not None:
            d["sweep"]["values"] = list(d["sweep"]["values"])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        data = dict(data)
        try:
            sysd = dict(data.pop("system"))
        except KeyError:
            raise ConfigError("system", "missing") from None
        try:
            drive = DriveSpec(**sysd.pop("drive", {}))
            system = SystemParams(drive=drive, **sysd)
        except (TypeError, ValueError) as exc:
            raise ConfigError("system", str(exc)) from None
        grid = data.pop("time_grid", {}) or {}
        sweep = data.pop("sweep", None)
        output = data.pop("output", None) or {}
        pairs = data.pop("pairs", None)
        try:
            return cls(
                system=system,
                t_final=grid.get("t_final", 8.0),
                dt_out=grid.get("dt_out"),
                sweep=None if sweep is None else SweepSpec(sweep["parameter"], tuple(sweep.get("values", ()))),
                output=OutputSpec(**output),
                pairs=None if pairs is None else tuple(tuple(p) for p in pairs),
                **data,
            )
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None


@dataclass(eq=False)
class ScenarioResult:
    config: ScenarioConfig
    columns: dict[str, list]
    metadata: dict[str, Any]

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()), []))


def _with_ratio(system: SystemParams, name: str, value: float) -> SystemParams:
    k = system.kappa
    if name == "j_over_kappa":
        return replace(system, coupling_j=value * k)
    if name == "e_over_kappa":
        return system.with_drive(amplitude_e=value * k)
    if name == "delta_over_kappa":
        return system.with_drive(detuning_delta=value * k)
    raise ConfigError("sweep.parameter", f"unknown parameter {name!r}")


def _floats(a) -> list:
    return [float(x) for x in np.asarray(a).ravel()]


def _contrast_column(series, i, j) -> list:
    return [None if c is None else float(c) for c in series.contrast(i, j)]


def _base_metadata(system: SystemParams) -> dict:
    eps = exceptional_points(system)
    return {
        "tool_version": __version__,
        "regime": classify_regime(system).value,
        "exceptional_points_j_over_kappa": eps.j_over_kappa,
        "pinned_families": eps.pinned_families,
        "site_labels": [site_label(k) for k in range(system.n_cavities)],
    }


def _evolve(system: SystemParams, t_final: float, dt_out: float):
    k = system.kappa
    return evolve_moments(system, t_final / k, dt_out / k)


# -- individual scenarios ---------------------------------------------------

def _run_spectrum(cfg: ScenarioConfig):
    report = numerical_spectrum(build_matrix(cfg.system))
    analytic = analytic_spectrum(cfg.system)
    k = cfg.system.kappa
    cols = {
        "lambda_re": [p.value.real / k for p in report.eigenpairs],
        "lambda_im": [p.value.imag / k for p in report.eigenpairs],
        "multiplicity": [p.multiplicity for p in report.eigenpairs],
        "geometric_multiplicity": [p.geometric_multiplicity for p in report.eigenpairs],
    }
    dev = multiset_distance(report.values, analytic.values) / k
    meta = {"is_defective": report.is_defective, "numerical_regime": report.regime.value,
            "max_analytic_deviation": dev}
    return cols, meta


def _run_evolve(cfg: ScenarioConfig):
    series = _evolve(cfg.system, cfg.t_final, cfg.resolved_dt_out)
    k = cfg.system.kappa
    cols = {"t": _floats(series.times * k)}
    numbers = series.photon_numbers()
    for s in range(cfg.system.n_cavities):
        cols[f"n_{site_label(s)}"] = _floats(numbers[:, s])
    meta = {}
    if cfg.system.gamma_out > 0:
        for s in range(cfg.system.n_cavities):
            cols[f"flux_{site_label(s)}"] = _floats(2 * cfg.system.gamma_out / k * numbers[:, s])
        if cfg.system.drive.amplitude_e > 0:
            meta["flux_caveat_site"] = site_label(cfg.system.drive.site_index)
    return cols, meta


def _default_pairs(system: SystemParams):
    return tuple((2 * p, 2 * p + 1) for p in range(system.n_pairs))


def _run_contrast(cfg: ScenarioConfig):
    series = _evolve(cfg.system, cfg.t_final, cfg.resolved_dt_out)
    cols = {"t": _floats(series.times * cfg.system.kappa)}
    for i, j in cfg.pairs or _default_pairs(cfg.system):
        cols[f"contrast_{site_label(i)}_{site_label(j)}"] = _contrast_column(series, i, j)
    return cols, {}


def _run_reciprocity(cfg: ScenarioConfig):
    k = cfg.system.kappa
    res = reciprocity_experiment(cfg.system, cfg.site_fwd, cfg.site_bwd,
                                 cfg.t_final / k, cfg.resolved_dt_out / k)
    cols = {
        "t": _floats(res.times * k),
        "p_forward": _floats(res.forward),
        "p_backward": _floats(res.backward),
        "difference": _floats(res.difference),
    }
    meta = {"site_forward": site_label(res.site_fwd), "site_backward": site_label(res.site_bwd)}
    return cols, meta


def _sweep_point(args):
    system, name, value, t_final = args
    point = _with_ratio(system, name, value)
    series = _evolve(point, t_final, t_final)
    final = series[len(series) - 1]
    numbers = series.photon_numbers()[-1]
    row = {name: float(value), "regime": classify_regime(point).value}
    for s in range(system.n_cavities):
        row[f"n_{site_label(s)}"] = float(numbers[s])
    c = average_contrast(final, 0, 1)
    row["contrast_a1_b1"] = None if c is None else float(c)
    return row


def _map(fn, items, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))  # map preserves input order


def _run_sweep(cfg: ScenarioConfig):
    name = cfg.sweep.parameter
    header = [name, "regime"] + [f"n_{site_label(s)}" for s in range(cfg.system.n_cavities)]
    header.append("contrast_a1_b1")
    items = [(cfg.system, name, v, cfg.t_final) for v in cfg.sweep.values]
    rows = _map(_sweep_point, items, cfg.workers)
    cols = {h: [r[h] for r in rows] for h in header}
    return cols, {"snapshot_t": cfg.t_final}


def _run_mc(cfg: ScenarioConfig):
    k = cfg.system.kappa
    seed = 0 if cfg.seed is None else cfg.seed
    dt = None if cfg.mc_dt is None else cfg.mc_dt / k
    dt_out = None if cfg.dt_out is None else cfg.dt_out / k
    ens = sample_trajectories(cfg.system, cfg.t_final / k, dt, cfg.n_traj, seed, dt_out=dt_out)
    # The sampler snaps its default output spacing to a multiple of its step.
    spacing = float(ens.times[1]) if len(ens.times) > 1 else cfg.t_final / k
    ref = evolve_moments(cfg.system, cfg.t_final / k, spacing)
    report = compare_to_deterministic(ens, ref)
    ref_n = ref.photon_numbers()
    cols = {"t": _floats(ens.times * k)}
    for s in range(cfg.system.n_cavities):
        lab = site_label(s)
        cols[f"n_mc_{lab}"] = _floats(ens.photon_numbers[:, s])
        cols[f"se_{lab}"] = _floats(ens.photon_stderr[:, s])
        cols[f"n_ref_{lab}"] = _floats(ref_n[:, s])
        cols[f"z_{lab}"] = _floats(report.z[:, s])
    meta = {"seed": seed, "n_traj": cfg.n_traj, "mc_dt": ens.dt * k,
            "max_abs_z": report.max_abs_z, "fraction_within_3se": report.fraction_within(3.0)}
    return cols, meta


# -- figure presets ------------------------------------------------------------

def preset_config(name: str, **overrides) -> ScenarioConfig:
    """Default configuration for a figure preset."""
    if name not in PRESETS:
        raise ConfigError("preset", f"must be one of {PRESETS}, got {name!r}")
    if name in ("fig5", "fig5a", "fig5b"):
        e, t_final, noise = 20.0, 20.0, False
        j = 0.6
    elif name.startswith("fig6"):
        e, t_final, noise = 5.0, 8.0, True
        j = FIG6_COUPLINGS.get(name, 0.6)
    else:
        e, t_final, noise = 20.0, 8.0, False
        j = {"fig2": 2.5, "fig3": 0.6, "fig4": 0.4}[name]
    system = SystemParams(3, 1.0, j, DriveSpec(0, e, 0.0), noise_enabled=noise)
    cfg = ScenarioConfig(system=system, scenario="figure-preset", preset=name, t_final=t_final)
    return replace(cfg, **overrides) if overrides else cfg


def _fig_columns(cfg, couplings, sites, pairs):
    cols = {}
    per_j = []
    for j in couplings:
        system = replace(cfg.system, coupling_j=j * cfg.system.kappa)
        per_j.append((j, _evolve(system, cfg.t_final, cfg.resolved_dt_out)))
    cols["t"] = _floats(per_j[0][1].times * cfg.system.kappa)
    single = len(couplings) == 1
    for s, pair in zip(sites, pairs):
        for j, series in per_j:
            suffix = "" if single else f"_j{j:g}"
            cols[f"n_{site_label(s)}{suffix}"] = _floats(series.photon_numbers()[:, s])
        for j, series in per_j:
            suffix = "" if single else f"_j{j:g}"
            i, k = pair
            cols[f"contrast_{site_label(i)}_{site_label(k)}{suffix}"] = _contrast_column(series, i, k)
    return cols


def _run_preset(cfg: ScenarioConfig):
    name = cfg.preset
    kappa = cfg.system.kappa
    j_now = cfg.system.coupling_j / kappa
    if name == "fig2":
        # Column contract: n_a1, n_b1, n_a2, n_b2, then the two contrasts.
        series = _evolve(cfg.system, cfg.t_final, cfg.resolved_dt_out)
        numbers = series.photon_numbers()
        cols = {"t": _floats(series.times * kappa)}
        for s in (0, 1, 2, 3):
            cols[f"n_{site_label(s)}"] = _floats(numbers[:, s])
        cols["contrast_a1_b1"] = _contrast_column(series, 0, 1)
        cols["contrast_a2_b2"] = _contrast_column(series, 2, 3)
        return cols, {"j_over_kappa": [j_now]}
    if name in ("fig3", "fig4"):
        default = {"fig3": (0.6, 0.7), "fig4": (0.4, 0.2)}[name]
        couplings = default if abs(j_now - default[0]) < 1e-12 else (j_now,)
        cols = _fig_columns(cfg, couplings, [1, 2], [(0, 1), (2, 3)])
        return cols, {"j_over_kappa": list(couplings)}
    if name in ("fig5", "fig5a", "fig5b"):
        return _run_fig5(cfg)
    return _run_fig6(cfg)


def _fig5_point(args):
    system, j, snapshots = args
    point = replace(system, coupling_j=j * system.kappa)
    step = float(np.gcd.reduce([int(round(s * 1000)) for s in snapshots])) / 1000
    series = _evolve(point, max(snapshots), step)
    kt = series.times * system.kappa
    out = {}
    for snap in snapshots:
        idx = int(np.argmin(np.abs(kt - snap)))
        out[f"n_b1_t{snap:g}"] = float(series.photon_numbers()[idx, 1])
        c = average_contrast(series[idx], 0, 1)
        out[f"contrast_a1_b1_t{snap:g}"] = None if c is None else float(c)
    return out


def _run_fig5(cfg: ScenarioConfig):
    name = cfg.preset
    values = cfg.sweep.values if cfg.sweep is not None else FIG5_GRID
    final = cfg.t_final
    snapshots = tuple(sorted({s for s in FIG5_SNAPSHOTS if s < final} | {final}))
    rows = _map(_fig5_point, [(cfg.system, j, snapshots) for j in values], cfg.workers)
    cols = {"j_over_kappa": [float(v) for v in values]}
    if name in ("fig5", "fig5a"):
        cols["n_b1"] = [r[f"n_b1_t{final:g}"] for r in rows]
    if name in ("fig5", "fig5b"):
        for snap in snapshots:
            cols[f"contrast_a1_b1_t{snap:g}"] = [r[f"contrast_a1_b1_t{snap:g}"] for r in rows]
    eps = exceptional_points(cfg.system)
    return cols, {"regime_boundaries_j_over_kappa": eps.j_over_kappa,
                  "snapshot_times": list(snapshots)}


def _run_fig6(cfg: ScenarioConfig):
    k = cfg.system.kappa
    noisy = replace(cfg.system, noise_enabled=True)
    clean = replace(cfg.system, noise_enabled=False)
    fwd, bwd = cfg.site_fwd, cfg.site_bwd
    t_final, dt_out = cfg.t_final / k, cfg.resolved_dt_out / k
    r_noisy = reciprocity_experiment(noisy, fwd, bwd, t_final, dt_out)
    r_clean = reciprocity_experiment(clean, fwd, bwd, t_final, dt_out)
    cols = {
        "t": _floats(r_noisy.times * k),
        "difference_noisy": _floats(r_noisy.difference),
        "p_forward_noiseless": _floats(r_clean.forward),
        "p_backward_noiseless": _floats(r_clean.backward),
    }
    meta = {"j_over_kappa": cfg.system.coupling_j / k,
            "site_forward": site_label(r_noisy.site_fwd), "site_backward": site_label(r_noisy.site_bwd)}
    return cols, meta


_DISPATCH = {
    "spectrum": _run_spectrum,
    "evolve": _run_evolve,
    "contrast": _run_contrast,
    "reciprocity": _run_reciprocity,
    "sweep": _run_sweep,
    "mc": _run_mc,
    "figure-preset": _run_preset,
}


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Run one scenario and collect plot-ready columns plus metadata."""
    start = time.perf_counter()
    cols, meta = _DISPATCH[config.scenario](config)
    metadata = _base_metadata(config.system)
    metadata.update(meta)
    metadata["wall_time_s"] = time.perf_counter() - start
    return ScenarioResult(config, cols, metadata)


# -- output ------------------------------------------------------------------

#: Metadata keys left out of files so identical inputs give identical bytes.
VOLATILE_METADATA = ("wall_time_s",)


def _stable_metadata(result: ScenarioResult) -> dict:
    return {k: v for k, v in result.metadata.items() if k not in VOLATILE_METADATA}


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def render(result: ScenarioResult, fmt: str) -> str:
    """Serialise a result to CSV or JSON text."""
    if fmt == "json":
        doc = {"config": result.config.to_dict(), "columns": result.columns,
               "metadata": _stable_metadata(result)}
        return json.dumps(doc, indent=2, allow_nan=True) + "\n"
    if fmt != "csv":
        raise ConfigError("output.format", f"must be one of {FORMATS}, got {fmt!r}")
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(result.config.to_dict(), separators=(",", ":")) + "\n")
    buf.write("# metadata: " + json.dumps(_stable_metadata(result), separators=(",", ":")) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    names = list(result.columns)
    writer.writerow(names)
    for row in zip(*(result.columns[n] for n in names)):
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def emit(result: ScenarioResult, fmt: str | None = None, path: str | os.PathLike | None = None) -> str:
    """Write ``result`` to ``path`` (default: the config's output path).

    Returns the written text. CSV files start with two ``#`` comment lines
    holding the config and metadata as JSON, followed by the header row.
    """
    fmt = fmt or result.config.output.format
    path = path if path is not None else result.config.output.path
    text = render(result, fmt)
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write result to {path}: {exc}") from exc
    return text


def load_result(path: str | os.PathLike) -> ScenarioResult:
    """Read a JSON result file back into a :class:`ScenarioResult`."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return ScenarioResult(ScenarioConfig.from_dict(doc["config"]), doc["columns"], doc["metadata"])
