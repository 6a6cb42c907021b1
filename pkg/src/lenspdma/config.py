"""Experiment configuration: YAML loading, presets, validation and hashing.

Angles are given in degrees in configuration files and converted to radians
here. A file may start from a preset (``preset: paper-defaults``) and override
individual keys; the fully resolved mapping is what gets hashed into result
metadata.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .channel import PathLossConfig, ScenarioConfig
from .estimation import TrainingConfig
from .lens_array import LensArrayConfig, UpaConfig
from .linksim import SimConfig

__all__ = ["ConfigError", "SeriesSpec", "SweepSpec", "ExperimentConfig", "PRESETS", "load_config", "from_mapping"]

AXES = ("snr_db", "m_rf", "k_users")
MODES = ("mrc", "mmse")
CSI = ("perfect", "estimated")


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


_BASE = {
    "scenario": {
        "n_users": 5,
        "n_paths": 3,
        "carrier_hz": 28.0e9,
        "bandwidth_hz": 500.0e6,
        "max_delay_s": 100.0e-9,
        "angle_range_deg": 60.0,
        "aod_range_deg": None,
        "distance_m": 100.0,
        "pathloss": {"exponent": 2.9, "ref_distance_m": 100.0, "dominant_fraction": 0.5, "dirichlet_alpha": 1.0},
    },
    "arrays": {
        "lens": {"d_y": 10.0, "d_z": 10.0, "theta_cov_deg": 180.0, "phi_cov_deg": 180.0, "focal_ratio": 10.0, "phase0_deg": 0.0},
        "upa": {"n_y": 4, "n_z": 4, "spacing": 0.5},
        "m_rf": 10,
    },
    "codebook": {"n_cb": 256, "shape": None, "el_range_deg": 90.0, "az_range_deg": 90.0},
    "training": {"snr_db": 20.0, "rho": 0.0, "t2": None, "pilot_seed": 0, "coherence": 50000},
    "sim": {
        "n_symbols": 100000,
        "n_trials": 100,
        "snr_db": -10.0,
        "seed": 0,
        "modulation": "gaussian",
        "empirical": False,
        "noise_var": 1.0,
    },
    "sweep": {"axis": "snr_db", "values": [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]},
    "series": [
        {"mode": "mrc", "csi": "perfect"},
        {"mode": "mmse", "csi": "perfect"},
        {"mode": "mrc", "csi": "estimated"},
    ],
    "output": {"path": "results.csv", "format": "csv"},
}


def _preset(**overrides) -> dict:
    out = copy.deepcopy(_BASE)
    for dotted, value in overrides.items():
        section, key = dotted.split("__")
        if key == "*":
            out[section] = value
        else:
            out[section][key] = value
    return out


PRESETS = {
    # multi-user SNR sweep (K=5, 10 RF chains, training SNR 20 dB)
    "paper-defaults": _preset(),
    "fig3": _preset(
        scenario__n_users=1,
        arrays__m_rf=3,
        training__snr_db=10.0,
        sweep__values=[-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0],
    ),
    "fig4": _preset(
        scenario__n_users=1,
        training__snr_db=10.0,
        sweep__axis="m_rf",
        sweep__values=[1, 2, 3, 5, 10, 20, 50, "all"],
    ),
    "fig5": _preset(),
    "fig6": _preset(
        sweep__axis="m_rf",
        sweep__values=[5, 10, 20, 30, 50, 100, "all"],
    ),
}


@dataclass(frozen=True)
class SeriesSpec:
    mode: str
    csi: str


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Typed view of a resolved configuration mapping."""

    scenario: ScenarioConfig
    lens: LensArrayConfig
    upa: UpaConfig
    m_rf: int
    codebook_kwargs: dict
    training: TrainingConfig
    coherence: int
    noise_var: float
    sim: SimConfig
    sweep: SweepSpec
    series: tuple
    output_path: str
    output_format: str
    resolved: dict

    def resolve_m_rf(self, value) -> int:
        if value == "all":
            return self.lens.n_antennas
        return min(int(value), self.lens.n_antennas)

    @property
    def digest(self) -> str:
        """sha256 of the canonical JSON of the resolved mapping (seed included)."""
        text = json.dumps(self.resolved, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def metadata(self) -> dict:
        return {"config_sha256": self.digest, "seed": self.sim.seed, "config": self.resolved}

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.resolved == other.resolved


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in out:
            raise ConfigError(f"unknown key '{where}{key}'")
        if isinstance(out[key], dict) and value is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}{key}' must be a mapping")
            out[key] = _merge(out[key], value, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _rad(deg) -> float:
    return math.radians(float(deg))


def _build(r: dict) -> ExperimentConfig:
    s, a, cb, tr, sim = r["scenario"], r["arrays"], r["codebook"], r["training"], r["sim"]
    scenario = ScenarioConfig(
        n_users=int(s["n_users"]),
        n_paths=int(s["n_paths"]),
        carrier_hz=float(s["carrier_hz"]),
        bandwidth_hz=float(s["bandwidth_hz"]),
        max_delay_s=float(s["max_delay_s"]),
        angle_range=_rad(s["angle_range_deg"]),
        aod_range=None if s["aod_range_deg"] is None else _rad(s["aod_range_deg"]),
        distance_m=tuple(s["distance_m"]) if isinstance(s["distance_m"], list) else float(s["distance_m"]),
        pathloss=PathLossConfig(**{k: float(v) for k, v in s["pathloss"].items()}),
    )
    ln = a["lens"]
    lens = LensArrayConfig(
        d_y=float(ln["d_y"]),
        d_z=float(ln["d_z"]),
        theta_cov=_rad(ln["theta_cov_deg"]),
        phi_cov=_rad(ln["phi_cov_deg"]),
        focal_ratio=float(ln["focal_ratio"]),
        phase0=_rad(ln["phase0_deg"]),
    )
    upa = UpaConfig(int(a["upa"]["n_y"]), int(a["upa"]["n_z"]), float(a["upa"]["spacing"]))
    m_rf_raw = a["m_rf"]
    if m_rf_raw != "all" and (not isinstance(m_rf_raw, int) or m_rf_raw < 1):
        raise ConfigError("arrays.m_rf must be a positive integer or 'all'")
    m_rf = lens.n_antennas if m_rf_raw == "all" else min(m_rf_raw, lens.n_antennas)

    n_cb = int(cb["n_cb"])
    shape = None if cb["shape"] is None else tuple(int(x) for x in cb["shape"])
    if shape is None and math.isqrt(n_cb) ** 2 != n_cb:
        raise ConfigError(f"codebook.n_cb={n_cb} is not a perfect square and no shape is given")
    if shape is not None and (len(shape) != 2 or shape[0] * shape[1] != n_cb):
        raise ConfigError(f"codebook.shape {shape} does not factor n_cb={n_cb}")
    codebook_kwargs = {
        "n_cb": n_cb,
        "shape": shape,
        "el_range": _rad(cb["el_range_deg"]),
        "az_range": _rad(cb["az_range_deg"]),
    }

    noise_var = float(sim["noise_var"])
    if noise_var <= 0:
        raise ConfigError("sim.noise_var must be positive")
    training = TrainingConfig(
        p_tr=10 ** (float(tr["snr_db"]) / 10) * noise_var,
        rho=float(tr["rho"]),
        t2=None if tr["t2"] is None else int(tr["t2"]),
        pilot_seed=int(tr["pilot_seed"]),
        mu=scenario.mu,
    )
    coherence = int(tr["coherence"])
    if coherence < 1:
        raise ConfigError("training.coherence must be positive")

    simcfg = SimConfig(
        n_symbols=int(sim["n_symbols"]),
        n_trials=int(sim["n_trials"]),
        snr_db=float(sim["snr_db"]),
        seed=int(sim["seed"]),
        modulation=str(sim["modulation"]),
        empirical=bool(sim["empirical"]),
    )
    if simcfg.n_symbols <= 2 * scenario.mu:
        raise ConfigError(f"sim.n_symbols must exceed 2 mu = {2 * scenario.mu}")

    sw = r["sweep"]
    if sw["axis"] not in AXES:
        raise ConfigError(f"sweep.axis must be one of {AXES}, got {sw['axis']!r}")
    values = sw["values"]
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values must be a non-empty list")
    if sw["axis"] == "m_rf":
        bad = [v for v in values if v != "all" and not (isinstance(v, int) and v >= 1)]
        if bad:
            raise ConfigError(f"sweep.values for m_rf must be positive integers or 'all', got {bad}")
        values = [lens.n_antennas if v == "all" else min(v, lens.n_antennas) for v in values]
    elif sw["axis"] == "k_users":
        if any(not isinstance(v, int) or v < 1 for v in values):
            raise ConfigError("sweep.values for k_users must be positive integers")
    else:
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in values):
            raise ConfigError("sweep.values for snr_db must be numbers")
        values = [float(v) for v in values]
    if len(set(values)) != len(values):
        raise ConfigError("sweep.values contains duplicates")

    if not isinstance(r["series"], list) or not r["series"]:
        raise ConfigError("series must be a non-empty list")
    series = []
    for item in r["series"]:
        if not isinstance(item, dict) or set(item) != {"mode", "csi"}:
            raise ConfigError(f"series entries need exactly 'mode' and 'csi', got {item!r}")
        if item["mode"] not in MODES or item["csi"] not in CSI:
            raise ConfigError(f"unsupported series {item!r}")
        if item["mode"] == "mmse" and item["csi"] == "estimated":
            raise ConfigError("estimated CSI is only defined for MRC")
        series.append(SeriesSpec(item["mode"], item["csi"]))

    out = r["output"]
    if out["format"] not in ("csv", "jsonl"):
        raise ConfigError("output.format must be 'csv' or 'jsonl'")

    return ExperimentConfig(
        scenario=scenario,
        lens=lens,
        upa=upa,
        m_rf=m_rf,
        codebook_kwargs=codebook_kwargs,
        training=training,
        coherence=coherence,
        noise_var=noise_var,
        sim=simcfg,
        sweep=SweepSpec(sw["axis"], tuple(values)),
        series=tuple(series),
        output_path=str(out["path"]),
        output_format=out["format"],
        resolved=r,
    )


def from_mapping(data: dict | None, seed: int | None = None, trials: int | None = None) -> ExperimentConfig:
    """Resolve ``data`` against its preset (default ``paper-defaults``) and validate."""
    data = dict(data or {})
    name = data.pop("preset", "paper-defaults")
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    resolved = _merge(PRESETS[name], data)
    if seed is not None:
        resolved["sim"]["seed"] = int(seed)
    if trials is not None:
        resolved["sim"]["n_trials"] = int(trials)
    try:
        return _build(resolved)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, seed: int | None = None, trials: int | None = None) -> ExperimentConfig:
    """Read a YAML experiment file. ``seed`` and ``trials`` override the file."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("top level of the config must be a mapping")
    return from_mapping(data, seed=seed, trials=trials)


def dump_preset(name: str = "paper-defaults") -> str:
    """YAML text of a preset, usable as a starting config file."""
    return yaml.safe_dump(PRESETS[name], sort_keys=False)
