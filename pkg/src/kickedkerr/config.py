"""Run configuration (INI format) and the output manifest.

A single structured text file documents every parameter of a run; the
manifest echoes it next to content hashes of the emitted files, so a
result directory is self-describing and reruns can be verified
byte-for-byte.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .classical import RNG_ALGORITHM, ClassicalParams
from .dynamics import ModelParams
from .wigner import PhaseGrid


class ConfigError(Exception):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    # [model]
    chi: float = 1.0
    gamma: float = 0.1
    period: float = 3.141592653589793
    kicks: int = 500
    dim: int = 80
    substeps: int | None = None
    # [grid]
    grid_extent: float = 6.0
    grid_points: int = 161
    auto_widen: bool = True
    # [classical]
    n_traj: int = 10_000
    radius: float = 0.5
    seed: int = 12345
    boundary_only: bool = False
    transient: int = 300
    retained: int = 200
    bifurcation_mode: str = "ensemble"
    # [sweep]
    eps_min: float = 0.1
    eps_max: float = 1.4
    eps_step: float = 0.02
    # [delta_series]
    epsilons: tuple = (0.2, 0.3, 0.4, 1.24)
    # [rqa]
    rqa_epsilon: float = 1.24
    rr_targets: tuple = (0.05, 0.10, 0.15)
    l_min: int = 2
    theiler: int = 1
    norm: str = "euclidean"
    max_lag: int = 50
    max_dim: int = 16
    series_drop: int = 50
    # [entropy]
    t_min: int = 50
    t_max: int = 500
    # [output]
    out_dir: str = "out"

    _SECTIONS = {
        "model": ("chi", "gamma", "period", "kicks", "dim", "substeps"),
        "grid": ("grid_extent", "grid_points", "auto_widen"),
        "classical": ("n_traj", "radius", "seed", "boundary_only",
                      "transient", "retained", "bifurcation_mode"),
        "sweep": ("eps_min", "eps_max", "eps_step"),
        "delta_series": ("epsilons",),
        "rqa": ("rqa_epsilon", "rr_targets", "l_min", "theiler", "norm",
                "max_lag", "max_dim", "series_drop"),
        "entropy": ("t_min", "t_max"),
        "output": ("out_dir",),
    }

    def model_params(self, epsilon: float) -> ModelParams:
        return ModelParams(epsilon=epsilon, chi=self.chi, gamma=self.gamma,
                           period=self.period, kicks=self.kicks, dim=self.dim,
                           substeps=self.substeps)

    def classical_params(self, epsilon: float) -> ClassicalParams:
        return ClassicalParams(epsilon=epsilon, chi=self.chi, gamma=self.gamma,
                               period=self.period, n_traj=self.n_traj,
                               radius=self.radius, seed=self.seed,
                               boundary_only=self.boundary_only)

    def phase_grid(self) -> PhaseGrid:
        e, n = self.grid_extent, self.grid_points
        return PhaseGrid(-e, e, -e, e, n, n)

    def eps_grid(self):
        import numpy as np
        n = int(round((self.eps_max - self.eps_min) / self.eps_step)) + 1
        return np.round(self.eps_min + self.eps_step * np.arange(n), 12)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for section, keys in self._SECTIONS.items():
            cp[section] = {}
            for key in keys:
                val = getattr(self, key)
                if val is None:
                    cp[section][key] = "auto"
                elif isinstance(val, tuple):
                    cp[section][key] = " ".join(repr(v) for v in val)
                else:
                    cp[section][key] = repr(val) if isinstance(val, float) else str(val)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for section, keys in cls._SECTIONS.items():
            if not cp.has_section(section):
                continue
            for key in keys:
                if not cp.has_option(section, key):
                    continue
                kwargs[key] = _convert(key, cp.get(section, key), types[key])
        unknown = []
        for section in cp.sections():
            known = cls._SECTIONS.get(section)
            if known is None:
                unknown.append(section)
                continue
            for opt in cp.options(section):
                if opt not in known:
                    unknown.append(f"{section}.{opt}")
        if unknown:
            raise ConfigError(f"unknown config entries: {', '.join(unknown)}")
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path | None, overrides: list[str] = ()) -> "RunConfig":
        cfg = cls.from_ini(Path(path).read_text()) if path else cls()
        for item in overrides:
            cfg = cfg.with_override(item)
        return cfg

    def with_override(self, item: str) -> "RunConfig":
        """Apply one 'section.key=value' command-line override."""
        try:
            dotted, value = item.split("=", 1)
            section, key = dotted.strip().split(".", 1)
        except ValueError:
            raise ConfigError(f"override {item!r} is not section.key=value") from None
        keys = self._SECTIONS.get(section)
        if keys is None or key not in keys:
            raise ConfigError(f"unknown config entry {section}.{key}")
        types = {f.name: f.type for f in fields(type(self))}
        data = {f.name: getattr(self, f.name) for f in fields(type(self))}
        data[key] = _convert(key, value.strip(), types[key])
        try:
            return type(self)(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


_BOOL_KEYS = {"auto_widen", "boundary_only"}
_INT_KEYS = {"kicks", "dim", "grid_points", "n_traj", "seed", "transient", "retained",
             "l_min", "theiler", "max_lag", "max_dim", "series_drop", "t_min", "t_max"}
_FLOAT_KEYS = {"chi", "gamma", "period", "grid_extent", "radius", "eps_min", "eps_max",
               "eps_step", "rqa_epsilon"}
_TUPLE_KEYS = {"epsilons", "rr_targets"}
_STR_KEYS = {"bifurcation_mode", "norm", "out_dir"}


def _convert(key: str, raw: str, _type) -> object:
    raw = raw.strip()
    try:
        if key == "substeps":
            return None if raw in ("auto", "none", "") else int(raw)
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _TUPLE_KEYS:
            return tuple(float(tok) for tok in raw.split())
        if key in _STR_KEYS:
            return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc
    raise ConfigError(f"no converter for key {key}")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, cfg: RunConfig,
                   file_names: list[str], extra: dict | None = None) -> Path:
    """Manifest of one command: config echo, versions and file hashes."""
    import numba
    import numpy
    import scipy

    entries = []
    for name in sorted(file_names):
        p = out_dir / name
        entries.append({"name": name, "sha256": sha256_file(p),
                        "bytes": p.stat().st_size})
    manifest = {
        "command": command,
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in asdict(cfg).items()},
        "files": entries,
        "rng_algorithm": RNG_ALGORITHM,
        "versions": {"kickedkerr": __version__, "numpy": numpy.__version__,
                     "scipy": scipy.__version__, "numba": numba.__version__},
    }
    if extra:
        manifest["result"] = extra
    path = out_dir / f"manifest_{command.replace('-', '_')}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def verify_manifest(path: Path) -> bool:
    """Re-hash the listed files; True when everything matches."""
    data = json.loads(Path(path).read_text())
    base = Path(path).parent
    for entry in data["files"]:
        p = base / entry["name"]
        if not p.is_file() or sha256_file(p) != entry["sha256"]:
            return False
    return True
