"""Study configuration: defaults < YAML ``study:`` section < explicit overrides.

Environment: MEDIANBAYES_WORKERS (default worker count), MEDIANBAYES_SEED (default
master seed). Invalid values are logged and ignored.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import yaml

from .. import datagen
from ..errors import ConfigError, MedianBayesError

LOGGER = logging.getLogger(__name__)

STUDY_KINDS = ("one_sample", "two_sample", "power_curve")
METHODS = ("npbayes", "npbayes_bb", "sign", "rank", "signed_rank", "hotelling")
PVALUE_MODES = ("chi2", "resampling")
ATOM_MODES = ("per_atom", "block")
ENV_WORKERS = "MEDIANBAYES_WORKERS"
ENV_SEED = "MEDIANBAYES_SEED"
FULL_REPLICATIONS = 2000

Vector = Tuple[float, ...]


def _identity(dim: int) -> Tuple[Tuple[float, ...], ...]:
    return tuple(tuple(1.0 if i == j else 0.0 for j in range(dim)) for i in range(dim))


def _default_distributions() -> List[datagen.DistributionSpec]:
    return [datagen.mvn((0.0, 0.0), _identity(2))]


@dataclass
class StudyConfig:
    kind: str = "one_sample"
    distributions: List[datagen.DistributionSpec] = field(default_factory=_default_distributions)
    locations: List[Vector] = field(default_factory=lambda: [(0.0, 0.0)])
    location_pairs: List[Tuple[Vector, Vector]] = field(
        default_factory=lambda: [((0.0, 0.0), (0.0, 0.0))]
    )
    h_grid: List[Vector] = field(default_factory=lambda: [(0.0, 0.0), (1.0, -1.0), (2.0, -2.0)])
    h_pairs: List[Tuple[Vector, Vector]] = field(default_factory=list)
    theta0: Optional[Vector] = None
    n: int = 100
    n1: int = 100
    n2: int = 90
    replications: int = 500
    alpha: float = 0.05
    methods: List[str] = field(default_factory=lambda: ["npbayes", "sign", "rank", "hotelling"])
    mass: float = 2.0
    base_mean: Optional[Vector] = None
    base_variance: float = 10.0
    B: int = 1000
    truncation: Union[int, str] = "auto"
    atom_mode: str = "per_atom"
    pvalue: str = "chi2"
    resamples: int = 2000
    mc_size: int = 1_000_000
    seed: Optional[int] = None
    workers: int = 1

    @property
    def dim(self) -> int:
        return self.distributions[0].dim

    @property
    def null_value(self) -> Vector:
        return self.theta0 if self.theta0 is not None else tuple([0.0] * self.dim)

    @property
    def two_sample_curve(self) -> bool:
        return self.kind == "power_curve" and bool(self.h_pairs)

    @property
    def is_two_sample(self) -> bool:
        return self.kind == "two_sample" or self.two_sample_curve

    def validate(self) -> "StudyConfig":
        if self.kind not in STUDY_KINDS:
            raise ConfigError(f"kind must be one of {STUDY_KINDS}, got {self.kind!r}")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; expected a subset of {METHODS}")
        if self.pvalue not in PVALUE_MODES:
            raise ConfigError(f"pvalue must be one of {PVALUE_MODES}, got {self.pvalue!r}")
        if self.atom_mode not in ATOM_MODES:
            raise ConfigError(f"atom_mode must be one of {ATOM_MODES}, got {self.atom_mode!r}")
        if not self.distributions:
            raise ConfigError("distributions must be nonempty")
        dims = {spec.dim for spec in self.distributions}
        if len(dims) != 1:
            raise ConfigError(f"distributions differ in dimension: {sorted(dims)}")
        dim = self.dim
        for name, value in (("n", self.n), ("n1", self.n1), ("n2", self.n2), ("B", self.B)):
            if value < dim + 1:
                raise ConfigError(f"{name} must be >= k + 1 = {dim + 1}, got {value}")
        if self.truncation != "auto" and (not isinstance(self.truncation, int) or self.truncation < 1):
            raise ConfigError(f"truncation must be 'auto' or a positive integer, got {self.truncation!r}")
        if self.mass <= 0.0 or self.base_variance <= 0.0:
            raise ConfigError("mass and base_variance must be positive")
        if self.resamples < 1 or self.workers < 1:
            raise ConfigError("resamples and workers must be >= 1")
        self._check_vectors(dim)
        if self.is_two_sample and "signed_rank" in self.methods:
            raise ConfigError("signed_rank is a one-sample method")
        if self.kind == "power_curve":
            families = {spec.family for spec in self.distributions}
            if families - {"mvn", "mvt"}:
                raise ConfigError(f"power_curve needs a gaussian or t family, got {sorted(families)}")
        return self

    def _check_vectors(self, dim: int) -> None:
        vectors: List[Tuple[str, Vector]] = [("locations", v) for v in self.locations]
        vectors += [("h_grid", v) for v in self.h_grid]
        for key, pairs in (("location_pairs", self.location_pairs), ("h_pairs", self.h_pairs)):
            for first, second in pairs:
                vectors += [(key, first), (key, second)]
        if self.theta0 is not None:
            vectors.append(("theta0", self.theta0))
        if self.base_mean is not None:
            vectors.append(("base_mean", self.base_mean))
        for key, vector in vectors:
            if len(vector) != dim:
                raise ConfigError(f"{key} entry {vector} does not have dimension {dim}")

    def to_dict(self) -> Dict[str, Any]:
        """Plain mapping that ``from_mapping`` reads back to the same config."""
        data = dataclasses.asdict(self)
        data["distributions"] = [_distribution_to_mapping(spec) for spec in self.distributions]
        for key in ("locations", "h_grid"):
            data[key] = [list(v) for v in data[key]]
        for key in ("location_pairs", "h_pairs"):
            data[key] = [[list(a), list(b)] for a, b in data[key]]
        for key in ("theta0", "base_mean"):
            if data[key] is not None:
                data[key] = list(data[key])
        return data


def _distribution_to_mapping(spec: datagen.DistributionSpec) -> Dict[str, Any]:
    out: Dict[str, Any] = {"family": spec.family, "scatter": [list(row) for row in spec.scatter]}
    if spec.family == "mvt":
        out["df"] = spec.df
    if spec.family == "gamma_copula":
        out.update(shape=spec.shape, rate=spec.rate, centered=spec.centered)
        if spec.center is not None:
            out["center"] = list(spec.center)
    return out


def _vector(value: Any, key: str) -> Vector:
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: expected a list of numbers, got {value!r}") from exc


def _pair(value: Any, key: str) -> Tuple[Vector, Vector]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{key}: expected a pair of vectors, got {value!r}")
    return _vector(value[0], key), _vector(value[1], key)


def _distribution(raw: Any) -> datagen.DistributionSpec:
    if isinstance(raw, str):
        raw = {"family": raw}
    if not isinstance(raw, Mapping):
        raise ConfigError(f"distributions: expected a mapping, got {raw!r}")
    family = raw.get("family", "mvn")
    scatter = raw.get("scatter")
    dim = len(scatter) if scatter is not None else int(raw.get("dim", 2))
    if scatter is None:
        scatter = _identity(dim)
    zero = tuple([0.0] * dim)
    try:
        if family == "mvn":
            return datagen.mvn(zero, scatter)
        if family == "mvt":
            return datagen.mvt(zero, scatter, float(raw.get("df", 1.0)))
        if family == "gamma_copula":
            spec = datagen.gamma_copula(
                float(raw.get("shape", datagen.DEFAULT_GAMMA_SHAPE)),
                float(raw.get("rate", datagen.DEFAULT_GAMMA_RATE)),
                scatter,
                zero,
                centered=bool(raw.get("centered", True)),
            )
            if raw.get("center") is not None:
                spec = dataclasses.replace(spec, center=_vector(raw["center"], "center"))
            return spec
    except MedianBayesError as exc:
        raise ConfigError(f"distributions: {exc}") from exc
    raise ConfigError(f"distributions: unknown family {family!r}")


def _truncation(value: Any) -> Union[int, str]:
    if value == "auto":
        return "auto"
    try:
        return int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"truncation: expected 'auto' or an integer, got {value!r}") from exc


_SCALARS = {
    "kind": str,
    "n": int,
    "n1": int,
    "n2": int,
    "replications": int,
    "alpha": float,
    "mass": float,
    "base_variance": float,
    "B": int,
    "atom_mode": str,
    "pvalue": str,
    "resamples": int,
    "mc_size": int,
    "workers": int,
}


def from_mapping(raw: Mapping[str, Any], base: Optional[StudyConfig] = None) -> StudyConfig:
    """Overlay ``raw`` (the ``study:`` section) on ``base`` and validate."""
    config = dataclasses.replace(base) if base is not None else StudyConfig()
    known = {f.name for f in dataclasses.fields(StudyConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown study keys: {unknown}")
    updates: Dict[str, Any] = {}
    for key, value in raw.items():
        if value is None and key not in ("seed", "theta0", "base_mean"):
            continue
        try:
            if key in _SCALARS:
                updates[key] = _SCALARS[key](value)
            elif key == "seed":
                updates[key] = None if value is None else int(value)
            elif key == "methods":
                updates[key] = [str(m) for m in ([value] if isinstance(value, str) else value)]
            elif key == "distributions":
                updates[key] = [_distribution(item) for item in value]
            elif key in ("locations", "h_grid"):
                updates[key] = [_vector(item, key) for item in value]
            elif key in ("location_pairs", "h_pairs"):
                updates[key] = [_pair(item, key) for item in value]
            elif key in ("theta0", "base_mean"):
                updates[key] = None if value is None else _vector(value, key)
            elif key == "truncation":
                updates[key] = _truncation(value)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{key}: invalid value {value!r} ({exc})") from exc
    return dataclasses.replace(config, **updates).validate()


def _parse_env_int(name: str) -> Optional[int]:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        LOGGER.warning("Invalid %s=%s, ignoring", name, raw)
        return None


def env_defaults() -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    workers = _parse_env_int(ENV_WORKERS)
    if workers is not None:
        if workers >= 1:
            out["workers"] = workers
        else:
            LOGGER.warning("Invalid %s=%s, ignoring", ENV_WORKERS, workers)
    seed = _parse_env_int(ENV_SEED)
    if seed is not None:
        out["seed"] = seed
    return out


def _read_yaml(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"Config not found: {path}")
    try:
        with path.open(encoding="utf-8") as fh:
            document = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(document, Mapping):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    section = document.get("study", {}) or {}
    if not isinstance(section, Mapping):
        raise ConfigError(f"{path}: 'study' must be a mapping")
    return dict(section)


PRESETS: Dict[str, Dict[str, Any]] = {
    "table1": {
        "kind": "one_sample",
        "distributions": [
            {"family": "mvn"},
            {"family": "mvt", "df": 1},
            {"family": "gamma_copula", "shape": 2, "rate": 1},
        ],
        "locations": [[0, 0], [0.05, 0.05], [0.1, 0.05], [0.1, -0.1]],
        "methods": ["npbayes", "sign", "rank", "hotelling"],
        "n": 100,
    },
    "table2": {
        "kind": "two_sample",
        "distributions": [
            {"family": "mvn"},
            {"family": "mvt", "df": 1},
            {"family": "gamma_copula", "shape": 2, "rate": 1},
        ],
        "location_pairs": [
            [[0, 0], [0, 0]],
            [[0, 0], [0.1, 0]],
            [[0, 0], [0.1, 0.1]],
            [[0, 0], [0, 0.3]],
        ],
        "methods": ["npbayes", "sign", "rank", "hotelling"],
        "n1": 100,
        "n2": 90,
    },
    "curve": {
        "kind": "power_curve",
        "distributions": [{"family": "mvn"}],
        "h_grid": [[0, 0], [1, -1], [2, -2], [3, -3]],
        "methods": ["npbayes"],
        "n": 400,
    },
}


def preset_config(name: str) -> Dict[str, Any]:
    try:
        return dict(PRESETS[name])
    except KeyError as exc:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from exc


def load_config(
    path: Optional[Union[str, Path]] = None,
    *,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> StudyConfig:
    """Defaults, then environment, then preset, then YAML, then non-None overrides."""
    config = from_mapping(env_defaults())
    if preset:
        config = from_mapping(preset_config(preset), config)
    if path is not None:
        config = from_mapping(_read_yaml(Path(path)), config)
    if overrides:
        config = from_mapping({k: v for k, v in overrides.items() if v is not None}, config)
    return config


__all__ = [
    "METHODS",
    "PRESETS",
    "StudyConfig",
    "env_defaults",
    "from_mapping",
    "load_config",
    "preset_config",
]
