"""Monte Carlo power studies and single-dataset test runs.

Replication r of row c draws from the substream (master, key_of(c), r): data use
child 0 (and 1 for the second sample), each method its own child keyed by name. The
table is therefore a pure function of (config, master seed) whatever the worker count.
"""

from __future__ import annotations

import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .. import asymptotics, bnp_tests, classical, datagen
from .. import rng as rng_mod
from ..dp import BaseMeasure, DPPrior
from ..errors import DomainError
from .config import StudyConfig
from .report import PowerCell, PowerTable, RowInfo, outcome_to_dict

LOGGER = logging.getLogger(__name__)

Vector = Tuple[float, ...]
DATA_KEY = 0
METHOD_KEY = 2
THEORY_KEY = "theoretical-power"


def format_vector(vector: Sequence[float]) -> str:
    return "(" + ", ".join(f"{v:g}" for v in vector) + ")"


@dataclass(frozen=True)
class StudyRow:
    key: str
    distribution: datagen.DistributionSpec
    locations: Tuple[Vector, ...]
    h: Optional[Tuple[Vector, ...]] = None

    @property
    def specs(self) -> Tuple[datagen.DistributionSpec, ...]:
        return tuple(self.distribution.with_location(loc) for loc in self.locations)

    @property
    def info(self) -> RowInfo:
        label = " vs ".join(format_vector(loc) for loc in self.locations)
        h_label = " vs ".join(format_vector(v) for v in self.h) if self.h else ""
        return RowInfo(self.key, self.distribution.label, label, h_label)


def _shifted(theta0: Vector, h: Vector, n: int) -> Vector:
    return tuple(t + v / math.sqrt(n) for t, v in zip(theta0, h))


def build_rows(config: StudyConfig) -> List[StudyRow]:
    """Rows in table order. Gamma re-centering offsets are pinned here, once."""
    rows: List[StudyRow] = []
    theta0 = config.null_value
    for raw in config.distributions:
        dist = datagen.resolve_center(raw)
        if config.kind == "one_sample":
            grid = [((loc,), None) for loc in config.locations]
        elif config.kind == "two_sample":
            grid = [((first, second), None) for first, second in config.location_pairs]
        elif config.two_sample_curve:
            grid = [
                ((_shifted(theta0, h1, config.n1), _shifted(theta0, h2, config.n2)), (h1, h2))
                for h1, h2 in config.h_pairs
            ]
        else:
            grid = [((_shifted(theta0, h, config.n),), (h,)) for h in config.h_grid]
        for locations, h in grid:
            tag = h if h is not None else locations
            key = f"{config.kind}|{dist.label}|" + "|".join(format_vector(v) for v in tag)
            rows.append(StudyRow(key, dist, locations, h))
    return rows


def make_prior(config: StudyConfig, dim: Optional[int] = None) -> DPPrior:
    dim = config.dim if dim is None else dim
    mean = np.zeros(dim) if config.base_mean is None else np.asarray(config.base_mean, dtype=float)
    if mean.size != dim:
        raise DomainError(f"base_mean has dimension {mean.size}, data has {dim}")
    return DPPrior(config.mass, BaseMeasure.gaussian(mean, config.base_variance * np.eye(dim)))


MethodSeed = Union[rng_mod.SeedLike, Tuple[rng_mod.SeedLike, rng_mod.SeedLike]]


def run_method(
    method: str,
    samples: Sequence[np.ndarray],
    config: StudyConfig,
    seed: MethodSeed,
    theta0: Optional[Sequence[float]] = None,
) -> bnp_tests.TestOutcome:
    """Run one named method on one sample (against theta0) or on two samples."""
    level = 1.0 - config.alpha
    resampling = config.pvalue == "resampling"
    dim = samples[0].shape[1]
    single = seed[0] if isinstance(seed, tuple) else seed
    if len(samples) == 1:
        data = samples[0]
        null = config.null_value if theta0 is None else theta0
        if method in ("npbayes", "npbayes_bb"):
            prior = make_prior(config, dim) if method == "npbayes" else None
            return bnp_tests.one_sample_test(
                data, null, prior, config.B, level, seed,
                truncation=config.truncation, atom_mode=config.atom_mode,
            )
        if method == "hotelling":
            return classical.hotelling_chi2(data, null, config.alpha)
        return classical.one_sample_score_test(
            data, null, method, config.alpha,
            resampling=resampling, flips=config.resamples, rng=single,
        )
    data1, data2 = samples
    if method in ("npbayes", "npbayes_bb"):
        prior = make_prior(config, dim) if method == "npbayes" else None
        return bnp_tests.two_sample_test(
            data1, data2, prior, config.B, level, seed,
            truncation=config.truncation, atom_mode=config.atom_mode,
        )
    if method == "hotelling":
        return classical.hotelling_chi2_two_sample(data1, data2, config.alpha)
    if resampling:
        return classical.two_sample_resampling_test(
            data1, data2, method, config.alpha, perms=config.resamples, rng=single
        )
    return classical.two_sample_score_test(data1, data2, method, True, config.alpha)


def _error_text(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def _run_replication(task: Tuple[StudyConfig, int, StudyRow, int, int]):
    """Top-level picklable worker: one replication of one row, every method."""
    config, index, row, rep, master = task
    seed = rng_mod.child_seed(master, rng_mod.key_of(row.key), rep)
    outcomes: Dict[str, Union[bool, str]] = {}
    try:
        sizes = (config.n1, config.n2) if len(row.specs) == 2 else (config.n,)
        samples = [
            datagen.sample(spec, size, rng_mod.child_seed(seed, DATA_KEY + offset))
            for offset, (spec, size) in enumerate(zip(row.specs, sizes))
        ]
    except Exception as exc:
        return index, rep, {method: _error_text(exc) for method in config.methods}
    for method in config.methods:
        method_seed = rng_mod.child_seed(seed, METHOD_KEY, rng_mod.key_of(method))
        try:
            outcomes[method] = bool(run_method(method, samples, config, method_seed).reject)
        except Exception as exc:
            outcomes[method] = _error_text(exc)
    return index, rep, outcomes


def _execute(tasks: List[Tuple], workers: int) -> List[Tuple]:
    if workers <= 1 or len(tasks) <= 1:
        return [_run_replication(task) for task in tasks]
    chunksize = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_replication, tasks, chunksize=chunksize))


def _tabulate(
    rows: List[StudyRow], config: StudyConfig, results: List[Tuple]
) -> Dict[Tuple[str, str], PowerCell]:
    rejections: Dict[Tuple[int, str], int] = defaultdict(int)
    errors: Dict[Tuple[int, str], Tuple[int, str]] = {}
    for index, rep, outcomes in results:
        for method, value in outcomes.items():
            if isinstance(value, str):
                # lowest failing replication wins
                current = errors.get((index, method))
                if current is None or rep < current[0]:
                    errors[(index, method)] = (rep, value)
            elif value:
                rejections[(index, method)] += 1
    cells: Dict[Tuple[str, str], PowerCell] = {}
    for index, row in enumerate(rows):
        for method in config.methods:
            failure = errors.get((index, method))
            if failure is not None:
                rep, message = failure
                LOGGER.warning("Cell %s / %s aborted at replication %s: %s", row.key, method, rep, message)
                cells[(row.key, method)] = PowerCell.failed(config.replications, f"replication {rep}: {message}")
            else:
                cells[(row.key, method)] = PowerCell.from_counts(
                    rejections[(index, method)], config.replications
                )
    return cells


def run_power_study(config: StudyConfig) -> PowerTable:
    """Rejection proportions for every (row, method) cell of the study grid."""
    config.validate()
    master = rng_mod.resolve_seed(config.seed)
    started = time.perf_counter()
    rows = build_rows(config)
    LOGGER.info(
        "Power study: %s rows x %s methods x %s replications (seed=%s, workers=%s)",
        len(rows), len(config.methods), config.replications, master, config.workers,
    )
    tasks = [(config, index, row, rep, master) for index, row in enumerate(rows) for rep in range(config.replications)]
    results = _execute(tasks, config.workers)
    cells = _tabulate(rows, config, results)
    for row in rows:
        summary = ", ".join(f"{m}={cells[(row.key, m)].display()}" for m in config.methods)
        LOGGER.info("%s: %s", row.key, summary)
    echo = config.to_dict()
    echo["seed"] = master
    return PowerTable(
        methods=list(config.methods),
        rows=[row.info for row in rows],
        cells=cells,
        config=echo,
        seed=master,
        wall_time=time.perf_counter() - started,
    )


def theoretical_power(row: StudyRow, config: StudyConfig, master: int) -> float:
    model = asymptotics.model_for(row.distribution)
    theta0 = config.null_value
    seed = rng_mod.child_seed(master, rng_mod.key_of(THEORY_KEY), rng_mod.key_of(row.key))
    if row.h is None:
        raise DomainError(f"row {row.key} carries no local alternative")
    if len(row.h) == 2:
        lam = config.n1 / (config.n1 + config.n2)
        return asymptotics.two_sample_local_power(
            model, model, theta0, row.h[0], row.h[1], lam, config.alpha, config.mc_size, seed
        )
    return asymptotics.one_sample_local_power(model, theta0, row.h[0], config.alpha, config.mc_size, seed)


def run_power_comparison(config: StudyConfig) -> PowerTable:
    """Empirical power at theta0 + h / sqrt(n) next to the limiting local power."""
    if config.kind != "power_curve":
        raise DomainError(f"power comparison needs kind 'power_curve', got {config.kind!r}")
    table = run_power_study(config)
    started = time.perf_counter()
    theory: Dict[str, float] = {}
    for row in build_rows(config):
        theory[row.key] = theoretical_power(row, config, table.seed)
        LOGGER.info("%s: theoretical power %.3f", row.key, theory[row.key])
    table.theoretical = theory
    table.wall_time += time.perf_counter() - started
    return table


def run_single_test(
    data,
    theta0: Optional[Sequence[float]] = None,
    *,
    data2=None,
    methods: Sequence[str] = ("npbayes",),
    config: Optional[StudyConfig] = None,
    seed: MethodSeed = None,
) -> Dict[str, Any]:
    """Run the selected methods on one dataset (against theta0) or two datasets.

    For two samples ``seed`` may be a pair, one seed per sample; each method then gets
    its own child of each.
    """
    settings = config if config is not None else StudyConfig()
    first = np.atleast_2d(np.asarray(data, dtype=float))
    samples = [first] if data2 is None else [first, np.atleast_2d(np.asarray(data2, dtype=float))]
    k = first.shape[1]
    if data2 is not None and samples[1].shape[1] != k:
        raise DomainError(f"dimension mismatch: {k} vs {samples[1].shape[1]} columns")
    if data2 is None:
        null = tuple([0.0] * k) if theta0 is None else tuple(float(v) for v in theta0)
        if len(null) != k:
            raise DomainError(f"theta0 has dimension {len(null)}, data has {k}")
    else:
        null = None
    if isinstance(seed, (tuple, list)):
        if data2 is None or len(seed) != 2:
            raise DomainError("a pair of seeds needs exactly two datasets")
        seeds = tuple(rng_mod.resolve_seed(s) for s in seed)
    else:
        seeds = rng_mod.resolve_seed(seed)
    results = []
    for method in methods:
        key = rng_mod.key_of(method)
        if isinstance(seeds, tuple):
            method_seed = tuple(rng_mod.child_seed(s, key) for s in seeds)
        else:
            method_seed = rng_mod.child_seed(seeds, key)
        outcome = run_method(method, samples, settings, method_seed, null)
        results.append(outcome_to_dict(outcome))
    return {
        "kind": "one_sample" if data2 is None else "two_sample",
        "n": [int(s.shape[0]) for s in samples],
        "k": k,
        "theta0": list(null) if null is not None else None,
        "alpha": settings.alpha,
        "seed": list(seeds) if isinstance(seeds, tuple) else seeds,
        "results": results,
    }


__all__ = [
    "StudyRow",
    "build_rows",
    "make_prior",
    "run_method",
    "run_power_comparison",
    "run_power_study",
    "run_single_test",
    "theoretical_power",
]
