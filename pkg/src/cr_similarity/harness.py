"""Monte Carlo study of rejection rates (type I error and power).

A scenario fixes the true intensities of both groups, a list of sample
sizes and a list of threshold vectors. Every (sample size, thresholds) cell
is simulated ``n_sim`` times; each repetition draws fresh data for both
groups and runs the full bootstrap test.

Repetition ``r`` of cell ``(i, j)`` uses streams keyed by
``(master_seed, scenario, i, j, r)``, so reports are identical for any
number of workers.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._rng import derive_seed, name_key, substream
from .similarity import ADMINISTRATIVE, TestConfig, run_similarity_test, simulate_group

__all__ = [
    "ScenarioSpec",
    "CellResult",
    "SimulationReport",
    "builtin_scenarios",
    "get_scenario",
    "run_cell",
    "run_scenario",
    "rejection_curve",
]

SAMPLE_SIZES = ((200, 200), (250, 300), (300, 300), (250, 450), (300, 500), (500, 500))
THRESHOLD_VALUES = (0.00015, 0.0002, 0.0005, 0.0006, 0.001, 0.0015, 0.002)

# repetitions per worker task
_CHUNK = 25


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    alpha1: tuple
    alpha2: tuple
    sample_sizes: tuple = SAMPLE_SIZES
    tau: float = 90.0
    delta_grid: tuple = ()
    n_sim: int = 1000
    n_boot: int = 500
    level: float = 0.05
    censoring_mode: str = ADMINISTRATIVE

    def __post_init__(self):
        a1 = tuple(float(a) for a in self.alpha1)
        a2 = tuple(float(a) for a in self.alpha2)
        if len(a1) != len(a2):
            raise ValueError("alpha vectors differ in length")
        grid = tuple(tuple(float(d) for d in deltas) for deltas in self.delta_grid)
        for deltas in grid:
            if len(deltas) != len(a1):
                raise ValueError(f"threshold vector {deltas} does not match k={len(a1)}")
        sizes = tuple((int(n1), int(n2)) for n1, n2 in self.sample_sizes)
        object.__setattr__(self, "alpha1", a1)
        object.__setattr__(self, "alpha2", a2)
        object.__setattr__(self, "delta_grid", grid)
        object.__setattr__(self, "sample_sizes", sizes)
        if self.n_sim < 1:
            raise ValueError("n_sim must be at least 1")

    @property
    def k(self) -> int:
        return len(self.alpha1)

    @property
    def true_distances(self) -> tuple:
        return tuple(abs(a - b) for a, b in zip(self.alpha1, self.alpha2))

    def replace(self, **changes) -> "ScenarioSpec":
        fields = {f: getattr(self, f) for f in self.__dataclass_fields__}
        fields.update(changes)
        return ScenarioSpec(**fields)


@dataclass(frozen=True)
class CellResult:
    n1: int
    n2: int
    deltas: tuple
    global_rate: float
    state_rates: tuple
    n_sim: int

    @staticmethod
    def std_error(rate: float, n_sim: int) -> float:
        return math.sqrt(rate * (1.0 - rate) / n_sim)

    @property
    def global_se(self) -> float:
        return self.std_error(self.global_rate, self.n_sim)

    @property
    def state_se(self) -> tuple:
        return tuple(self.std_error(r, self.n_sim) for r in self.state_rates)


@dataclass
class SimulationReport:
    scenario: str
    k: int
    cells: list = field(default_factory=list)

    def cell(self, sizes, deltas) -> CellResult:
        sizes = tuple(sizes)
        deltas = tuple(float(d) for d in deltas)
        for c in self.cells:
            if (c.n1, c.n2) == sizes and c.deltas == deltas:
                return c
        raise KeyError((sizes, deltas))

    def header(self) -> list:
        return (["scenario", "n1", "n2"] + [f"delta{j}" for j in range(1, self.k + 1)]
                + ["state", "rate", "se", "n_sim"])

    def rows(self):
        for c in self.cells:
            prefix = [self.scenario, c.n1, c.n2] + [repr(d) for d in c.deltas]
            labels = [str(j) for j in range(1, self.k + 1)] + ["global"]
            rates = list(c.state_rates) + [c.global_rate]
            for label, rate in zip(labels, rates):
                yield prefix + [label, f"{rate:.6f}",
                                f"{CellResult.std_error(rate, c.n_sim):.6f}", c.n_sim]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        writer.writerows(self.rows())
        return buf.getvalue()


def builtin_scenarios() -> list[ScenarioSpec]:
    """The four study scenarios (90-day window, six sample-size pairs)."""
    s1_a1, s1_a2 = (0.001, 0.0011, 0.0004), (0.0008, 0.0017, 0.0009)
    power3 = ((0.001, 0.001, 0.001), (0.001, 0.0015, 0.001), (0.0015, 0.0015, 0.0015))
    power2 = ((0.001, 0.001), (0.001, 0.0015), (0.0015, 0.0015))
    return [
        ScenarioSpec("scenario1", s1_a1, s1_a2,
                     delta_grid=((0.00015, 0.0002, 0.0002), (0.0002, 0.0006, 0.0005)) + power3),
        ScenarioSpec("scenario2", (0.001, 0.0004), (0.0008, 0.0009),
                     delta_grid=((0.0002, 0.0005),) + power2),
        ScenarioSpec("scenario3", (0.001, 0.0011), (0.0008, 0.0017),
                     delta_grid=((0.0002, 0.0006),) + power2),
        ScenarioSpec("scenario4", s1_a1, s1_a1, delta_grid=power3),
    ]


def get_scenario(name: str) -> ScenarioSpec:
    name = name.removeprefix("builtin:")
    for spec in builtin_scenarios():
        if spec.name == name:
            return spec
    raise KeyError(f"unknown scenario {name!r}")


def _repetitions(spec: ScenarioSpec, i: int, j: int, reps: range, master_seed: int):
    """Rejection indicators, one row per repetition: states ``1..k`` then global."""
    n1, n2 = spec.sample_sizes[i]
    deltas = spec.delta_grid[j]
    key = name_key(spec.name)
    out = np.zeros((len(reps), spec.k + 1), dtype=bool)
    for row, r in enumerate(reps):
        rng = substream(master_seed, key, i, j, r)
        g1 = simulate_group(spec.alpha1, n1, spec.tau, rng, group_label=1)
        g2 = simulate_group(spec.alpha2, n2, spec.tau, rng, group_label=2)
        config = TestConfig(deltas, spec.n_boot, spec.level,
                            derive_seed(master_seed, key, i, j, r), spec.censoring_mode)
        result = run_similarity_test(g1, g2, config)
        out[row, :-1] = result.per_state_reject
        out[row, -1] = result.global_reject
    return out


def _tasks(spec, cells, master_seed):
    for i, j in cells:
        for start in range(0, spec.n_sim, _CHUNK):
            yield spec, i, j, range(start, min(start + _CHUNK, spec.n_sim)), master_seed


def _run(args):
    return _repetitions(*args)


def _run_cells(spec: ScenarioSpec, cells: Sequence[tuple], master_seed: int,
               workers: int) -> list[CellResult]:
    tasks = list(_tasks(spec, cells, master_seed))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run, tasks))
    else:
        chunks = [_run(t) for t in tasks]
    per_cell = math.ceil(spec.n_sim / _CHUNK)
    results = []
    for c, (i, j) in enumerate(cells):
        hits = np.concatenate(chunks[c * per_cell:(c + 1) * per_cell])
        rates = hits.mean(axis=0)
        n1, n2 = spec.sample_sizes[i]
        results.append(CellResult(n1, n2, spec.delta_grid[j], float(rates[-1]),
                                  tuple(float(x) for x in rates[:-1]), spec.n_sim))
    return results


def _index(items, value, what):
    value = tuple(value)
    for idx, item in enumerate(items):
        if len(item) == len(value) and all(math.isclose(a, b, rel_tol=1e-12)
                                           for a, b in zip(item, value)):
            return idx
    raise KeyError(f"{what} {value} not in scenario")


def run_cell(spec: ScenarioSpec, sizes, deltas, master_seed: int = 0,
             workers: int = 1) -> CellResult:
    """Simulate one (sample sizes, thresholds) cell of ``spec``.

    Gives exactly the cell that :func:`run_scenario` would report.
    """
    i = _index(spec.sample_sizes, sizes, "sample size")
    j = _index(spec.delta_grid, deltas, "threshold vector")
    return _run_cells(spec, [(i, j)], master_seed, workers)[0]


def run_scenario(spec: ScenarioSpec, master_seed: int = 0, workers: int = 1,
                 sample_sizes: Optional[Sequence] = None,
                 delta_grid: Optional[Sequence] = None) -> SimulationReport:
    """Rejection rates for every cell (or the requested subset) of ``spec``."""
    rows = (range(len(spec.sample_sizes)) if sample_sizes is None
            else [_index(spec.sample_sizes, s, "sample size") for s in sample_sizes])
    cols = (range(len(spec.delta_grid)) if delta_grid is None
            else [_index(spec.delta_grid, d, "threshold vector") for d in delta_grid])
    cells = [(i, j) for i in rows for j in cols]
    return SimulationReport(spec.name, spec.k, _run_cells(spec, cells, master_seed, workers))


def rejection_curve(spec: ScenarioSpec, axis: str, fixed, master_seed: int = 0,
                    workers: int = 1) -> list[dict]:
    """Rejection rates along one design axis with the other held fixed.

    ``axis="sample_size"`` varies the sample sizes at the threshold vector
    ``fixed``; ``axis="delta"`` varies the thresholds at sample sizes
    ``fixed``. Each row has ``x``, ``global``, ``states`` and their
    standard errors.
    """
    if axis == "sample_size":
        report = run_scenario(spec, master_seed, workers, delta_grid=[fixed])
        xs = [(c.n1, c.n2) for c in report.cells]
    elif axis == "delta":
        report = run_scenario(spec, master_seed, workers, sample_sizes=[fixed])
        xs = [c.deltas for c in report.cells]
    else:
        raise ValueError(f"axis must be 'sample_size' or 'delta', not {axis!r}")
    return [
        {"x": x, "global": c.global_rate, "global_se": c.global_se,
         "states": c.state_rates, "states_se": c.state_se}
        for x, c in zip(xs, report.cells)
    ]
