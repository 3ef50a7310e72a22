"""Reproducible experiment suites.

Each suite runs a roster of algorithms over seeded scenarios and records
per-(run, step, algorithm) values of the comparison criteria:

1. weighted-average task utility  sum_i Q_i f_i(S)
2. worst-task utility             min_i f_i(S)
3. local worst-case utility       sum_i P*_i f_i(S)
4. solver wall time (seconds)
5. mean utility of the run's two highest-weight tasks (swp suite)
6. cumulative distinct-element count (online suite)

Criteria 1-3 and 5-6 are deterministic given the config and go to
`<suite>_<algorithm>.csv`; wall time is inherently noisy and goes to a
separate `<suite>_<algorithm>_timing.csv` so the primary CSVs are
byte-identical across re-runs. Selections land in
`<suite>_selections.csv` and per-run seeds/weights in `<suite>_runs.csv`.

Seed ladder: run r of an R-run suite uses base_seed + r for everything,
so it reproduces exactly the run-0 results of a one-run suite seeded
with base_seed + r.
"""

import csv
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .bitset import iter_bits, popcount
from .errors import ConfigError, ContractError, DomainError, FormatError, IoError
from .imgsum import distance_matrix, facility_tasks, load_embeddings, synthetic_embeddings
from .objective import AggregateMode, TaskFamily, aggregate_oracle, weighted_average
from .satsim import ScenarioConfig, SensingScenario, WalkerDelta
from .simplex import SimplexDistribution, local_worst_case, make_distribution
from .solvers import (SaturationConfig, online_tr_driver, saturate_with_preference,
                      ssa, stochastic_greedy)

SUITES = ("satsel", "swp", "online", "imgsum")

CRITERION_WEIGHTED_AVG = 1
CRITERION_WORST_CASE = 2
CRITERION_LOCAL_WORST = 3
CRITERION_WALL_TIME = 4
CRITERION_TOP2 = 5
CRITERION_DISTINCT = 6


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class SolverSettings:
    k: int = 10
    lam: float = 0.1
    epsilon: float = 0.1
    sample_size: int | None = 24
    alpha: float = 1.0
    gamma: float = 0.9
    t_w: int = 5

    def validate(self):
        if self.k < 1:
            raise ConfigError(f"solver.k must be >= 1, got {self.k}")
        if self.lam < 0.0 or not math.isfinite(self.lam):
            raise ConfigError(f"solver.lam must be finite and >= 0, got {self.lam!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"solver.epsilon must lie in (0, 1), got {self.epsilon!r}")
        if self.sample_size is not None and self.sample_size < 1:
            raise ConfigError(f"solver.sample_size must be >= 1, got {self.sample_size}")
        if self.alpha < 1.0:
            raise ConfigError(f"solver.alpha must be >= 1, got {self.alpha!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"solver.gamma must lie in [0, 1], got {self.gamma!r}")
        if self.t_w < 1:
            raise ConfigError(f"solver.t_w must be >= 1, got {self.t_w}")


@dataclass
class ConstellationSettings:
    total_sats: int = 240
    planes: int = 12
    phasing: int = 1
    inclination_deg: float = 75.0
    semi_major_axis_km: float = 8378.1
    fov_half_angle_deg: float = 30.0

    def to_walker(self) -> WalkerDelta:
        try:
            return WalkerDelta(math.radians(self.inclination_deg), self.total_sats,
                               self.planes, self.phasing, self.semi_major_axis_km,
                               math.radians(self.fov_half_angle_deg))
        except Exception as exc:
            raise ConfigError(f"invalid constellation: {exc}") from exc


@dataclass
class ScenarioSettings:
    constellation: ConstellationSettings = field(default_factory=ConstellationSettings)
    steps: int = 25
    step_seconds: float = 60.0
    n_reading_tasks: int = 5
    points_per_task: int = 5
    measurement_var: float = 1.0
    process_var: float = 0.01
    include_coverage: bool = True
    image_count: int = 819
    image_dim: int = 64
    embeddings_path: str | None = None
    k_values: list[int] = field(default_factory=lambda: list(range(2, 13)))

    def validate(self):
        if self.steps < 1:
            raise ConfigError(f"scenario.steps must be >= 1, got {self.steps}")
        if self.step_seconds <= 0.0:
            raise ConfigError("scenario.step_seconds must be positive")
        if self.n_reading_tasks < 1 or self.points_per_task < 1:
            raise ConfigError("scenario needs >= 1 reading task and >= 1 point per task")
        if self.measurement_var <= 0.0 or self.process_var < 0.0:
            raise ConfigError("scenario noise variances out of range")
        if self.image_count < 2 or self.image_dim < 1:
            raise ConfigError("scenario.image_count must be >= 2 and image_dim >= 1")
        if not self.k_values or any((not isinstance(k, int)) or k < 1 for k in self.k_values):
            raise ConfigError("scenario.k_values must be a nonempty list of positive integers")


@dataclass
class ExperimentConfig:
    suite: str
    runs: int = 15
    seed: int = 0
    output_dir: str = "results"
    solver: SolverSettings = field(default_factory=SolverSettings)
    scenario: ScenarioSettings = field(default_factory=ScenarioSettings)

    def validate(self):
        if self.suite == "verify":
            raise ConfigError("the verify suite runs the property battery and takes no "
                              "experiment config; invoke it as `robust-submod verify`")
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}, expected one of {SUITES}")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        self.solver.validate()
        self.scenario.validate()


_NESTED = {
    "solver": SolverSettings,
    "scenario": ScenarioSettings,
    "constellation": ConstellationSettings,
}


def _dataclass_from_dict(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if f.name in _NESTED:
            value = _dataclass_from_dict(_NESTED[f.name], value, f"{where}.{f.name}")
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    config = _dataclass_from_dict(ExperimentConfig, data, "config")
    if "suite" not in data:
        raise ConfigError("config: missing required key 'suite'")
    config.validate()
    return config


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def default_config(suite: str) -> ExperimentConfig:
    config = ExperimentConfig(suite=suite)
    if suite == "imgsum":
        config.solver.sample_size = None
    config.validate()
    return config


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentRecord:
    run: int
    step: int
    algorithm: str
    criterion: int
    value: float


@dataclass(frozen=True)
class SelectionRecord:
    run: int
    step: int
    algorithm: str
    indices: tuple[int, ...]


@dataclass
class ExperimentResult:
    suite: str
    records: list[ExperimentRecord]
    timing: list[ExperimentRecord]
    selections: list[SelectionRecord]
    run_seeds: list[tuple[int, int, SimplexDistribution]]
    paths: list[str] = field(default_factory=list)


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def evaluate_criteria(family: TaskFamily, q: SimplexDistribution, lam: float,
                      selection: int, elapsed: float = 0.0):
    """Comparison criteria of a selection: (weighted avg, min, local worst case, elapsed).

    The third value reweights the task utilities by the local worst-case
    distribution, so min <= local-worst-case <= weighted-average always
    holds. lam = 0 is reported at its continuous limit (point mass on
    the worst task).
    """
    f1, f2, f3, _ = _criteria(family, q, lam, selection)
    return f1, f2, f3, float(elapsed)


def _criteria(family: TaskFamily, q: SimplexDistribution, lam: float, mask: int):
    vals = family.values(mask)
    f1 = weighted_average(vals, q)
    f2 = float(vals.min())
    p_star = local_worst_case(vals, q, max(lam, 1e-12))
    f3 = float(np.dot(p_star.weights, vals))
    return f1, f2, f3, vals


def _emit(out, run, step, label, crits: dict[int, float]):
    for crit in sorted(crits):
        out.append(ExperimentRecord(run, step, label, crit, float(crits[crit])))


# ---------------------------------------------------------------------------
# suite runners
# ---------------------------------------------------------------------------

def _satellite_scenario(config: ExperimentConfig, seed_run: int) -> SensingScenario:
    sc = config.scenario
    return SensingScenario(ScenarioConfig(
        walker=sc.constellation.to_walker(),
        n_reading_tasks=sc.n_reading_tasks,
        points_per_task=sc.points_per_task,
        step_seconds=sc.step_seconds,
        measurement_var=sc.measurement_var,
        process_var=sc.process_var,
        include_coverage=sc.include_coverage,
        seed=_derive_seed(seed_run, 13),
    ))


def _run_q(config: ExperimentConfig, seed_run: int, n_tasks: int) -> SimplexDistribution:
    rng = np.random.default_rng([seed_run, 11])
    return make_distribution(rng.dirichlet(np.ones(n_tasks)))


def _run_satsel(config: ExperimentConfig) -> ExperimentResult:
    sv = config.solver
    result = ExperimentResult(config.suite, [], [], [], [])
    for run in range(config.runs):
        seed_run = config.seed + run
        scen = _satellite_scenario(config, seed_run)
        q = _run_q(config, seed_run, scen.config.n_tasks)
        result.run_seeds.append((run, seed_run, q))
        n = scen.config.walker.total_sats
        for step in range(config.scenario.steps):
            family = scen.advance().family
            roster = (
                ("Local", lambda s: stochastic_greedy(
                    aggregate_oracle(family, AggregateMode.KL_ROBUST, q, sv.lam),
                    n, sv.k, epsilon=sv.epsilon, sample_size=sv.sample_size, seed=s)),
                ("Saturate", lambda s: ssa(family, sv.k, alpha=sv.alpha)),
                ("Reference", lambda s: stochastic_greedy(
                    aggregate_oracle(family, AggregateMode.WEIGHTED_AVG, q),
                    n, sv.k, epsilon=sv.epsilon, sample_size=sv.sample_size, seed=s)),
            )
            for alg_idx, (label, solve) in enumerate(roster):
                res = solve(_derive_seed(seed_run, 17, step, alg_idx))
                f1, f2, f3, _ = _criteria(family, q, sv.lam, res.selection)
                _emit(result.records, run, step, label, {1: f1, 2: f2, 3: f3})
                result.timing.append(ExperimentRecord(run, step, label, CRITERION_WALL_TIME, res.wall_time))
                result.selections.append(SelectionRecord(run, step, label, res.indices))
    return result


def _run_swp(config: ExperimentConfig) -> ExperimentResult:
    sv = config.solver
    result = ExperimentResult(config.suite, [], [], [], [])
    for run in range(config.runs):
        seed_run = config.seed + run
        scen = _satellite_scenario(config, seed_run)
        q = _run_q(config, seed_run, scen.config.n_tasks)
        result.run_seeds.append((run, seed_run, q))
        top2 = np.argsort(q.weights)[-2:]
        for step in range(config.scenario.steps):
            family = scen.advance().family
            roster = (
                ("SwP", lambda: saturate_with_preference(
                    family, sv.k, SaturationConfig(lam=sv.lam, weights=q, alpha=sv.alpha))),
                ("SSA", lambda: ssa(family, sv.k, alpha=sv.alpha)),
            )
            for label, solve in roster:
                res = solve()
                f1, f2, f3, vals = _criteria(family, q, sv.lam, res.selection)
                top2_mean = float(vals[top2].mean())
                _emit(result.records, run, step, label, {1: f1, 2: f2, 3: f3, 5: top2_mean})
                result.timing.append(ExperimentRecord(run, step, label, CRITERION_WALL_TIME, res.wall_time))
                result.selections.append(SelectionRecord(run, step, label, res.indices))
    return result


def _run_online(config: ExperimentConfig) -> ExperimentResult:
    sv = config.solver
    result = ExperimentResult(config.suite, [], [], [], [])
    for run in range(config.runs):
        seed_run = config.seed + run
        scen = _satellite_scenario(config, seed_run)
        q = _run_q(config, seed_run, scen.config.n_tasks)
        result.run_seeds.append((run, seed_run, q))
        n = scen.config.walker.total_sats
        families = [scen.advance().family for _ in range(config.scenario.steps)]
        objectives = [aggregate_oracle(f, AggregateMode.WEIGHTED_AVG, q) for f in families]

        tr_records = online_tr_driver(objectives, n, sv.k, sv.t_w, sv.gamma, sv.lam,
                                      epsilon=sv.epsilon, sample_size=sv.sample_size,
                                      seed=_derive_seed(seed_run, 23))
        for rec in tr_records:
            family = families[rec.step]
            f1, f2, f3, _ = _criteria(family, q, sv.lam, rec.selection)
            _emit(result.records, run, rec.step, "TR",
                  {1: f1, 2: f2, 3: f3, 6: float(rec.distinct_count)})
            result.timing.append(ExperimentRecord(run, rec.step, "TR", CRITERION_WALL_TIME, rec.solve_time))
            result.selections.append(SelectionRecord(run, rec.step, "TR",
                                                     tuple(iter_bits(rec.selection))))

        union = 0
        for step in range(config.scenario.steps):
            res = stochastic_greedy(objectives[step], n, sv.k, epsilon=sv.epsilon,
                                    sample_size=sv.sample_size,
                                    seed=_derive_seed(seed_run, 29, step))
            union |= res.selection
            family = families[step]
            f1, f2, f3, _ = _criteria(family, q, sv.lam, res.selection)
            _emit(result.records, run, step, "Regular",
                  {1: f1, 2: f2, 3: f3, 6: float(popcount(union))})
            result.timing.append(ExperimentRecord(run, step, "Regular", CRITERION_WALL_TIME, res.wall_time))
            result.selections.append(SelectionRecord(run, step, "Regular", res.indices))
    return result


def _run_imgsum(config: ExperimentConfig) -> ExperimentResult:
    sv = config.solver
    sc = config.scenario
    result = ExperimentResult(config.suite, [], [], [], [])
    for run in range(config.runs):
        seed_run = config.seed + run
        if sc.embeddings_path is not None:
            emb = load_embeddings(sc.embeddings_path)
        else:
            emb = synthetic_embeddings(sc.image_count, sc.image_dim,
                                       seed=_derive_seed(seed_run, 19))
        family = facility_tasks(distance_matrix(emb))
        n = family.n_ground
        q = make_distribution(np.ones(family.n_tasks))
        result.run_seeds.append((run, seed_run, q))
        for step, k in enumerate(sc.k_values):
            if k > n:
                raise ConfigError(f"scenario.k_values contains {k} > ground set size {n}")
            roster = (
                ("Local", lambda s: stochastic_greedy(
                    aggregate_oracle(family, AggregateMode.KL_ROBUST, q, sv.lam),
                    n, k, epsilon=sv.epsilon, sample_size=sv.sample_size, seed=s)),
                ("Saturate", lambda s: ssa(family, k, alpha=sv.alpha)),
            )
            for alg_idx, (label, solve) in enumerate(roster):
                res = solve(_derive_seed(seed_run, 17, k, alg_idx))
                f1, f2, f3, _ = _criteria(family, q, sv.lam, res.selection)
                _emit(result.records, run, k, label, {1: f1, 2: f2, 3: f3})
                result.timing.append(ExperimentRecord(run, k, label, CRITERION_WALL_TIME, res.wall_time))
                result.selections.append(SelectionRecord(run, k, label, res.indices))
    return result


_RUNNERS = {
    "satsel": _run_satsel,
    "swp": _run_swp,
    "online": _run_online,
    "imgsum": _run_imgsum,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _check_criteria_ordering(records: list[ExperimentRecord]):
    """Criterion 2 <= 3 <= 1 must hold for every (run, step, algorithm)."""
    grouped: dict[tuple, dict[int, float]] = {}
    for rec in records:
        grouped.setdefault((rec.run, rec.step, rec.algorithm), {})[rec.criterion] = rec.value
    for key, crits in grouped.items():
        if {1, 2, 3} <= set(crits):
            f1, f2, f3 = crits[1], crits[2], crits[3]
            if not (f2 <= f3 + 1e-9 and f3 <= f1 + 1e-9):
                raise ContractError(
                    f"criteria ordering violated at (run, step, algorithm) = {key}: "
                    f"min = {f2!r}, local worst = {f3!r}, average = {f1!r}")


def _write_csv(path: Path, header: list[str], rows: list[list[str]]):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _record_rows(records: list[ExperimentRecord]) -> list[list[str]]:
    ordered = sorted(records, key=lambda r: (r.run, r.step, r.algorithm, r.criterion))
    return [[str(r.run), str(r.step), r.algorithm, str(r.criterion), f"{r.value:.17g}"]
            for r in ordered]


_RECORD_HEADER = ["run", "step", "algorithm", "criterion", "value"]


def write_csv(records, path):
    """Write experiment records to one CSV file.

    Header `run,step,algorithm,criterion,value`; rows sorted by
    (run, step, algorithm, criterion); values at 17 significant digits
    so a parse-back reproduces them exactly.
    """
    records = list(records)
    if not records:
        raise DomainError("refusing to write an empty record CSV")
    _write_csv(Path(path), _RECORD_HEADER, _record_rows(records))


def read_csv(path) -> list[ExperimentRecord]:
    """Parse a record CSV written by write_csv back into records."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != _RECORD_HEADER:
        raise FormatError(f"{path}: expected header {','.join(_RECORD_HEADER)}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 5:
            raise FormatError(f"{path}: line {lineno}: expected 5 fields, got {len(row)}")
        try:
            records.append(ExperimentRecord(int(row[0]), int(row[1]), row[2],
                                            int(row[3]), float(row[4])))
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    return records


def write_result(result: ExperimentResult, output_dir) -> list[str]:
    """Write all CSV artifacts of a suite run; returns the paths written."""
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc
    paths = []
    labels = sorted({r.algorithm for r in result.records})
    for label in labels:
        main = [r for r in result.records if r.algorithm == label]
        path = out / f"{result.suite}_{label.lower()}.csv"
        write_csv(main, path)
        paths.append(str(path))
        timing = [r for r in result.timing if r.algorithm == label]
        tpath = out / f"{result.suite}_{label.lower()}_timing.csv"
        write_csv(timing, tpath)
        paths.append(str(tpath))
    sel_rows = [[str(s.run), str(s.step), s.algorithm, ";".join(str(i) for i in s.indices)]
                for s in sorted(result.selections, key=lambda s: (s.run, s.step, s.algorithm))]
    sel_path = out / f"{result.suite}_selections.csv"
    _write_csv(sel_path, ["run", "step", "algorithm", "selection"], sel_rows)
    paths.append(str(sel_path))
    meta_rows = [[str(run), str(seed), ";".join(f"{w:.17g}" for w in q.weights)]
                 for run, seed, q in result.run_seeds]
    meta_path = out / f"{result.suite}_runs.csv"
    _write_csv(meta_path, ["run", "seed", "weights"], meta_rows)
    paths.append(str(meta_path))
    return paths


def run_suite(config: ExperimentConfig, output_dir=None, write: bool = True) -> ExperimentResult:
    """Run one experiment suite; writes CSVs unless write=False.

    Raises ContractError if the recorded criteria violate the ordering
    min <= local-worst-case <= weighted-average anywhere.
    """
    config.validate()
    result = _RUNNERS[config.suite](config)
    _check_criteria_ordering(result.records)
    if write:
        result.paths = write_result(result, output_dir or config.output_dir)
    return result
