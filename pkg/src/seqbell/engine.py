"""Monte Carlo run engine: pairs of immediately consecutive measurements.

A run draws an ordered pair of settings, each uniform over {A, B, C}, and
performs two back-to-back measurements on one system under either the
quantum model or the deterministic joint-reality model.  Outcomes land in
a 9 x 4 count table; for the hidden-variable model the joint reality in
force between the two measurements is also tallied per run.

Ensembles are generated in fixed-size chunks.  Chunk i of series s uses an
RNG stream derived from (seed, s, i), chunk tables merge by addition, and
chunk arrays concatenate in index order, so results are bit-identical for
any worker count.  The per-chunk samplers are fully vectorized; the scalar
run functions exist as the reference semantics and for unit-level checks.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator

import numpy as np

from .lhv import (
    Disturbance,
    HiddenCountTable,
    HiddenTriple,
    Setting,
    SETTINGS,
    TRIPLE_COMPONENTS,
    TripleDistribution,
    apply_disturbance,
    lhv_read,
    sample_triple,
    sample_triple_indices,
)
from .qubit import (
    Direction,
    Outcome,
    PureState,
    bloch_vector,
    measure,
    state_from_bloch,
)


class ConfigError(ValueError):
    """Raised for invalid protocol or experiment configuration."""


class Mode(str, Enum):
    FREE = "free"
    TWO_SERIES = "two-series"
    PREPARED = "prepared"


class Model(str, Enum):
    QUANTUM = "quantum"
    LHV = "lhv"


DEFAULT_CHUNK_SIZE = 65536

_SIGN_TO_IDX = {1: 0, -1: 1}
_IDX_TO_SIGN = (1, -1)


@dataclass(frozen=True)
class RunRecord:
    """One two-measurement run, optionally tagged with its preparation."""

    run_id: int
    first_setting: Setting
    second_setting: Setting
    first_outcome: Outcome
    second_outcome: Outcome
    prep: tuple[Setting, Outcome] | None = None


@dataclass(frozen=True)
class RunCountTable:
    """Observed run counts N[x^a y^b], indexed (first setting, second
    setting, first outcome, second outcome) with outcome index 0 = +1."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (3, 3, 2, 2):
            raise ValueError(f"expected counts of shape (3,3,2,2), got {c.shape}")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def zero(cls) -> "RunCountTable":
        return cls(np.zeros((3, 3, 2, 2), dtype=np.int64))

    @property
    def total_runs(self) -> int:
        return int(self.counts.sum())

    def count(self, x: Setting, sign_x: Outcome, y: Setting, sign_y: Outcome) -> int:
        return int(
            self.counts[Setting(x), Setting(y), _SIGN_TO_IDX[int(sign_x)], _SIGN_TO_IDX[int(sign_y)]]
        )

    def pair_total(self, x: Setting, y: Setting) -> int:
        return int(self.counts[Setting(x), Setting(y)].sum())

    def __add__(self, other: "RunCountTable") -> "RunCountTable":
        return RunCountTable(self.counts + other.counts)

    def same_setting_totals(self) -> tuple[int, int]:
        """(number of same-setting runs, number of those with equal outcomes)."""
        same = sum(self.pair_total(s, s) for s in SETTINGS)
        agree = sum(
            int(self.counts[s, s, 0, 0] + self.counts[s, s, 1, 1]) for s in SETTINGS
        )
        return same, agree

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["pair_first", "pair_second", "outcome_first", "outcome_second", "count"])
        for x in SETTINGS:
            for y in SETTINGS:
                for i in (0, 1):
                    for j in (0, 1):
                        writer.writerow(
                            [
                                x.name,
                                y.name,
                                f"{_IDX_TO_SIGN[i]:+d}",
                                f"{_IDX_TO_SIGN[j]:+d}",
                                int(self.counts[x, y, i, j]),
                            ]
                        )
        return buf.getvalue()


@dataclass(frozen=True)
class PairProbability:
    """Estimate of P(x^a, y^b) conditional on the ordered setting pair."""

    estimate: float
    stderr: float
    n_conditioning: int
    n_cell: int = 0

    @property
    def defined(self) -> bool:
        return self.n_conditioning > 0

    @property
    def low_stats(self) -> bool:
        return self.defined and self.n_cell < 10


UNDEFINED_PAIR_PROB = PairProbability(estimate=math.nan, stderr=math.nan, n_conditioning=0)


@dataclass(frozen=True)
class ExpectationEstimate:
    """Estimate of E(x, y) from the four outcome-pair probabilities."""

    value: float
    stderr: float
    n_conditioning: int
    low_stats: bool = False

    @property
    def defined(self) -> bool:
        return self.n_conditioning > 0


UNDEFINED_EXPECTATION = ExpectationEstimate(value=math.nan, stderr=math.nan, n_conditioning=0)


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything one ensemble needs: model, protocol, directions, seeding."""

    mode: Mode
    model: Model
    directions: tuple[Direction, Direction, Direction]
    n_runs: int
    seed: int
    state: PureState | None = None
    dist: TripleDistribution | None = None
    prep_setting: Setting = Setting.A
    prep_sign: Outcome = Outcome.PLUS
    disturbance: Disturbance = Disturbance.NONE
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def validate(self) -> None:
        if len(self.directions) != 3 or not all(isinstance(d, Direction) for d in self.directions):
            raise ConfigError("directions must be three unit vectors (a, b, c)")
        if self.n_runs < 1:
            raise ConfigError(f"n_runs must be >= 1, got {self.n_runs}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a non-negative 64-bit integer, got {self.seed}")
        if self.chunk_size < 1:
            raise ConfigError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if self.model is Model.QUANTUM and self.state is None:
            raise ConfigError("quantum model requires an initial state")
        if self.model is Model.LHV and self.dist is None:
            raise ConfigError("lhv model requires a triple distribution")
        if self.model is Model.LHV and self.mode is Mode.PREPARED:
            # fail before any work if the preparation has no support
            try:
                self.dist.condition(self.prep_setting, self.prep_sign)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    def direction(self, setting: Setting) -> Direction:
        return self.directions[Setting(setting)]


# ---------------------------------------------------------------------------
# scalar reference semantics


def draw_setting_pair(rng: np.random.Generator) -> tuple[Setting, Setting]:
    """Ordered setting pair, both entries independent and uniform over A, B, C."""
    return Setting(int(rng.integers(0, 3))), Setting(int(rng.integers(0, 3)))


def execute_run_quantum(
    state: PureState,
    pair: tuple[Setting, Setting],
    directions: tuple[Direction, Direction, Direction],
    rng: np.random.Generator,
    run_id: int = 0,
) -> RunRecord:
    """Two immediately consecutive measurements starting from the given state."""
    first, second = pair
    o1, collapsed = measure(state, directions[Setting(first)], rng)
    o2, _ = measure(collapsed, directions[Setting(second)], rng)
    return RunRecord(run_id, Setting(first), Setting(second), o1, o2)


def execute_run_lhv(
    dist: TripleDistribution,
    pair: tuple[Setting, Setting],
    disturbance: Disturbance,
    rng: np.random.Generator,
    run_id: int = 0,
) -> tuple[RunRecord, HiddenTriple]:
    """One deterministic-readout run; returns the record and the joint
    reality in force between its two measurements.

    Any disturbance acts strictly after the second measurement, so it can
    never touch the returned record or triple.
    """
    first, second = Setting(pair[0]), Setting(pair[1])
    triple = sample_triple(dist, rng)
    record = RunRecord(run_id, first, second, lhv_read(triple, first), lhv_read(triple, second))
    apply_disturbance(triple, (first, second), disturbance, dist, rng)
    return record, triple


def prepared_run(config: ProtocolConfig, rng: np.random.Generator, run_id: int = 0) -> RunRecord:
    """One run of the prepared protocol: set the preparation eigenstate
    (quantum) or condition the reality ensemble on the preparation outcome
    (lhv), then execute a standard run with a freshly drawn setting pair."""
    pair = draw_setting_pair(rng)
    prep = (config.prep_setting, config.prep_sign)
    if config.model is Model.QUANTUM:
        state0 = state_from_bloch(
            int(config.prep_sign) * config.direction(config.prep_setting).as_array()
        )
        record = execute_run_quantum(state0, pair, config.directions, rng, run_id)
    else:
        conditioned = config.dist.condition(config.prep_setting, config.prep_sign)
        record, _ = execute_run_lhv(conditioned, pair, config.disturbance, rng, run_id)
    return replace(record, prep=prep)


# ---------------------------------------------------------------------------
# vectorized chunk core


def _chunk_rng(seed: int, series: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(series, chunk_index)))


def _effective_bloch(config: ProtocolConfig) -> np.ndarray:
    if config.mode is Mode.PREPARED:
        return int(config.prep_sign) * config.direction(config.prep_setting).as_array()
    return bloch_vector(config.state)


def _effective_dist(config: ProtocolConfig) -> TripleDistribution:
    if config.mode is Mode.PREPARED:
        return config.dist.condition(config.prep_setting, config.prep_sign)
    return config.dist


def _quantum_chunk(config: ProtocolConfig, n: int, rng: np.random.Generator):
    dirs = np.array([d.as_array() for d in config.directions])
    gram = dirs @ dirs.T
    bloch0 = _effective_bloch(config)
    first = rng.integers(0, 3, size=n)
    second = rng.integers(0, 3, size=n)
    p_first = 0.5 * (1.0 + (dirs @ bloch0)[first])
    o1 = np.where(rng.random(n) < p_first, 1, -1).astype(np.int8)
    p_second = 0.5 * (1.0 + o1 * gram[first, second])
    o2 = np.where(rng.random(n) < p_second, 1, -1).astype(np.int8)
    return first.astype(np.int8), second.astype(np.int8), o1, o2, None


def _lhv_chunk(config: ProtocolConfig, n: int, rng: np.random.Generator):
    dist = _effective_dist(config)
    triples = sample_triple_indices(dist, n, rng)
    first = rng.integers(0, 3, size=n)
    second = rng.integers(0, 3, size=n)
    o1 = TRIPLE_COMPONENTS[triples, first]
    o2 = TRIPLE_COMPONENTS[triples, second]
    if config.disturbance is Disturbance.RESAMPLE:
        # post-run realities: drawn, never read (see apply_disturbance)
        sample_triple_indices(dist, n, rng)
    return first.astype(np.int8), second.astype(np.int8), o1, o2, triples


def _run_chunk(args):
    config, series, chunk_index, size = args
    rng = _chunk_rng(config.seed, series, chunk_index)
    if config.model is Model.QUANTUM:
        first, second, o1, o2, triples = _quantum_chunk(config, size, rng)
    else:
        first, second, o1, o2, triples = _lhv_chunk(config, size, rng)
    cell = (
        (first.astype(np.int64) * 3 + second) * 4
        + (o1 < 0).astype(np.int64) * 2
        + (o2 < 0)
    )
    counts = np.bincount(cell, minlength=36).reshape(3, 3, 2, 2)
    hidden = None if triples is None else np.bincount(triples, minlength=8)
    return chunk_index, counts, hidden, (first, second, o1, o2, triples)


@dataclass
class EnsembleResult:
    """Counts plus compact per-run arrays for one generated ensemble."""

    config: ProtocolConfig
    table: RunCountTable
    hidden: HiddenCountTable | None
    first_settings: np.ndarray
    second_settings: np.ndarray
    first_outcomes: np.ndarray
    second_outcomes: np.ndarray
    triple_indices: np.ndarray | None = None
    series: int = 0

    @property
    def n_runs(self) -> int:
        return len(self.first_settings)

    def records(self) -> Iterator[RunRecord]:
        """Materialize per-run records in generation order."""
        prep = (
            (self.config.prep_setting, self.config.prep_sign)
            if self.config.mode is Mode.PREPARED
            else None
        )
        for i in range(self.n_runs):
            yield RunRecord(
                run_id=i,
                first_setting=Setting(int(self.first_settings[i])),
                second_setting=Setting(int(self.second_settings[i])),
                first_outcome=Outcome(int(self.first_outcomes[i])),
                second_outcome=Outcome(int(self.second_outcomes[i])),
                prep=prep,
            )


def _chunk_plan(n_runs: int, chunk_size: int) -> list[int]:
    full, rest = divmod(n_runs, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def _generate_series(config: ProtocolConfig, series: int, workers: int) -> EnsembleResult:
    sizes = _chunk_plan(config.n_runs, config.chunk_size)
    args = [(config, series, i, size) for i, size in enumerate(sizes)]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_chunk, args, chunksize=1))
    else:
        outputs = [_run_chunk(a) for a in args]
    outputs.sort(key=lambda item: item[0])

    counts = np.zeros((3, 3, 2, 2), dtype=np.int64)
    hidden = np.zeros(8, dtype=np.int64) if config.model is Model.LHV else None
    for _, chunk_counts, chunk_hidden, _arrays in outputs:
        counts += chunk_counts
        if hidden is not None:
            hidden += chunk_hidden
    arrays = [out[3] for out in outputs]

    def concat(k):
        return np.concatenate([a[k] for a in arrays])

    return EnsembleResult(
        config=config,
        table=RunCountTable(counts),
        hidden=None if hidden is None else HiddenCountTable(hidden),
        first_settings=concat(0),
        second_settings=concat(1),
        first_outcomes=concat(2),
        second_outcomes=concat(3),
        triple_indices=concat(4) if config.model is Model.LHV else None,
        series=series,
    )


def run_ensemble(config: ProtocolConfig, workers: int = 1) -> EnsembleResult:
    """Generate the configured number of runs (free or prepared mode).

    Deterministic for a fixed (config, seed, chunk_size) regardless of the
    worker count.
    """
    config.validate()
    if config.mode is Mode.TWO_SERIES:
        raise ConfigError("two-series mode is generated by run_two_series")
    return _generate_series(config, series=0, workers=workers)


def run_two_series(config: ProtocolConfig, workers: int = 1) -> tuple[EnsembleResult, EnsembleResult]:
    """Generate the two independent run series of the two-series strategy.

    Each series has config.n_runs runs.  Series 0 is read through its
    first-outcome +1 runs, series 1 through its -1 runs; the unused runs
    stay in the denominators as discarded.
    """
    config.validate()
    if config.mode is not Mode.TWO_SERIES:
        raise ConfigError("run_two_series requires mode = two-series")
    plus = _generate_series(config, series=0, workers=workers)
    minus = _generate_series(config, series=1, workers=workers)
    return plus, minus


# ---------------------------------------------------------------------------
# estimation


def estimate_pair_prob(
    table: RunCountTable, x: Setting, sign_x: Outcome, y: Setting, sign_y: Outcome
) -> PairProbability:
    """P(x^sx, y^sy) with binomial standard error, conditioned on the pair (x, y)."""
    n = table.pair_total(x, y)
    if n == 0:
        return UNDEFINED_PAIR_PROB
    k = table.count(x, sign_x, y, sign_y)
    p = k / n
    return PairProbability(
        estimate=p, stderr=math.sqrt(p * (1.0 - p) / n), n_conditioning=n, n_cell=k
    )


def estimate_expectation(table: RunCountTable, x: Setting, y: Setting) -> ExpectationEstimate:
    """E(x, y) as the signed sum of the four outcome-pair probabilities."""
    n = table.pair_total(x, y)
    if n == 0:
        return UNDEFINED_EXPECTATION
    x, y = Setting(x), Setting(y)
    block = table.counts[x, y]
    value = float(block[0, 0] + block[1, 1] - block[0, 1] - block[1, 0]) / n
    # multinomial with +/-1 scores: var = (1 - E^2)/n
    stderr = math.sqrt(max(0.0, 1.0 - value * value) / n)
    return ExpectationEstimate(
        value=value, stderr=stderr, n_conditioning=n, low_stats=bool(block.min() < 10)
    )


def two_series_estimate(
    table_plus: RunCountTable, table_minus: RunCountTable, x: Setting, y: Setting
) -> ExpectationEstimate:
    """E(x, y) from two separate series.

    The plus series contributes P(x+, y+) - P(x+, y-) using only runs whose
    first outcome was +1; the minus series contributes P(x-, y-) - P(x-, y+).
    Discarded runs (wrong first outcome) stay in each denominator, which is
    what makes the two halves estimate the same conditional probabilities as
    a single free-running ensemble.
    """
    n_p = table_plus.pair_total(x, y)
    n_m = table_minus.pair_total(x, y)
    if n_p == 0 or n_m == 0:
        return UNDEFINED_EXPECTATION
    k_pp = table_plus.count(x, Outcome.PLUS, y, Outcome.PLUS)
    k_pm = table_plus.count(x, Outcome.PLUS, y, Outcome.MINUS)
    k_mm = table_minus.count(x, Outcome.MINUS, y, Outcome.MINUS)
    k_mp = table_minus.count(x, Outcome.MINUS, y, Outcome.PLUS)

    def half(k1, k2, n):
        p1, p2 = k1 / n, k2 / n
        diff = p1 - p2
        var = max(0.0, p1 + p2 - diff * diff) / n
        return diff, var

    d_plus, var_plus = half(k_pp, k_pm, n_p)
    d_minus, var_minus = half(k_mm, k_mp, n_m)
    return ExpectationEstimate(
        value=d_plus + d_minus,
        stderr=math.sqrt(var_plus + var_minus),
        n_conditioning=n_p + n_m,
        low_stats=min(k_pp, k_pm, k_mm, k_mp) < 10,
    )


def perfect_correlation_check(records) -> float | None:
    """Fraction of same-setting runs whose two outcomes agree.

    None when the records contain no same-setting run.
    """
    same = agree = 0
    for rec in records:
        if rec.first_setting == rec.second_setting:
            same += 1
            agree += rec.first_outcome == rec.second_outcome
    if same == 0:
        return None
    return agree / same


# ---------------------------------------------------------------------------
# exports


def write_run_log(result: EnsembleResult, fileobj) -> None:
    """CSV run log, one data row per run."""
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(
        [
            "run_id",
            "mode",
            "model",
            "prep_setting",
            "prep_sign",
            "first_setting",
            "first_outcome",
            "second_setting",
            "second_outcome",
        ]
    )
    mode = result.config.mode.value
    model = result.config.model.value
    for rec in result.records():
        prep_setting = rec.prep[0].name if rec.prep else ""
        prep_sign = f"{int(rec.prep[1]):+d}" if rec.prep else ""
        writer.writerow(
            [
                rec.run_id,
                mode,
                model,
                prep_setting,
                prep_sign,
                rec.first_setting.name,
                f"{int(rec.first_outcome):+d}",
                rec.second_setting.name,
                f"{int(rec.second_outcome):+d}",
            ]
        )
