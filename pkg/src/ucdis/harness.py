"""Monte Carlo harness: average code lengths, redundancies, and error rates.

Every trial is a pure function of (config, trial index): the trial seed is a
SplitMix64 derivation of the master seed, and parameter/memory/sequence draws
use further per-purpose derivations.  Aggregation always runs over the full
per-trial arrays in trial order, so results are bit-identical for any worker
count.  Lossless strategies are verified on every trial; a mismatch there is
a codec bug and aborts the run.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import partial

import numpy as np

from . import bounds, codec, ducompm
from .rng import RNG_ALGORITHM, split_seed
from .sources import (
    MEMORYLESS,
    SourceFamily,
    entropy_rate,
    sample_jeffreys,
    sample_sequence,
    validate_theta,
)

STRATEGIES = ("ucomp", "ucompm", "ducompm")


class ValidationError(ValueError):
    """Configuration rejected; ``fields`` lists the offending entries."""

    def __init__(self, fields: list[str]):
        self.fields = fields
        super().__init__("invalid configuration: " + "; ".join(fields))


class CodecIntegrityError(RuntimeError):
    """A strictly lossless strategy failed to round-trip (codec bug)."""


@dataclass(frozen=True)
class ExperimentConfig:
    family_kind: str
    k: int
    n: int
    m: int
    p_e: float
    strategies: tuple[str, ...]
    trials: int
    master_seed: int
    theta_mode: str = "jeffreys"
    theta: tuple | None = None
    hash_seed: int = 0x5EED
    inflation: float = ducompm.DEFAULT_INFLATION
    collision_budget: float | None = None
    candidate_cap: int = ducompm.DEFAULT_CANDIDATE_CAP

    def validate(self):
        errs = []
        if self.family_kind not in (MEMORYLESS, "markov1"):
            errs.append(f"family_kind: unknown {self.family_kind!r}")
        if self.k < 2:
            errs.append(f"k: must be >= 2, got {self.k}")
        if self.n < 1:
            errs.append(f"n: must be >= 1, got {self.n}")
        if self.m < 0:
            errs.append(f"m: must be >= 0, got {self.m}")
        if not (0.0 <= self.p_e < 1.0):
            errs.append(f"p_e: must lie in [0,1), got {self.p_e}")
        if self.trials < 1:
            errs.append(f"trials: must be >= 1, got {self.trials}")
        if not self.strategies:
            errs.append("strategies: must be a nonempty subset of " + str(STRATEGIES))
        for s in self.strategies:
            if s not in STRATEGIES:
                errs.append(f"strategies: unknown strategy {s!r}")
        if "ducompm" in self.strategies:
            if self.family_kind != MEMORYLESS:
                errs.append("strategies: ducompm requires the memoryless family")
            if not (0.0 < self.p_e < 1.0):
                errs.append("p_e: ducompm requires 0 < p_e < 1")
            if self.m < 1:
                errs.append("m: ducompm requires m >= 1")
        if "ucompm" in self.strategies and self.m < 0:
            errs.append(f"m: must be >= 0 for ucompm, got {self.m}")
        if self.theta_mode not in ("jeffreys", "fixed"):
            errs.append(f"theta_mode: must be 'jeffreys' or 'fixed', got {self.theta_mode!r}")
        if self.theta_mode == "fixed":
            if self.theta is None:
                errs.append("theta: required when theta_mode is 'fixed'")
            else:
                try:
                    if self.family_kind in (MEMORYLESS, "markov1") and self.k >= 2:
                        validate_theta(SourceFamily(self.family_kind, self.k), np.asarray(self.theta))
                except ValueError as e:
                    errs.append(f"theta: {e}")
        elif self.theta is not None:
            errs.append("theta: only allowed when theta_mode is 'fixed'")
        if self.candidate_cap < 1:
            errs.append(f"candidate_cap: must be >= 1, got {self.candidate_cap}")
        if errs:
            raise ValidationError(errs)

    def ducompm_config(self) -> ducompm.DucompmConfig:
        return ducompm.DucompmConfig(
            k=self.k,
            m=self.m,
            p_e=self.p_e,
            hash_seed=self.hash_seed,
            inflation=self.inflation,
            collision_budget=self.collision_budget,
            candidate_cap=self.candidate_cap,
        )


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    k: int
    n: int
    m: int
    p_e: float
    trials: int
    avg_len_bits: float
    avg_redundancy_bits: float
    stderr_bits: float
    error_rate: float
    theory_bits: float


@dataclass(frozen=True)
class CoverageReport:
    k: int
    n: int
    m: int
    p_e: float
    trials: int
    empirical_coverage: float
    target: float


@dataclass(frozen=True)
class TrialData:
    """Per-trial detail: payload lengths and error indicators per strategy."""

    strategies: tuple[str, ...]
    lengths: dict[str, np.ndarray]
    errors: dict[str, np.ndarray]
    entropy_bits: np.ndarray  # H_n(theta_t) = n * entropy_rate(theta_t)


def _draw_theta(cfg: ExperimentConfig, family: SourceFamily, theta_seed: int):
    if cfg.theta_mode == "fixed":
        return validate_theta(family, np.asarray(cfg.theta, dtype=np.float64))
    return sample_jeffreys(family, theta_seed)


def _experiment_trial(cfg: ExperimentConfig, t: int):
    family = SourceFamily(cfg.family_kind, cfg.k)
    trial_seed = split_seed(cfg.master_seed, t)
    theta = _draw_theta(cfg, family, split_seed(trial_seed, 0))
    x = sample_sequence(family, theta, cfg.n, split_seed(trial_seed, 2))
    need_memory = "ucompm" in cfg.strategies or "ducompm" in cfg.strategies
    y = sample_sequence(family, theta, cfg.m, split_seed(trial_seed, 1)) if need_memory else None

    h_bits = cfg.n * entropy_rate(family, theta)
    lens, errs = {}, {}
    if "ucomp" in cfg.strategies:
        stream = codec.encode_ucomp(family, x)
        if not np.array_equal(codec.decode_ucomp(family, stream, cfg.n), x):
            raise CodecIntegrityError(f"ucomp round-trip mismatch at trial {t}")
        lens["ucomp"] = float(stream.bit_length)
        errs["ucomp"] = 0.0
    if "ucompm" in cfg.strategies:
        stream = codec.encode_ucompm(family, y, x)
        if not np.array_equal(codec.decode_ucompm(family, y, stream, cfg.n), x):
            raise CodecIntegrityError(f"ucompm round-trip mismatch at trial {t}")
        lens["ucompm"] = float(stream.bit_length)
        errs["ucompm"] = 0.0
    if "ducompm" in cfg.strategies:
        dcfg = cfg.ducompm_config()
        word = ducompm.encode_ducompm(x, dcfg)
        outcome = ducompm.decode_ducompm(word.payload(), y, cfg.n, dcfg)
        ok = outcome.ok and np.array_equal(outcome.sequence, x)
        lens["ducompm"] = float(word.coded_bits)
        errs["ducompm"] = 0.0 if ok else 1.0
    ordered = [s for s in STRATEGIES if s in cfg.strategies]
    return tuple(lens[s] for s in ordered) + tuple(errs[s] for s in ordered) + (h_bits,)


def run_trials(cfg: ExperimentConfig, workers: int = 1) -> TrialData:
    """Raw per-trial lengths and error indicators (basis for run_experiment)."""
    cfg.validate()
    ordered = tuple(s for s in STRATEGIES if s in cfg.strategies)
    fn = partial(_experiment_trial, cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(fn, range(cfg.trials), chunksize=max(1, cfg.trials // (8 * workers))))
    else:
        rows = [fn(t) for t in range(cfg.trials)]
    table = np.asarray(rows, dtype=np.float64)
    ns = len(ordered)
    return TrialData(
        strategies=ordered,
        lengths={s: table[:, i] for i, s in enumerate(ordered)},
        errors={s: table[:, ns + i] for i, s in enumerate(ordered)},
        entropy_bits=table[:, 2 * ns],
    )


def _theory_bits(cfg: ExperimentConfig, strategy: str) -> float:
    family = SourceFamily(cfg.family_kind, cfg.k)
    if strategy == "ucomp":
        return bounds.redundancy_ucomp(family, cfg.n).total_bits
    if strategy == "ucompm":
        return bounds.redundancy_ucompm(family.d, cfg.n, cfg.m).total_bits
    return bounds.redundancy_ducompm(family, cfg.n, cfg.m, cfg.p_e, "approx").total_bits


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[SummaryRow]:
    """One SummaryRow per requested strategy; deterministic given the config."""
    data = run_trials(cfg, workers=workers)
    out = []
    for s in data.strategies:
        lens = data.lengths[s]
        red = lens - data.entropy_bits
        stderr = float(red.std(ddof=1) / math.sqrt(cfg.trials)) if cfg.trials > 1 else 0.0
        out.append(
            SummaryRow(
                strategy=s,
                k=cfg.k,
                n=cfg.n,
                m=cfg.m,
                p_e=cfg.p_e if s == "ducompm" else 0.0,
                trials=cfg.trials,
                avg_len_bits=float(lens.mean()),
                avg_redundancy_bits=float(red.mean()),
                stderr_bits=stderr,
                error_rate=float(data.errors[s].mean()),
                theory_bits=_theory_bits(cfg, s),
            )
        )
    return out


def _coverage_trial(cfg: ExperimentConfig, t: int) -> float:
    family = SourceFamily(cfg.family_kind, cfg.k)
    trial_seed = split_seed(cfg.master_seed, t)
    theta = _draw_theta(cfg, family, split_seed(trial_seed, 0))
    y = sample_sequence(family, theta, cfg.m, split_seed(trial_seed, 1))
    x = sample_sequence(family, theta, cfg.n, split_seed(trial_seed, 2))
    e = ducompm.build_ellipsoid(y, cfg.n, cfg.p_e, cfg.k)
    return 1.0 if ducompm.ellipsoid_contains(e, ducompm.type_of(x, cfg.k), cfg.n) else 0.0


def run_coverage(cfg: ExperimentConfig, workers: int = 1) -> CoverageReport:
    """Fraction of trials whose sequence type falls inside the memory's ellipsoid."""
    cfg.validate()
    errs = []
    if cfg.family_kind != MEMORYLESS:
        errs.append("family_kind: coverage runs require the memoryless family")
    if not (0.0 < cfg.p_e < 1.0):
        errs.append("p_e: coverage runs require 0 < p_e < 1")
    if cfg.m < 1:
        errs.append("m: coverage runs require m >= 1")
    if errs:
        raise ValidationError(errs)
    fn = partial(_coverage_trial, cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            hits = list(pool.map(fn, range(cfg.trials), chunksize=max(1, cfg.trials // (8 * workers))))
    else:
        hits = [fn(t) for t in range(cfg.trials)]
    return CoverageReport(
        k=cfg.k,
        n=cfg.n,
        m=cfg.m,
        p_e=cfg.p_e,
        trials=cfg.trials,
        empirical_coverage=float(np.mean(hits)),
        target=1.0 - cfg.p_e,
    )


_ROW_FIELDS = (
    "strategy", "k", "n", "m", "p_e", "trials",
    "avg_len_bits", "avg_redundancy_bits", "stderr_bits", "error_rate", "theory_bits",
)
_COVERAGE_FIELDS = ("k", "n", "m", "p_e", "trials", "empirical_coverage", "target")


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def emit_csv(result, path):
    """Write SummaryRows or a CoverageReport as CSV (6 significant digits)."""
    if isinstance(result, CoverageReport):
        fields, rows = _COVERAGE_FIELDS, [result]
    else:
        fields, rows = _ROW_FIELDS, list(result)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(fields)
            for row in rows:
                d = asdict(row)
                writer.writerow([_fmt(d[f]) for f in fields])
    except OSError as e:
        raise OSError(f"cannot write CSV to {path}: {e}") from e


def emit_json(result, path, config: ExperimentConfig | None = None):
    """Write results as JSON, echoing the config and the RNG identifier."""
    if isinstance(result, CoverageReport):
        doc = {"coverage": asdict(result)}
    else:
        doc = {"rows": [asdict(r) for r in result]}
    doc["rng_algorithm"] = RNG_ALGORITHM
    if config is not None:
        doc["config"] = asdict(config)
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as e:
        raise OSError(f"cannot write JSON to {path}: {e}") from e
