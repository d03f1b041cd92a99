"""Experiment engine: seeded Monte Carlo sweeps over M and CSV emission.

Every iteration derives its own 64-bit seed from (base_seed, M, iteration)
with a splitmix-style mixer, so results are identical at any worker count
and paired across variants that share a base seed.  Terminal-side and
relay-side randomness use separate substreams, so runs that differ only in
relay count still see identical terminal demand and initial receptions.
"""

from __future__ import annotations

import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .cliques import MWC, SOLVERS, STRATEGIES, WORLT, Weighting
from .model import (ConfigurationError, DemandProfile, ErasureMatrix,
                    generate_initial_state)
from .protocol import (MULTI_RN, ONE_RN, RN_BY_CLIQUE_WEIGHT, RN_BY_DELIVERY,
                       RN_SELECTIONS, TOPOLOGIES, NetworkState, ProtocolConfig,
                       run_to_completion)

_M64 = (1 << 64) - 1


def mix64(*values: int) -> int:
    """Deterministic 64-bit avalanche mix of the given integers."""
    h = 0x6A09E667F3BCC909
    for v in values:
        z = (h + (v & _M64) + 0x9E3779B97F4A7C15) & _M64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        h = z ^ (z >> 31)
    return h


def default_rn_selection(strategy_kind: str) -> str:
    """The relay-choice rule each strategy is paired with."""
    return RN_BY_CLIQUE_WEIGHT if strategy_kind == WORLT else RN_BY_DELIVERY


@dataclass(frozen=True)
class ExperimentConfig:
    N: int = 30
    M_sweep: tuple[int, ...] = (10, 20, 30, 40, 50, 60)
    R: int = 3
    demand_fraction: float = 0.8
    bs_tn_range: tuple[float, float] = (0.3, 0.5)
    bs_rn_range: tuple[float, float] = (0.1, 0.2)
    rn_tn_range: tuple[float, float] = (0.05, 0.15)
    iterations: int = 500
    base_seed: int = 1
    flavor: str = "gidnc"
    strategy: str = WORLT
    worlt_n: int = 16
    solver: str = MWC
    rn_selection: str | None = None  # None: paired by strategy
    topology: str = MULTI_RN
    max_transmissions: int = 100_000
    mwc_budget: int = 1_000_000

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ConfigurationError("N must be >= 1")
        if not self.M_sweep or any(m < 1 for m in self.M_sweep):
            raise ConfigurationError("M_sweep must be nonempty positive counts")
        if self.R < 0:
            raise ConfigurationError("R must be >= 0")
        if not (0.0 < self.demand_fraction <= 1.0):
            raise ConfigurationError("demand_fraction must be in (0, 1]")
        for name in ("bs_tn_range", "bs_rn_range", "rn_tn_range"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo <= hi < 1.0):
                raise ConfigurationError(f"{name} must satisfy 0 <= lo <= hi < 1")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.flavor not in ("gidnc", "sidnc"):
            raise ConfigurationError(f"unknown flavor {self.flavor!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        if self.rn_selection is not None and self.rn_selection not in RN_SELECTIONS:
            raise ConfigurationError(f"unknown rn_selection {self.rn_selection!r}")
        if self.topology not in TOPOLOGIES:
            raise ConfigurationError(f"unknown topology {self.topology!r}")
        if self.topology == ONE_RN and self.R != 1:
            raise ConfigurationError("one-rn topology requires R = 1")

    def weighting(self) -> Weighting:
        return Weighting(self.strategy, self.worlt_n)

    def protocol_config(self) -> ProtocolConfig:
        rn_sel = self.rn_selection or default_rn_selection(self.strategy)
        return ProtocolConfig(
            topology=self.topology,
            flavor=self.flavor,
            strategy=self.weighting(),
            solver=self.solver,
            rn_selection=rn_sel,
            max_transmissions=self.max_transmissions,
            mwc_budget=self.mwc_budget,
        )


@dataclass(frozen=True)
class StatRow:
    M: int
    topology: str
    flavor: str
    strategy: str
    solver: str
    mean_cd: float
    stddev: float
    ci95: float
    iterations: int


@dataclass
class IterationResult:
    delay: int
    initial_sfm: tuple


def _setup_iteration(cfg: ExperimentConfig, m: int, k: int):
    """Draw demand, link probabilities and the initial SFM for iteration k."""
    seed = mix64(cfg.base_seed, m, k)
    tn_rng = random.Random(mix64(seed, 1))
    rn_rng = random.Random(mix64(seed, 2))
    recovery_rng = random.Random(mix64(seed, 3))

    demand = DemandProfile.sample(m, cfg.N, cfg.demand_fraction, tn_rng)
    lo, hi = cfg.bs_tn_range
    p_bs_tn = [tn_rng.uniform(lo, hi) for _ in range(m)]
    lo, hi = cfg.bs_rn_range
    p_bs_rn = [rn_rng.uniform(lo, hi) for _ in range(cfg.R)]
    lo, hi = cfg.rn_tn_range
    p_rn_tn = [[rn_rng.uniform(lo, hi) for _ in range(m)] for _ in range(cfg.R)]
    erasures = ErasureMatrix(p_bs_tn, p_bs_rn, p_rn_tn)

    sfm = generate_initial_state(m, cfg.N, cfg.R, demand, erasures,
                                 rng=tn_rng, relay_rng=rn_rng)
    return sfm, erasures, recovery_rng


def run_iteration(cfg: ExperimentConfig, m: int, k: int) -> IterationResult:
    """One seeded Monte Carlo iteration at population size ``m``."""
    sfm, erasures, recovery_rng = _setup_iteration(cfg, m, k)
    fingerprint = sfm.fingerprint()
    state = NetworkState(sfm, erasures)
    delay, _ = run_to_completion(state, cfg.protocol_config(), recovery_rng)
    return IterationResult(delay, fingerprint)


def run_iteration_detailed(cfg: ExperimentConfig, m: int, k: int):
    """Like run_iteration but returns (delay, log, initial SFM, final state)."""
    sfm, erasures, recovery_rng = _setup_iteration(cfg, m, k)
    initial = sfm.copy()
    state = NetworkState(sfm, erasures)
    delay, log = run_to_completion(state, cfg.protocol_config(), recovery_rng)
    return delay, log, initial, state


def _sweep_task(args) -> tuple[int, int, int]:
    cfg, m, k = args
    return m, k, run_iteration(cfg, m, k).delay


def _aggregate(cfg: ExperimentConfig, delays_by_m: dict[int, list[int]]) -> list[StatRow]:
    rows = []
    for m in cfg.M_sweep:
        delays = delays_by_m[m]
        n = len(delays)
        mean = statistics.fmean(delays)
        sd = statistics.stdev(delays) if n > 1 else 0.0
        ci = 1.96 * sd / (n ** 0.5)
        rows.append(StatRow(m, cfg.topology, cfg.flavor, cfg.strategy,
                            cfg.solver, mean, sd, ci, n))
    return rows


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> list[StatRow]:
    """Mean completion delay per M over seeded iterations.

    Results are independent of ``workers``: every (M, k) pair is seeded on
    its own and aggregation sorts before reducing.
    """
    tasks = [(cfg, m, k) for m in cfg.M_sweep for k in range(cfg.iterations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks, chunksize=16))
    else:
        results = [_sweep_task(t) for t in tasks]
    results.sort(key=lambda r: (r[0], r[1]))
    delays_by_m: dict[int, list[int]] = {m: [] for m in cfg.M_sweep}
    for m, _, delay in results:
        delays_by_m[m].append(delay)
    return _aggregate(cfg, delays_by_m)


def compare_strategies(cfg: ExperimentConfig, strategy_list: list[str],
                       workers: int = 1) -> list[StatRow]:
    """Run each strategy under identical iteration seeds (paired comparison)."""
    rows = []
    for name in strategy_list:
        variant = replace(cfg, strategy=name, rn_selection=None)
        rows.extend(run_sweep(variant, workers=workers))
    return rows


CSV_HEADER = "M,topology,flavor,strategy,solver,mean_cd,stddev,ci95,iterations"


def format_csv(rows: list[StatRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.M},{r.topology},{r.flavor},{r.strategy},{r.solver},"
            f"{r.mean_cd:.6f},{r.stddev:.6f},{r.ci95:.6f},{r.iterations}")
    return "\n".join(lines) + "\n"


def emit_csv(rows: list[StatRow], path) -> None:
    if not rows:
        raise ValueError("no stats to emit")
    with open(path, "w", newline="") as f:
        f.write(format_csv(rows))


def parse_csv(text: str) -> list[StatRow]:
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("unrecognized stats CSV header")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 9:
            raise ValueError(f"expected 9 fields, got {len(parts)}: {ln!r}")
        rows.append(StatRow(int(parts[0]), parts[1], parts[2], parts[3], parts[4],
                            float(parts[5]), float(parts[6]), float(parts[7]),
                            int(parts[8])))
    return rows


_LIST_KEYS = {"M_sweep"}
_RANGE_KEYS = {"bs_tn_range", "bs_rn_range", "rn_tn_range"}
_INT_KEYS = {"N", "R", "iterations", "base_seed", "worlt_n",
             "max_transmissions", "mwc_budget"}
_FLOAT_KEYS = {"demand_fraction"}
_STR_KEYS = {"flavor", "strategy", "solver", "rn_selection", "topology"}


def parse_config_file(path) -> ExperimentConfig:
    """Read a ``key = value`` config file with exactly the sweep fields."""
    values: dict = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key in _LIST_KEYS:
                values[key] = tuple(int(x) for x in val.split(","))
            elif key in _RANGE_KEYS:
                lo, hi = (float(x) for x in val.split(","))
                values[key] = (lo, hi)
            elif key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _STR_KEYS:
                values[key] = val
            else:
                raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
    return ExperimentConfig(**values)
