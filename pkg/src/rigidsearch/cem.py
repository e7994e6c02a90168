"""Deep cross-entropy search over Henneberg constructions.

Each generation keeps the surviving constructions, fills the population with
fresh policy rollouts from K2, screens and evaluates rewards, fits the policy
to the elite (state, action) pairs with an entropy-regularized cross-entropy
loss, and stops early once the stream of newly discovered isomorphism
classes dries up.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .graphs import CanonicalCode, Graph, canonical_code, decode_int
from .oracle import OracleError, OraclePool, stub_oracle_command
from .policy import (FLAT_VARIANT, GIN_VARIANT, PolicyParams, action_distribution,
                     adam_step, extend_to_n, init_params, load_params,
                     loss_and_gradients, sample_action, save_params)
from .rewards import CachedReward, make_reward, two_stage_select
from .rigidity import Extension, apply_extension, k2


class ConfigError(ValueError):
    """Invalid or inconsistent search configuration."""


REWARDS = ("nac", "plane", "sphere", "mbezout")
SCHEDULES = ("eq5", "constant", "none")

# Calibrated eta0 anchors (see README): largest value on the grid
# {0.5, 0.8, 1.1, 1.4} whose trained policy (m=1000, 40 generations, seed 0)
# regenerates its best class with frequency >= 1/1000 over 10000 fresh
# rollouts at that n; log-interpolated in the size of the largest slot space
# a run of target n scores, clamped beyond the anchor range.  Oracle rewards
# reuse the NAC anchors: desk-scale calibration has no live solver to train
# against, and the entropy budget is a property of the action space.
_NAC_ANCHORS = {7: 1.4, 8: 1.4, 10: 0.8}
ETA0_ANCHORS: dict[str, dict[int, float]] = {
    "nac": _NAC_ANCHORS,
    "plane": _NAC_ANCHORS,
    "sphere": _NAC_ANCHORS,
    "mbezout": _NAC_ANCHORS,
}


def _slot_space(n: int) -> int:
    k = n - 1
    return k * (k - 1) // 2 * (k - 1)


def default_eta0(reward: str, n: int) -> float:
    """Interpolate the calibrated anchors log-linearly in action-space size."""
    anchors = ETA0_ANCHORS[reward]
    ns = sorted(anchors)
    if n <= ns[0]:
        return anchors[ns[0]]
    if n >= ns[-1]:
        return anchors[ns[-1]]
    for lo, hi in zip(ns, ns[1:]):
        if lo <= n <= hi:
            x, x0, x1 = (math.log(_slot_space(v)) for v in (n, lo, hi))
            w = (x - x0) / (x1 - x0)
            return anchors[lo] * (1 - w) + anchors[hi] * w
    raise AssertionError


@dataclass
class CemConfig:
    reward: str = "nac"
    n: int = 10
    m: int = 1000
    generations: int | None = None      # 500 for nac, 250 otherwise
    rho_elite: float = 0.064
    rho_surv: float = 0.016
    rho_main: float | None = None       # 1.0 for nac, 0.256 otherwise
    eta0: float | None = None           # calibrated default per (reward, n)
    alpha: float = 6.0
    beta: float = 7.0
    epochs: int = 4
    lr: float = 5e-4
    early_stop: int | None = None       # 250 for nac, 500 otherwise
    seed: int = 0
    policy: str = GIN_VARIANT
    oracle: str | None = None
    oracle_table: str | None = None
    oracle_procs: int = 1
    init_weights: str | None = None
    out: str | None = None
    target: int | None = None           # optional: stop once best >= target
    schedule: str = "eq5"
    nac_guard: int = 34


def resolve_config(cfg: CemConfig) -> CemConfig:
    """Fill reward-dependent defaults and validate every field."""
    out = dataclasses.replace(cfg)
    if out.reward not in REWARDS:
        raise ConfigError(f"unknown reward {out.reward!r}")
    if out.generations is None:
        out.generations = 500 if out.reward == "nac" else 250
    if out.rho_main is None:
        out.rho_main = 1.0 if out.reward == "nac" else 0.256
    if out.early_stop is None:
        out.early_stop = 250 if out.reward == "nac" else 500
    if out.eta0 is None:
        out.eta0 = default_eta0(out.reward, out.n)
    if out.n < 3:
        raise ConfigError(f"need n >= 3, got {out.n}")
    if out.m < 1:
        raise ConfigError(f"need m >= 1, got {out.m}")
    if not 0 < out.rho_surv <= out.rho_elite <= 1:
        raise ConfigError("need 0 < rho_surv <= rho_elite <= 1")
    if not 0 < out.rho_main <= 1:
        raise ConfigError("need 0 < rho_main <= 1")
    if out.generations < 1:
        raise ConfigError("need generations >= 1")
    if out.epochs < 0 or out.lr <= 0 or out.eta0 < 0:
        raise ConfigError("epochs, lr, eta0 out of range")
    if out.early_stop < 0:
        raise ConfigError("early_stop must be >= 0")
    if out.policy not in (GIN_VARIANT, FLAT_VARIANT):
        raise ConfigError(f"unknown policy {out.policy!r}")
    if out.schedule not in SCHEDULES:
        raise ConfigError(f"unknown schedule {out.schedule!r}")
    if out.oracle and out.oracle_table:
        raise ConfigError("give either --oracle or --oracle-table, not both")
    if out.oracle_procs < 1:
        raise ConfigError("need oracle_procs >= 1")
    needs_oracle = out.reward != "nac" or out.rho_main < 1
    if needs_oracle and not (out.oracle or out.oracle_table):
        raise ConfigError(f"reward {out.reward!r} (or rho_main < 1) needs an oracle")
    return out


def entropy_coefficient(t: int, eta0: float, alpha: float, beta: float) -> float:
    """Eq.-style decay: eta0 / (1 + alpha * ln(1 + t * exp(-beta)))."""
    if t < 1:
        raise ValueError(f"generations are 1-based, got t={t}")
    return eta0 / (1.0 + alpha * math.log(1.0 + t * math.exp(-beta)))


def eta_at(cfg: CemConfig, t: int) -> float:
    if cfg.schedule == "none":
        return 0.0
    if cfg.schedule == "constant":
        return cfg.eta0
    return entropy_coefficient(t, cfg.eta0, cfg.alpha, cfg.beta)


# ---------------------------------------------------------------------------
# rollouts


@dataclass
class RolloutTrace:
    pairs: tuple[tuple[Graph, Extension], ...]
    graph: Graph
    code: CanonicalCode
    reward: int | None = None


def rollout(params: PolicyParams, n: int, rng) -> RolloutTrace:
    """Sample one construction K2 -> G_n from the policy."""
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    g = k2()
    pairs = []
    while g.n < n:
        dist = action_distribution(params, g)
        ext = sample_action(dist, rng)
        pairs.append((g, ext))
        g = apply_extension(g, ext)
    return RolloutTrace(tuple(pairs), g, canonical_code(g))


@dataclass
class GenerationStats:
    t: int
    best: int
    cutoff: int
    new_noniso: int
    eta: float
    evals: int
    seconds: float


@dataclass
class RunState:
    params: PolicyParams
    survivors: list[RolloutTrace] = field(default_factory=list)
    seen: set[CanonicalCode] = field(default_factory=set)
    best_value: int | None = None
    best_code: CanonicalCode | None = None
    hit_generation: int | None = None
    completed: int = 0


# stream tags keeping derived RNG seeds disjoint: rollout streams use
# (seed, t, i) with i < m; training and init use i >= 2**30
_TRAIN_STREAM = 1 << 30
_INIT_STREAM = (1 << 30) + 1


def _train(params: PolicyParams, dataset, eta: float, epochs: int, lr: float, rng) -> None:
    """Per-state Adam steps: each epoch visits the distinct states of the
    elite dataset in shuffled order, one update per state's pair group."""
    groups: dict[tuple, list] = {}
    for g, ext in dataset:
        groups.setdefault((g.n, g.rows), []).append((g, ext))
    keys = sorted(groups)
    for _ in range(epochs):
        order = rng.permutation(len(keys))
        for j in order:
            batch = groups[keys[j]]
            _, grads = loss_and_gradients(params, batch, eta)
            adam_step(params, grads, lr)


def run_generation(state: RunState, cfg: CemConfig, main: CachedReward,
                   surrogate: CachedReward | None) -> GenerationStats:
    """One Algorithm-1 generation; mutates state in place."""
    t = state.completed + 1
    start = time.monotonic()
    population = list(state.survivors)
    for i in range(len(population), cfg.m):
        rng = np.random.default_rng((cfg.seed, t, i))
        population.append(rollout(state.params, cfg.n, rng))
    codes = [tr.code for tr in population]
    fresh = {c for c in codes if c not in state.seen}
    state.seen |= fresh

    misses_before = main.misses
    selected = two_stage_select(codes, surrogate, main, cfg.rho_main)
    evals = main.misses - misses_before
    for i, value in selected:
        population[i].reward = value

    ranked = sorted(selected, key=lambda iv: (-iv[1], codes[iv[0]], iv[0]))
    n_elite = int(cfg.m * cfg.rho_elite)
    n_surv = int(cfg.m * cfg.rho_surv)
    elites = ranked[:n_elite]
    cutoff = elites[-1][1] if elites else 0

    top_i, top_val = ranked[0]
    if state.best_value is None or top_val > state.best_value:
        state.best_value = top_val
        state.best_code = codes[top_i]
        state.hit_generation = t
    elif top_val == state.best_value and codes[top_i] < state.best_code:
        state.best_code = codes[top_i]

    eta = eta_at(cfg, t)
    dataset = [pair for i, _ in elites for pair in population[i].pairs]
    if dataset and cfg.epochs > 0:
        train_rng = np.random.default_rng((cfg.seed, t, _TRAIN_STREAM))
        _train(state.params, dataset, eta, cfg.epochs, cfg.lr, train_rng)

    state.survivors = [population[i] for i, _ in ranked[:n_surv]]
    state.completed = t
    return GenerationStats(t=t, best=state.best_value, cutoff=cutoff,
                           new_noniso=len(fresh), eta=eta, evals=evals,
                           seconds=time.monotonic() - start)


def early_stop_check(history: list[GenerationStats], threshold: int) -> bool:
    """Stop once the latest generation discovered strictly fewer new
    isomorphism classes than the threshold."""
    if not history:
        raise ValueError("no completed generations")
    return history[-1].new_noniso < threshold


# ---------------------------------------------------------------------------
# run driver and artifacts


CSV_COLUMNS = ("t", "best", "cutoff", "new_noniso", "eta_t", "evals", "seconds")


@dataclass
class RunResult:
    best_graph: Graph
    best_value: int
    best_code: CanonicalCode
    hit_generation: int
    stats: list[GenerationStats]
    evaluations: int
    stopped_early: bool
    params: PolicyParams


class _RunDir:
    """Writes the run directory artifacts: config, generations.csv, best.txt,
    checkpoint-<t> files (older checkpoints pruned, the latest kept)."""

    def __init__(self, path: str | None, cfg: CemConfig, keep_checkpoints: int = 3):
        self.path = path
        self.keep = keep_checkpoints
        self._written: list[str] = []
        if not path:
            return
        os.makedirs(path, exist_ok=True)
        import yaml

        with open(os.path.join(path, "config"), "w", encoding="utf-8") as fh:
            yaml.safe_dump(dataclasses.asdict(cfg), fh, sort_keys=True)
        with open(os.path.join(path, "generations.csv"), "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerow(CSV_COLUMNS)

    def append_stats(self, s: GenerationStats) -> None:
        if not self.path:
            return
        with open(os.path.join(self.path, "generations.csv"), "a", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerow(
                [s.t, s.best, s.cutoff, s.new_noniso, f"{s.eta:.12g}", s.evals, f"{s.seconds:.3f}"])

    def append_best(self, code: CanonicalCode, value: int, generation: int) -> None:
        if not self.path:
            return
        with open(os.path.join(self.path, "best.txt"), "a", encoding="utf-8") as fh:
            fh.write(f"{code.n} {code.code} {value} {generation}\n")

    def checkpoint(self, state: RunState) -> None:
        if not self.path:
            return
        fn = os.path.join(self.path, f"checkpoint-{state.completed}")
        save_checkpoint(fn, state)
        self._written.append(fn)
        while len(self._written) > self.keep:
            old = self._written.pop(0)
            if os.path.exists(old):
                os.remove(old)


def _trace_to_record(tr: RolloutTrace) -> dict:
    actions = [[e.kind, -1 if e.apex is None else e.apex, e.pair[0], e.pair[1]]
               for _, e in tr.pairs]
    return {"actions": actions, "n": tr.graph.n, "reward": tr.reward}


def _trace_from_record(rec: dict) -> RolloutTrace:
    g = k2()
    pairs = []
    for kind, apex, v, w in rec["actions"]:
        ext = Extension(kind, None if apex < 0 else apex, (v, w))
        pairs.append((g, ext))
        g = apply_extension(g, ext)
    assert g.n == rec["n"]
    return RolloutTrace(tuple(pairs), g, canonical_code(g), rec["reward"])


def save_checkpoint(path: str, state: RunState) -> None:
    """A weight file with one extra metadata array: generation counter,
    survivor traces, and the discovery set.  Rollout RNG streams are derived
    from (seed, generation, index), so the counter is the whole RNG state.
    Checkpoints load as plain weight files."""
    meta = {
        "completed": state.completed,
        "survivors": [_trace_to_record(tr) for tr in state.survivors],
        "seen": [[cc.n, str(cc.code)] for cc in sorted(state.seen)],
        "best_value": state.best_value,
        "best_code": [state.best_code.n, str(state.best_code.code)] if state.best_code else None,
        "hit_generation": state.hit_generation,
    }
    buf = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    save_params(state.params, path, extra={"run.meta": buf})


def load_checkpoint(path: str) -> RunState:
    with np.load(str(path)) as data:
        if "run.meta" not in data:
            raise ValueError(f"{path} is not a checkpoint (no run metadata)")
        meta = json.loads(bytes(data["run.meta"].tobytes()).decode())
    state = RunState(params=load_params(path))
    state.completed = meta["completed"]
    state.survivors = [_trace_from_record(r) for r in meta["survivors"]]
    state.best_value = meta["best_value"]
    if meta["best_code"]:
        state.best_code = CanonicalCode(meta["best_code"][0], int(meta["best_code"][1]))
    state.hit_generation = meta["hit_generation"]
    state.seen = {CanonicalCode(n, int(c)) for n, c in meta["seen"]}
    return state


def _make_oracle(cfg: CemConfig) -> OraclePool | None:
    if cfg.oracle:
        return OraclePool(cfg.oracle, cfg.oracle_procs)
    if cfg.oracle_table:
        return OraclePool(stub_oracle_command(cfg.oracle_table), cfg.oracle_procs)
    return None


def _initial_params(cfg: CemConfig) -> PolicyParams:
    if cfg.init_weights:
        params = load_params(cfg.init_weights)
        if params.variant != cfg.policy:
            raise ConfigError(
                f"weights are for policy {params.variant!r}, config says {cfg.policy!r}")
        if params.n_max < cfg.n:
            params = extend_to_n(params, cfg.n)
        return params
    return init_params(cfg.policy, cfg.n, seed=(cfg.seed, 0, _INIT_STREAM))


def run(cfg: CemConfig, resume_from: str | None = None, log=None) -> RunResult:
    """Full search: loops run_generation until the generation budget, the
    early-stop rule, or the optional target value ends it."""
    cfg = resolve_config(cfg)
    oracle = _make_oracle(cfg)
    try:
        main = make_reward(cfg.reward, oracle, nac_guard=cfg.nac_guard)
        surrogate = make_reward("mbezout", oracle) if cfg.rho_main < 1 else None
        if resume_from:
            state = load_checkpoint(resume_from)
            if state.params.n_max < cfg.n:
                state.params = extend_to_n(state.params, cfg.n)
        else:
            state = RunState(params=_initial_params(cfg))
        rundir = _RunDir(cfg.out, cfg)
        history: list[GenerationStats] = []
        stopped_early = False
        while state.completed < cfg.generations:
            best_before = (state.best_value, state.best_code)
            try:
                stats = run_generation(state, cfg, main, surrogate)
            except OracleError:
                rundir.checkpoint(state)
                raise
            history.append(stats)
            if (state.best_value, state.best_code) != best_before:
                rundir.append_best(state.best_code, state.best_value, stats.t)
            rundir.append_stats(stats)
            rundir.checkpoint(state)
            if log:
                log(stats)
            if cfg.target is not None and state.best_value is not None \
                    and state.best_value >= cfg.target:
                stopped_early = True
                break
            if cfg.early_stop and early_stop_check(history, cfg.early_stop):
                stopped_early = True
                break
        assert state.best_code is not None
        return RunResult(
            best_graph=decode_int(state.best_code.code, state.best_code.n),
            best_value=state.best_value,
            best_code=state.best_code,
            hit_generation=state.hit_generation,
            stats=history,
            evaluations=len(main.cache),
            stopped_early=stopped_early,
            params=state.params,
        )
    finally:
        if oracle:
            oracle.close()


# ---------------------------------------------------------------------------
# deployment evaluation and schedule study


@dataclass
class DeployResult:
    best_value: int
    best_code: CanonicalCode
    histogram: dict[int, int]
    distinct: int
    attempts: int
    complete: bool


def deploy_eval(params: PolicyParams, n: int, reward: CachedReward,
                count: int = 10000, seed: int = 0, patience: int = 5000) -> DeployResult:
    """Roll out the frozen policy until `count` distinct isomorphism classes
    are collected, evaluate the reward on each, and report the maximum with
    the value histogram.  Stops early (saturation) after `patience`
    consecutive rollouts produce no new class."""
    if params.n_max < n:
        params = extend_to_n(params, n)
    codes: set[CanonicalCode] = set()
    attempts = 0
    stale = 0
    while len(codes) < count and stale < patience:
        rng = np.random.default_rng((seed, 0, attempts))
        before = len(codes)
        codes.add(rollout(params, n, rng).code)
        attempts += 1
        stale = 0 if len(codes) > before else stale + 1
    values = {cc: reward.value(cc) for cc in sorted(codes)}
    best_cc = min(values, key=lambda cc: (-values[cc], cc))
    return DeployResult(
        best_value=values[best_cc],
        best_code=best_cc,
        histogram=dict(sorted(Counter(values.values()).items())),
        distinct=len(codes),
        attempts=attempts,
        complete=len(codes) >= count,
    )


def regeneration_frequency(params: PolicyParams, n: int, reward: CachedReward,
                           target_value: int, rollouts: int = 10000,
                           seed: int = 0) -> float:
    """Fraction of policy rollouts whose graph attains target_value; the
    eta0 calibration accepts an eta once this reaches 1/1000 after training.
    """
    if params.n_max < n:
        params = extend_to_n(params, n)
    hits = 0
    for i in range(rollouts):
        rng = np.random.default_rng((seed, 0, i))
        if reward.value(rollout(params, n, rng).code) == target_value:
            hits += 1
    return hits / rollouts


def schedule_study(cfg: CemConfig, schedules: list[str], seeds: list[int],
                   out_csv: str | None = None) -> list[tuple[str, int, int, int]]:
    """Run the search once per (schedule, seed) and collect best-vs-generation
    curves.  Schedule specs: 'eq5', 'none', or 'constant:<eta>'.  Returns
    rows (schedule, seed, generation, best); optionally writes them as CSV.
    """
    rows: list[tuple[str, int, int, int]] = []
    for spec in schedules:
        if spec == "eq5" or spec == "none":
            kind, eta0 = spec, cfg.eta0
        elif spec.startswith("constant:"):
            kind, eta0 = "constant", float(spec.split(":", 1)[1])
        else:
            raise ConfigError(f"unknown schedule spec {spec!r}")
        for seed in seeds:
            sub = dataclasses.replace(cfg, schedule=kind, eta0=eta0, seed=seed, out=None)
            result = run(sub)
            rows.extend((spec, seed, s.t, s.best) for s in result.stats)
    if out_csv:
        with open(out_csv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("schedule", "seed", "generation", "best"))
            w.writerows(rows)
    return rows
