"""End-to-end experiment loop: rollouts, selection, evaluation, shaping, update."""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import streams
from .agent import (
    AdamState,
    PolicyParams,
    adam_step,
    prior_corpus,
    reinvent_loss_and_grad,
    rollout_batch,
    train_prior,
)
from .dpp import diverse_minibatch
from .kernels import KernelVariant
from .metrics import active_entries, diversity_report
from .oracle import Oracle, OracleSpec
from .shaping import SHAPING_MODES, MemoryStore, RndState, reshape

log = logging.getLogger(__name__)

VARIANTS = ("standalone", "dpp-t", "dpp-a", "dpp-p", "dpp-d")
BUDGET_MODES = ("strict", "all-scored")
STEP_COLUMNS = ("step", "mean_reward_selected", "max_reward_selected", "oracle_calls_cum",
                "actives_cum", "scaffolds_cum", "wall_ms")
METRIC_COLUMNS = ("step", "n_actives", "n_scaffolds", "diverse_actives", "picker_seed")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    B: int = 640
    G: int = 10000
    k: int = 64
    h: float = 0.5
    D: float = 0.7
    sigma: float = 128.0
    alpha: float = 1e-4
    M: int = 25
    T: int = 64
    variant: str = "dpp-a"
    shaping: str = "none"
    budget_mode: str = "strict"
    seed: int = 0
    out_dir: str = "runs/run"
    metrics_every: int = 250
    context: int = 2
    smoothing: float = 0.01
    prior_file: str = ""
    oracle_spec: str = ""
    picker_reseeds: int = 1
    record_wall_time: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.shaping not in SHAPING_MODES:
            raise ConfigError(f"shaping must be one of {SHAPING_MODES}, got {self.shaping!r}")
        if self.budget_mode not in BUDGET_MODES:
            raise ConfigError(f"budget_mode must be one of {BUDGET_MODES}, got {self.budget_mode!r}")
        for name in ("B", "G", "k", "T", "M", "metrics_every", "context", "picker_reseeds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.k > self.B:
            raise ConfigError(f"k={self.k} exceeds B={self.B}")
        if not 0.0 < self.D <= 1.0:
            raise ConfigError("D must lie in (0, 1]")
        if self.alpha <= 0 or self.smoothing <= 0:
            raise ConfigError("alpha and smoothing must be positive")

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def dumps(self) -> str:
        lines = [f"{f.name} = {_format_value(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"


# Desk scale: the full variant grid runs in minutes on one core. Adam moves each
# tabular logit by about alpha per step, so 1e-4 leaves the policy at the prior
# after 300 steps; 2e-2 is the smallest step size that lifts the mean reward
# from ~0.03 to ~0.5 within that horizon.
PROFILES = {
    "full": {},
    "desk": {"B": 160, "k": 16, "G": 300, "T": 48, "alpha": 2e-2},
}


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _parse_value(name: str, raw: str, typ):
    raw = raw.strip()
    try:
        if typ in (bool, "bool"):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_overrides(pairs: dict[str, str]) -> dict:
    out = {}
    for key, raw in pairs.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _parse_value(key, raw, _FIELD_TYPES[key])
    return out


def load_config(path, profile: str = "full", **overrides) -> RunConfig:
    """Read ``key = value`` lines on top of a profile; unknown keys are errors."""
    pairs = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        pairs[key.strip()] = value
    try:
        values = parse_overrides(pairs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return make_config(profile, **{**values, **overrides})


def make_config(profile: str = "full", **overrides) -> RunConfig:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    return RunConfig(**{**PROFILES[profile], **overrides})


@dataclass(frozen=True)
class StepLog:
    step: int
    mean_reward_selected: float
    max_reward_selected: float
    oracle_calls_cum: int
    actives_cum: int
    scaffolds_cum: int
    wall_ms: int

    def row(self) -> list:
        return [self.step, repr(self.mean_reward_selected), repr(self.max_reward_selected),
                self.oracle_calls_cum, self.actives_cum, self.scaffolds_cum, self.wall_ms]


def rollout_threads() -> int:
    raw = os.environ.get("DPPMB_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"DPPMB_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


class Experiment:
    """One run of the diverse mini-batch selection loop.

    Keeps the mutable training state (policy, optimiser, memory, novelty
    model) and exposes a per-step interface so callers can inspect rollouts
    and selections; :meth:`run` drives the whole schedule and writes outputs.
    """

    def __init__(self, config: RunConfig, spec: OracleSpec | None = None,
                 prior: PolicyParams | None = None):
        config.validate()
        self.config = config
        if spec is None:
            spec = OracleSpec.load(config.oracle_spec) if config.oracle_spec else OracleSpec.default()
        self.spec = spec
        if prior is None:
            if config.prior_file:
                prior = PolicyParams.load(config.prior_file, spec.alphabet)
            else:
                prior = train_prior(prior_corpus(spec), config.smoothing, config.context, spec.alphabet)
        self.prior = prior
        self.policy = prior
        self.adam = AdamState.zeros_like(prior.logits, lr=config.alpha)
        self.oracle = Oracle(spec)
        self.memory = MemoryStore(h=config.h)
        self.rnd = RndState(streams.stream(config.seed, streams.INIT))
        self.step_logs: list[StepLog] = []
        self.reports = []
        self._active_keys: set = set()
        self._active_scaffolds: set = set()

    def rollouts(self, g: int):
        cfg = self.config
        uniforms = np.stack([
            streams.stream(cfg.seed, streams.ROLLOUT, g, b).random(cfg.T) for b in range(cfg.B)
        ])
        threads = min(rollout_threads(), cfg.B)
        if threads == 1:
            return rollout_batch(self.policy, uniforms)
        chunks = np.array_split(np.arange(cfg.B), threads)
        with ThreadPoolExecutor(threads) as pool:
            parts = pool.map(lambda idx: rollout_batch(self.policy, uniforms[idx]), chunks)
            return [t for part in parts for t in part]

    def select(self, g: int, molecules) -> list[int]:
        cfg = self.config
        rng = streams.stream(cfg.seed, streams.SELECTION, g)
        if cfg.variant == "standalone":
            return sorted(int(i) for i in rng.choice(len(molecules), size=cfg.k, replace=False))
        return sorted(diverse_minibatch(molecules, cfg.k, KernelVariant.parse(cfg.variant), rng))

    def _evaluate(self, g: int, molecules, indices) -> dict:
        scores = {}
        for i in indices:
            s = self.oracle(molecules[i])
            scores[i] = s
            if self.memory.admit(molecules[i], s.reward, g, s.qed, s.activity):
                if s.qed > 0.5 and s.activity > 0.5:
                    self._active_keys.add(molecules[i].tokens)
                    self._active_scaffolds.add(molecules[i].scaffold.key)
        return scores

    def step(self, g: int) -> StepLog:
        cfg = self.config
        t0 = time.perf_counter()
        trajs = self.rollouts(g)
        molecules = [t.molecule for t in trajs]
        selected = self.select(g, molecules)
        if cfg.budget_mode == "all-scored":
            scores = self._evaluate(g, molecules, range(len(molecules)))
        else:
            scores = self._evaluate(g, molecules, selected)

        extrinsic = [scores[i].reward for i in selected]
        observed = [reshape(cfg.shaping, scores[i].reward, molecules[i], self.memory, self.rnd, cfg.M)
                    for i in selected]
        if cfg.shaping == "tanhrnd":
            self.rnd.update([molecules[i] for i in selected])

        batch = [(trajs[i], r) for i, r in zip(selected, observed)]
        _, grad = reinvent_loss_and_grad(self.policy, self.prior, batch, cfg.sigma)
        params, self.adam = adam_step(self.adam, self.policy.logits, grad)
        self.policy = self.policy.with_logits(params)

        wall = int(round((time.perf_counter() - t0) * 1000)) if cfg.record_wall_time else 0
        entry = StepLog(g, float(np.mean(extrinsic)), float(np.max(extrinsic)), self.oracle.calls,
                        len(self._active_keys), len(self._active_scaffolds), wall)
        self.step_logs.append(entry)
        return entry

    def report(self, g: int):
        cfg = self.config
        rng = streams.stream(cfg.seed, streams.PICKER, g)
        rep = diversity_report(self.memory.entries, g, cfg.D, rng, cfg.picker_reseeds)
        self.reports.append(rep)
        return rep

    def run(self, write: bool = True) -> Path:
        cfg = self.config
        for g in range(1, cfg.G + 1):
            try:
                self.step(g)
            except ArithmeticError as exc:
                raise RuntimeError(f"numerical failure at step {g}: {exc}") from exc
            if g % cfg.metrics_every == 0 or g == cfg.G:
                self.report(g)
        out = Path(cfg.out_dir)
        if write:
            self.write(out)
        return out

    def write(self, out: Path) -> None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.cfg").write_text(self.config.dumps())
        write_csv(out / "steps.csv", STEP_COLUMNS, [s.row() for s in self.step_logs])
        write_csv(out / "metrics.csv", METRIC_COLUMNS, [metrics_row(r, self.config.seed) for r in self.reports])
        self.memory.to_csv(out / "memory.csv")
        self.policy.save(out / "policy.bin")


def metrics_row(rep, picker_seed: int) -> list:
    value = rep.diverse_actives
    value = repr(value) if isinstance(value, float) else value
    return [rep.step, rep.n_actives, rep.n_scaffolds, value, picker_seed]


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_experiment(config: RunConfig) -> Path:
    return Experiment(config).run()


def metrics_from_memory(entries, threshold: float = 0.7, every: int = 250, seed: int = 0,
                        last_step: int | None = None, reseeds: int = 1):
    """Recompute the metrics table from memory entries with the harness's picker streams."""
    last = last_step if last_step is not None else max((e.step for e in entries), default=0)
    steps = list(range(every, last + 1, every))
    if last and (not steps or steps[-1] != last):
        steps.append(last)
    return [diversity_report(entries, g, threshold, streams.stream(seed, streams.PICKER, g), reseeds)
            for g in steps]


__all__ = [
    "RunConfig", "StepLog", "Experiment", "run_experiment", "load_config", "make_config",
    "metrics_from_memory", "active_entries", "PROFILES", "ConfigError",
]
