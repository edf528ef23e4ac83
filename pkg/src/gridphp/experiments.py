"""Batch drivers: switching Monte Carlo, the multi-round restriction
pipeline, configuration and report writing."""
from __future__ import annotations

import csv
import dataclasses
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from statsmodels.stats.proportion import proportion_confint

from .formula_core import validate_php
from .layout import Layout, LayoutError, LayoutParams, MiniGraph
from .restriction import (
    SamplingError,
    is_small_image,
    sample_full_restriction,
    sample_partial_restriction,
    verify_full_restriction,
)
from .switching import View, canonical_depth, common_tree, random_family


class ConfigError(ValueError):
    pass


class TrialError(RuntimeError):
    def __init__(self, seed: int, cause: Exception):
        super().__init__(f"trial with seed {seed} failed: {cause}")
        self.seed = seed
        self.cause = cause


class PipelineExhausted(RuntimeError):
    def __init__(self, round_index: int, reason: str):
        super().__init__(f"pipeline exhausted at round {round_index}: {reason}")
        self.round_index = round_index


@dataclass
class ExperimentConfig:
    C: float
    n: int = 451
    delta: int = 1
    R: int = 1
    brick: int = 30
    m: Optional[int] = None  # mini-graph side for toy runs; default from n
    trials: int = 100
    seed: int = 0
    s: int = 1
    t: int = 2
    ell: int = 1
    d: int = 1
    M: int = 1
    family_size: int = 4
    k: Optional[int] = None
    max_per_super: Optional[float] = None
    min_per_pair: Optional[float] = None
    tau_steps: Optional[int] = None
    restart_cap: int = 1000
    workers: int = 1
    out_json: Optional[str] = None
    out_csv: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if data.get("C") is None:
            raise ConfigError("the constant C must be given explicitly")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: Optional[dict] = None) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text()) if path else {}
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("at least one trial is needed")
        if self.m is None:
            try:
                self.layout_params().validate()
            except LayoutError as e:
                raise ConfigError(str(e)) from e
        elif self.m < 1 or self.m % 2 == 0:
            raise ConfigError("m must be a positive odd integer")
        if min(self.s, self.t, self.ell, self.M, self.family_size) < 0:
            raise ConfigError("s, t, ell, M and family_size must be non-negative")

    def layout_params(self) -> LayoutParams:
        return LayoutParams(self.n, self.delta, self.R, self.brick, self.restart_cap)

    def system(self) -> MiniGraph:
        m = self.m if self.m is not None else self.layout_params().m
        return MiniGraph(m, self.delta, self.R, self.n)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def wilson(successes: int, trials: int, alpha: float = 0.05) -> tuple:
    if trials == 0:
        raise ValueError("no rate from zero trials")
    lo, hi = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


@dataclass
class TrialReport:
    kind: str
    config: dict
    rows: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)

    def summarize(self, flag: str) -> None:
        hits = sum(1 for r in self.rows if r[flag])
        n = len(self.rows)
        self.aggregate[flag] = {
            "count": hits,
            "trials": n,
            "rate": hits / n,
            "wilson95": list(wilson(hits, n)),
        }

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "config": self.config, "aggregate": self.aggregate,
             "trials": len(self.rows)},
            indent=2, sort_keys=True,
        )

    def write(self, json_path=None, csv_path=None) -> None:
        if json_path:
            Path(json_path).write_text(self.to_json() + "\n")
        if csv_path and self.rows:
            with open(csv_path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(self.rows[0]))
                w.writeheader()
                w.writerows(self.rows)


def _switch_trial(args) -> dict:
    cfg, seed = args
    rng = random.Random(seed)
    system = cfg.system()
    try:
        pr = sample_partial_restriction(
            system, rng, k=cfg.k, C=cfg.C, max_per_super=cfg.max_per_super,
            min_per_pair=cfg.min_per_pair, cap=cfg.restart_cap, tau_steps=cfg.tau_steps,
        )
        view = View.of(pr)
        parts = random_family(view, rng, cfg.family_size, cfg.t)
        depth, failed = canonical_depth(parts, pr, 2 * cfg.s)
        row = {
            "seed": seed,
            "tau_restarts": pr.restarts["tau"],
            "pi2_restarts": pr.restarts["pi2"],
            "depth": depth,
            "failed": int(failed),
        }
        if cfg.M > 1:
            fams = [parts] + [random_family(view, rng, cfg.family_size, cfg.t)
                              for _ in range(cfg.M - 1)]
            res = common_tree(fams, view, cfg.ell, depth_cap=2 * cfg.s)
            row["common_depth"] = res.tree.depth()
            row["common_failed"] = int(res.failed)
        return row
    except SamplingError:
        raise
    except Exception as e:  # noqa: BLE001
        raise TrialError(seed, e) from e


def _map(fn, items, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=64))


def run_switch_mc(cfg: ExperimentConfig) -> TrialReport:
    """Fraction of trials whose canonical tree needs more than ``2s`` queries."""
    seeds = [cfg.seed + i for i in range(cfg.trials)]
    rows = _map(_switch_trial, [(cfg, s) for s in seeds], cfg.workers)
    rep = TrialReport("switch-mc", cfg.to_dict(), rows)
    rep.summarize("failed")
    if cfg.M > 1:
        rep.summarize("common_failed")
    rep.aggregate["mean_tau_restarts"] = sum(r["tau_restarts"] for r in rows) / len(rows)
    return rep


def run_pipeline(cfg: ExperimentConfig) -> TrialReport:
    """Apply ``d`` full restrictions in a row, checking each reduced instance."""
    rng = random.Random(cfg.seed)
    n = cfg.n
    rows = []
    for rnd in range(1, cfg.d + 1):
        params = LayoutParams(n, cfg.delta, cfg.R, cfg.brick, cfg.restart_cap)
        try:
            params.validate()
        except LayoutError as e:
            raise PipelineExhausted(rnd, f"grid side {n} is too small: {e}") from e
        layout = Layout(params)
        sig, sub, reduced = sample_full_restriction(layout, rng, cfg.restart_cap)
        check = verify_full_restriction(layout, sig, sub)
        php_problems = validate_php(reduced)
        small = all(is_small_image(f) for f in sub.forms.values())
        rows.append({
            "round": rnd,
            "n": n,
            "reduced_n": layout.m,
            "tau_restarts": sig.restarts,
            "axiom_problems": len(check["problems"]),
            "php_problems": len(php_problems),
            "small_images": int(small),
            "valid": int(not check["problems"] and not php_problems and small),
        })
        n = layout.m
    rep = TrialReport("pipeline", cfg.to_dict(), rows)
    rep.aggregate = {
        "rounds": len(rows),
        "final_n": n,
        "all_valid": all(r["valid"] for r in rows),
    }
    return rep
