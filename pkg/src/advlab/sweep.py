"""Width/lambda sweep grids, the long-format CSV schema, and correlation analysis.

A sweep trains the full grid {widths x lambdas x seeds x epoch budgets}
with the mixture objective, always including a lambda=0 standard-training
family per (width, seed, budget) so the cross-family generalization gap
(min test risk over the adversarial family minus min over the standard
family, at the same epoch budget) can be attached to every adversarial
cell.  One CSV row per run per recorded epoch.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .attacks import AttackSpec
from .core import ParameterError
from .data import DatasetHandle
from .loat import LoatSchedule
from .mlp import MlpConfig
from .objectives import ObjectiveSpec, generalization_gap
from .trainer import TrainConfig, train

CSV_SCHEMA_VERSION = "v1"
CSV_COLUMNS = [
    "run_id", "width", "lambda", "seed", "epoch_budget", "epoch",
    "clean_train_loss", "clean_train_acc", "clean_test_loss", "clean_test_acc",
    "fgsm_acc", "pgd_acc", "gamma_hat", "gamma_hat_c", "gamma_hat_m",
    "gamma_ce", "bound_lower", "bound_upper", "gap_ce", "epoch_wall_ms",
]


class InsufficientDataError(ValueError):
    """Too few usable points for a statistic."""


@dataclass(frozen=True)
class SweepSpec:
    widths: tuple
    lambdas: tuple
    seeds: tuple
    epochs_list: tuple
    attack: AttackSpec = AttackSpec()
    schedule: LoatSchedule = LoatSchedule()
    batch_size: int = 128
    lr: float = 0.1
    momentum: float = 0.9

    def __post_init__(self):
        for name in ("widths", "lambdas", "seeds", "epochs_list"):
            values = getattr(self, name)
            if len(values) == 0:
                raise ParameterError(f"{name} must be nonempty")
            if len(set(values)) != len(values):
                warnings.warn(f"duplicate values in {name}; deduplicating")
                object.__setattr__(self, name, tuple(dict.fromkeys(values)))
        if any(not 0.0 <= l <= 1.0 for l in self.lambdas):
            raise ParameterError("lambdas must lie in [0, 1]")


@dataclass(frozen=True)
class CorrelationReport:
    pearson_r: float
    spearman_rho: float
    n_points: int
    epoch_regime: str
    n_excluded: int


def _metrics_every(budget: int) -> int:
    return 1 if budget <= 10 else 25


def _cell_config(spec: SweepSpec, data: DatasetHandle, width: int, lam: float,
                 seed: int, budget: int) -> TrainConfig:
    eval_pgd = AttackSpec(p=spec.attack.p, eps=spec.attack.eps,
                          alpha=spec.attack.alpha, k=spec.attack.k)
    eval_fgsm = AttackSpec(p="inf", eps=spec.attack.eps, alpha=spec.attack.eps, k=1)
    return TrainConfig(
        model=MlpConfig([data.train.dim, width, data.train.num_classes], seed=seed),
        objective=ObjectiveSpec(kind="mixture", lam=lam),
        attack=spec.attack,
        schedule=spec.schedule,
        epochs=budget,
        batch_size=spec.batch_size,
        lr=spec.lr,
        momentum=spec.momentum,
        seed=seed,
        metrics_every=_metrics_every(budget),
        eval_attacks=(("fgsm", eval_fgsm), ("pgd", eval_pgd)),
    )


def _run_cell(args):
    spec, data, width, lam, seed, budget = args
    cfg = _cell_config(spec, data, width, lam, seed, budget)
    _, history = train(cfg, data)
    run_id = f"w{width}_l{lam:g}_s{seed}_e{budget}"
    rows = []
    for rec in history:
        rows.append({
            "run_id": run_id,
            "width": width,
            "lambda": lam,
            "seed": seed,
            "epoch_budget": budget,
            "epoch": rec.epoch,
            "clean_train_loss": rec.clean_train_loss,
            "clean_train_acc": rec.clean_train_acc,
            "clean_test_loss": rec.clean_test_loss,
            "clean_test_acc": rec.clean_test_acc,
            "fgsm_acc": rec.adv_test_acc.get("fgsm"),
            "pgd_acc": rec.adv_test_acc.get("pgd"),
            "gamma_hat": rec.gamma_hat,
            "gamma_hat_c": rec.gamma_hat_c,
            "gamma_hat_m": rec.gamma_hat_m,
            "gamma_ce": rec.gamma_ce,
            "bound_lower": rec.bound_lower,
            "bound_upper": rec.bound_upper,
            "gap_ce": None,
            "epoch_wall_ms": rec.epoch_wall_ms,
        })
    return rows


def run_sweep(spec: SweepSpec, data: DatasetHandle, jobs: int = 1) -> list:
    """Train the full grid plus the lambda=0 family; returns CSV rows."""
    lambdas = tuple(spec.lambdas)
    if 0.0 not in lambdas:
        lambdas = (0.0,) + lambdas
    cells = [(spec, data, w, lam, s, e)
             for w in spec.widths for lam in lambdas
             for s in spec.seeds for e in spec.epochs_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_cell = list(pool.map(_run_cell, cells))
    else:
        per_cell = [_run_cell(c) for c in cells]
    rows = [r for cell_rows in per_cell for r in cell_rows]
    attach_gaps(rows)
    return rows


def _final_rows(rows):
    """Last recorded epoch of every run."""
    last = {}
    for r in rows:
        key = r["run_id"]
        if key not in last or r["epoch"] > last[key]["epoch"]:
            last[key] = r
    return list(last.values())


def attach_gaps(rows) -> None:
    """Fill gap_ce on final-epoch rows of every adversarial family.

    The gap for family (width, lambda>0, budget) is the min final test
    risk over its seeds minus the min over the lambda=0 family's seeds.
    """
    finals = _final_rows(rows)
    by_family = {}
    for r in finals:
        by_family.setdefault((r["width"], r["lambda"], r["epoch_budget"]), []).append(r)
    for (width, lam, budget), members in by_family.items():
        if lam == 0.0:
            continue
        std = by_family.get((width, 0.0, budget))
        if not std:
            continue
        gap = generalization_gap([m["clean_test_loss"] for m in members],
                                 [m["clean_test_loss"] for m in std])
        for m in members:
            m["gap_ce"] = gap


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if r.get(k) is None else r[k]) for k in CSV_COLUMNS})


def read_csv(path) -> list:
    numeric = set(CSV_COLUMNS) - {"run_id"}
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ParameterError(f"CSV missing columns: {missing}")
        for raw in reader:
            row = dict(raw)
            for k in numeric:
                row[k] = float(raw[k]) if raw[k] != "" else None
            for k in ("width", "seed", "epoch_budget", "epoch"):
                if row[k] is not None:
                    row[k] = int(row[k])
            rows.append(row)
    return rows


def correlate(rows, regime: str) -> CorrelationReport:
    """Pearson/Spearman between gamma_ce and the generalization gap.

    regime "early" uses the smallest epoch budget in the CSV, "late" the
    largest; one point per run, taken at its final recorded epoch.
    """
    if regime not in ("early", "late"):
        raise ParameterError("regime must be 'early' or 'late'")
    budgets = sorted({r["epoch_budget"] for r in rows})
    if not budgets:
        raise InsufficientDataError("no rows")
    budget = budgets[0] if regime == "early" else budgets[-1]
    finals = [r for r in _final_rows(rows) if r["epoch_budget"] == budget]
    usable = [r for r in finals if r["gamma_ce"] is not None and r["gap_ce"] is not None]
    excluded = len(finals) - len(usable)
    if len(usable) < 3:
        raise InsufficientDataError(
            f"need >= 3 points with defined gamma_ce and gap_ce, found {len(usable)}")
    x = np.array([r["gamma_ce"] for r in usable])
    y = np.array([r["gap_ce"] for r in usable])
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise InsufficientDataError("zero variance in gamma_ce or gap_ce")
    pearson = stats.pearsonr(x, y).statistic
    spearman = stats.spearmanr(x, y).statistic
    return CorrelationReport(pearson_r=float(pearson), spearman_rho=float(spearman),
                             n_points=len(usable), epoch_regime=regime,
                             n_excluded=excluded)


def least_squares_slope(x, y) -> float:
    """Slope of the least-squares line y = a*x + b."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2 or np.ptp(x) == 0.0:
        raise InsufficientDataError("need >= 2 points with varying x")
    return float(np.polyfit(x, y, 1)[0])


def _slope_over(rows, key, value) -> float:
    pts = [r for r in rows
           if r[key] == value and r["gamma_hat_c"] is not None
           and r["gamma_hat_m"] is not None]
    return least_squares_slope([r["gamma_hat_c"] for r in pts],
                               [r["gamma_hat_m"] for r in pts])


def slopes_by_width(rows) -> dict:
    """Per width: LSQ slope of gamma_hat_m against gamma_hat_c checkpoints."""
    adv = [r for r in rows if r["lambda"] not in (None, 0.0)]
    return {w: _slope_over(adv, "width", w) for w in sorted({r["width"] for r in adv})}


def slopes_by_lambda(rows) -> dict:
    """Per lambda (> 0): LSQ slope of gamma_hat_m against gamma_hat_c checkpoints."""
    adv = [r for r in rows if r["lambda"] not in (None, 0.0)]
    return {l: _slope_over(adv, "lambda", l) for l in sorted({r["lambda"] for r in adv})}
