"""Train / evaluate / monitor / inspect runners and their on-disk artifacts.

Layout of a training output directory::

    <out>/states.csv                  tau-state dictionary (id, history)
    <out>/<objective>/q_table.csv     state_id, action, time_to_go, q_value
    <out>/<objective>/policy.csv      state_id, time_to_go, action
    <out>/<objective>/training_log.csv
    <out>/<objective>/manifest.json   config hash, seed, episodes, sizes
    <out>/<objective>/timings.json    wall-clock seconds (not reproducible)

``evaluate`` adds ``<out>/<objective>/evaluation/`` with ``report.csv``,
``histogram.csv``, ``rollouts.csv``, ``signals.csv`` and ``summary.txt``.
All CSV files are byte-for-byte reproducible for a fixed config and seeds.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from .config import ExperimentConfig
from .gridworld import ACTIONS, quotient, region_of, rollout
from .qlearning import (
    GridEnvironment,
    N_ACTIONS,
    OBJECTIVE_KINDS,
    TrainingResult,
    greedy_policy,
    train,
)
from .stl import Formula, Signal, robustness, robustness_trace, satisfies
from .tau_mdp import (
    MIXED,
    SAT,
    UNSAT,
    TauMDP,
    classify_all,
    enumerate_reachable,
    format_history,
    signed_distances,
)

log = logging.getLogger(__name__)


class ArtifactError(ValueError):
    """Artifacts are missing, malformed or belong to a different config."""


class ConsistencyError(RuntimeError):
    """The report failed its internal double-entry checks."""


def _num(v: float) -> str:
    return repr(float(v))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path: Path) -> List[dict]:
    if not path.is_file():
        raise ArtifactError(f"missing artifact {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# problem construction


@dataclass
class Problem:
    config: ExperimentConfig
    mdp: TauMDP
    build_seconds: float

    @property
    def env(self) -> GridEnvironment:
        c = self.config
        return GridEnvironment(c.layout, c.noise, self.mdp, c.T)


def build_problem(config: ExperimentConfig) -> Problem:
    t0 = time.perf_counter()
    graph = quotient(config.layout)
    start = region_of(config.layout, config.layout.initial)
    mdp = enumerate_reachable(graph, config.tau, start, config.max_states)
    elapsed = time.perf_counter() - t0
    log.info("tau-MDP: %d states (tau=%d) built in %.3fs", mdp.n_states, config.tau, elapsed)
    return Problem(config, mdp, elapsed)


# ---------------------------------------------------------------------------
# training


def write_states(path: Path, mdp: TauMDP) -> None:
    _write_csv(path, ["state_id", "history"],
               ((i, format_history(h)) for i, h in enumerate(mdp.histories)))


def write_q_table(path: Path, Q: np.ndarray) -> None:
    S, A, K = Q.shape
    with open(path, "w", newline="") as fh:
        fh.write("state_id,action,time_to_go,q_value\n")
        for s in range(S):
            fh.write("".join(f"{s},{ACTIONS[a]},{k},{_num(Q[s, a, k])}\n"
                             for a in range(A) for k in range(K)))


def read_q_table(path: Path, shape) -> np.ndarray:
    S, A, K = shape
    Q = np.full(shape, np.nan)
    for row in _read_csv(path):
        try:
            s, k = int(row["state_id"]), int(row["time_to_go"])
            a = ACTIONS.index(row["action"])
            Q[s, a, k] = float(row["q_value"])
        except (KeyError, ValueError, IndexError) as exc:
            raise ArtifactError(f"{path}: malformed row {row}") from exc
    if np.isnan(Q).any():
        raise ArtifactError(f"{path}: Q table incomplete for shape {shape}")
    return Q


def write_policy(path: Path, policy: np.ndarray) -> None:
    S, K = policy.shape
    with open(path, "w", newline="") as fh:
        fh.write("state_id,time_to_go,action\n")
        for s in range(S):
            fh.write("".join(f"{s},{k},{ACTIONS[policy[s, k]]}\n" for k in range(1, K)))


def write_training_log(path: Path, records: List[dict]) -> None:
    header = ["episode", "epsilon", "return", "robustness", "satisfied"]
    _write_csv(path, header, (
        [r["episode"], _num(r["epsilon"]), _num(r["return"]), _num(r["robustness"]),
         int(bool(r["satisfied"]))] for r in records))


def manifest(config: ExperimentConfig, mdp: TauMDP, kind: str) -> dict:
    return {
        "config_name": config.name,
        "config_hash": config.config_hash(),
        "objective": kind,
        "seed": config.schedule.seed,
        "episodes": config.schedule.episodes,
        "T": config.T,
        "tau": config.tau,
        "n_states": mdp.n_states,
        "n_actions": N_ACTIONS,
        "actions": list(ACTIONS),
    }


def objective_seed(seed: int, kind: str) -> List[int]:
    """Independent, reproducible stream per (seed, objective)."""
    return [seed, OBJECTIVE_KINDS.index(kind)]


def run_train(config: ExperimentConfig, out: Path, problem: Problem | None = None) -> Dict[str, TrainingResult]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    problem = problem or build_problem(config)
    write_states(out / "states.csv", problem.mdp)
    results = {}
    for kind in config.objectives:
        d = out / kind
        d.mkdir(exist_ok=True)
        rng = np.random.default_rng(objective_seed(config.schedule.seed, kind))
        t0 = time.perf_counter()
        res = train(problem.env, config.objective(kind), config.schedule, problem.mdp.n_states,
                    kind=kind, r_min=config.r_min, r_max=config.r_max, rng=rng)
        elapsed = time.perf_counter() - t0
        log.info("%s: %d episodes trained in %.2fs", kind, config.schedule.episodes, elapsed)
        write_q_table(d / "q_table.csv", res.Q)
        write_policy(d / "policy.csv", res.policy)
        write_training_log(d / "training_log.csv", res.log)
        (d / "manifest.json").write_text(
            json.dumps(manifest(config, problem.mdp, kind), indent=2, sort_keys=True) + "\n")
        (d / "timings.json").write_text(json.dumps(
            {"tau_mdp_seconds": problem.build_seconds, "training_seconds": elapsed}, indent=2) + "\n")
        results[kind] = res
    return results


# ---------------------------------------------------------------------------
# loading


@dataclass
class TrainedPolicy:
    kind: str
    Q: np.ndarray
    policy: np.ndarray
    manifest: dict
    directory: Path


def find_objectives(artifacts: Path) -> List[Path]:
    artifacts = Path(artifacts)
    if (artifacts / "manifest.json").is_file():
        return [artifacts]
    dirs = sorted(p.parent for p in artifacts.glob("*/manifest.json"))
    if not dirs:
        raise ArtifactError(f"no trained policies under {artifacts}")
    return dirs


def load_policy(directory: Path, config: ExperimentConfig, mdp: TauMDP) -> TrainedPolicy:
    directory = Path(directory)
    try:
        man = json.loads((directory / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"cannot read manifest in {directory}: {exc}") from exc
    if man.get("config_hash") != config.config_hash():
        raise ArtifactError(f"{directory} was trained with a different configuration")
    if man.get("n_states") != mdp.n_states or man.get("T") != config.T:
        raise ArtifactError(f"{directory}: state space or horizon does not match the config")
    states_csv = directory / "states.csv"
    if not states_csv.is_file():
        states_csv = directory.parent / "states.csv"
    rows = _read_csv(states_csv)
    if [r["history"] for r in rows] != [format_history(h) for h in mdp.histories]:
        raise ArtifactError(f"{states_csv} does not match the tau-MDP built from the config")
    Q = read_q_table(directory / "q_table.csv", (mdp.n_states, N_ACTIONS, config.T + 1))
    return TrainedPolicy(man["objective"], Q, greedy_policy(Q), man, directory)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class RolloutRecord:
    index: int
    robustness: float
    satisfied: bool
    er_window: float
    signal: Signal


@dataclass
class EvaluationReport:
    kind: str
    records: List[RolloutRecord]
    bin_edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int
    timings: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def p_hat(self) -> float | None:
        if not self.records:
            return None
        return sum(r.robustness > 0 for r in self.records) / self.n

    @property
    def robustness(self) -> np.ndarray:
        return np.array([r.robustness for r in self.records])

    @property
    def mean(self) -> float | None:
        return float(self.robustness.mean()) if self.records else None

    @property
    def std(self) -> float | None:
        return float(self.robustness.std()) if self.records else None

    @property
    def er(self) -> float | None:
        """Monte-Carlo ER: mean over rollouts of the outer combination of the
        per-window robustness of the inner formula."""
        return float(np.mean([r.er_window for r in self.records])) if self.records else None


def histogram(values: np.ndarray, r_min: float, r_max: float, width: float):
    """Fixed-width bins from ``r_min``; values outside go to under/overflow."""
    n_bins = max(1, math.ceil((r_max - r_min) / width - 1e-9))
    edges = r_min + width * np.arange(n_bins + 1)
    counts = np.zeros(n_bins, dtype=np.int64)
    under = over = 0
    for v in values:
        if v < r_min:
            under += 1
        elif v > edges[-1]:
            over += 1
        else:
            counts[min(int((v - r_min) // width), n_bins - 1)] += 1
    return edges, counts, under, over


def _window_objective(sig: Signal, psi: Formula, outer: str) -> float:
    vals = robustness_trace(sig, psi)
    return float(vals.max() if outer == "F" else vals.min())


def evaluate_policy(config: ExperimentConfig, mdp: TauMDP, trained: TrainedPolicy,
                    n_rollouts: int) -> EvaluationReport:
    if n_rollouts < 0:
        raise ValueError("rollout count must be non-negative")
    pol = trained.policy
    t0 = time.perf_counter()
    records = []
    for i in range(n_rollouts):
        rng = np.random.default_rng([config.eval_seed, i])
        ep = rollout(config.layout, config.noise, lambda sid, k: int(pol[sid, k]), config.T, rng, mdp)
        rob = robustness(ep.signal, config.phi)
        sat = satisfies(ep.signal, config.phi)
        records.append(RolloutRecord(i, rob, sat, _window_objective(ep.signal, config.psi, config.outer),
                                     ep.signal))
    elapsed = time.perf_counter() - t0
    edges, counts, under, over = histogram([r.robustness for r in records], config.r_min,
                                           config.r_max, config.bin_width)
    report = EvaluationReport(trained.kind, records, edges, counts, under, over,
                              {"evaluation_seconds": elapsed})
    check_report(report)
    return report


def check_report(report: EvaluationReport) -> None:
    """Double-entry checks: Boolean and quantitative verdicts agree, and the
    aggregates match independent recomputation."""
    for r in report.records:
        if (r.robustness > 0 and not r.satisfied) or (r.robustness < 0 and r.satisfied):
            raise ConsistencyError(f"rollout {r.index}: robustness {r.robustness} but satisfied={r.satisfied}")
    if not report.records:
        return
    n_sat = sum(r.satisfied for r in report.records)
    if round(report.p_hat * report.n) != n_sat:
        raise ConsistencyError("p_hat * N differs from the number of satisfying rollouts")
    if abs(report.mean - math.fsum(report.robustness) / report.n) > 1e-12:
        raise ConsistencyError("mean robustness differs from the arithmetic mean of the records")
    if int(report.counts.sum()) + report.underflow + report.overflow != report.n:
        raise ConsistencyError("histogram counts do not add up to the rollout count")


def _opt(v):
    return "" if v is None else _num(v)


def write_report(report: EvaluationReport, directory: Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _write_csv(d / "report.csv",
               ["objective", "rollouts", "p_hat_defined", "p_hat", "satisfied_count",
                "mean_robustness", "std_robustness", "min_robustness", "max_robustness", "er"],
               [[report.kind, report.n, int(report.p_hat is not None), _opt(report.p_hat),
                 sum(r.satisfied for r in report.records), _opt(report.mean), _opt(report.std),
                 _opt(report.robustness.min() if report.n else None),
                 _opt(report.robustness.max() if report.n else None), _opt(report.er)]])
    rows = [["-inf", _num(report.bin_edges[0]), report.underflow]]
    rows += [[_num(lo), _num(hi), int(c)]
             for lo, hi, c in zip(report.bin_edges[:-1], report.bin_edges[1:], report.counts)]
    rows.append([_num(report.bin_edges[-1]), "inf", report.overflow])
    _write_csv(d / "histogram.csv", ["bin_lo", "bin_hi", "count"], rows)
    _write_csv(d / "rollouts.csv", ["rollout", "robustness", "satisfied", "er_window"],
               ([r.index, _num(r.robustness), int(r.satisfied), _num(r.er_window)]
                for r in report.records))
    with open(d / "signals.csv", "w", newline="") as fh:
        fh.write("rollout,t,x,y\n")
        for r in report.records:
            for k, (x, y) in enumerate(r.signal.samples):
                fh.write(f"{r.index},{r.signal.t0 + k},{_num(x)},{_num(y)}\n")
    (d / "summary.txt").write_text(summary_text(report) + "\n")


def summary_text(report: EvaluationReport) -> str:
    lines = [f"objective: {report.kind}", f"rollouts: {report.n}"]
    if report.p_hat is None:
        lines.append("p_hat: undefined (no rollouts)")
    else:
        lines += [
            f"p_hat: {report.p_hat:.4f}",
            f"mean robustness: {report.mean:.4f}",
            f"std robustness: {report.std:.4f}",
            f"ER (window objective): {report.er:.4f}",
        ]
        if report.underflow or report.overflow:
            lines.append(f"outside histogram range: {report.underflow} below, {report.overflow} above")
    for k, v in report.timings.items():
        lines.append(f"{k}: {v:.3f}")
    return "\n".join(lines)


def run_evaluate(config: ExperimentConfig, artifacts: Path, n_rollouts: int | None = None,
                 problem: Problem | None = None) -> Dict[str, EvaluationReport]:
    problem = problem or build_problem(config)
    n = config.rollouts if n_rollouts is None else n_rollouts
    reports = {}
    for d in find_objectives(artifacts):
        trained = load_policy(d, config, problem.mdp)
        rep = evaluate_policy(config, problem.mdp, trained, n)
        write_report(rep, d / "evaluation")
        reports[trained.kind] = rep
    return reports


# ---------------------------------------------------------------------------
# inspection


@dataclass
class StateTable:
    mdp: TauMDP
    classes: List[str]
    distances: np.ndarray

    def counts(self) -> Dict[str, int]:
        return {c: self.classes.count(c) for c in (SAT, UNSAT, MIXED)}


def build_state_table(config: ExperimentConfig, problem: Problem | None = None) -> StateTable:
    problem = problem or build_problem(config)
    sat = classify_all(problem.mdp, config.psi, config.layout)
    dist = signed_distances(problem.mdp.successor_lists(), sat.mask())
    return StateTable(problem.mdp, sat.classes, dist)


def _dist(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return str(int(v))


def write_state_table(table: StateTable, path: Path) -> None:
    _write_csv(Path(path), ["state_id", "history", "class", "signed_distance"],
               ([i, format_history(h), c, _dist(d)]
                for i, (h, c, d) in enumerate(zip(table.mdp.histories, table.classes, table.distances))))


# ---------------------------------------------------------------------------
# monitoring


def monitor(phi: Formula, sig: Signal) -> tuple:
    """``(satisfied, robustness)`` at the first sample of ``sig``."""
    return satisfies(sig, phi), robustness(sig, phi)

