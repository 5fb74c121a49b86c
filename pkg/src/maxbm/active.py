"""Query strategies and the acquire-refit session loop.

A session seeds one labelled node per class, fits the model, then
repeatedly queries the oracle for the label of one node (smallest margin,
random, or largest degree), refits, and records accuracy over the nodes
not yet explored.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .graph import LabelStore, Network

STRATEGIES = ("margin", "random", "degree")


@dataclass
class CurveStep:
    n_acquired: int
    queried_node: int | None
    accuracy: float | None
    margin: float | None


@dataclass
class LearningCurve:
    strategy: str
    seed: int
    steps: list[CurveStep] = field(default_factory=list)

    def accuracies(self) -> list[float | None]:
        return [s.accuracy for s in self.steps]

    def to_csv(self, network: Network) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["strategy", "seed", "n_acquired", "queried_node",
                         "accuracy", "margin"])
        for step in self.steps:
            writer.writerow([
                self.strategy, self.seed, step.n_acquired,
                "" if step.queried_node is None
                else network.node_ids[step.queried_node],
                "" if step.accuracy is None else repr(step.accuracy),
                "" if step.margin is None else repr(step.margin),
            ])
        return buf.getvalue()


class SimulatedOracle:
    """Answers label queries from a ground-truth table."""

    def __init__(self, labels: LabelStore):
        if labels.truth is None:
            raise ValueError("simulated oracle needs ground truth")
        self._truth = labels.truth

    def reveal(self, node: int) -> int:
        try:
            return self._truth[node]
        except KeyError:
            raise KeyError(f"oracle has no label for node {node}") from None


def seed_labels(labels: LabelStore, seed: int) -> LabelStore:
    """Move one uniformly random node per class from truth to acquired."""
    if labels.truth is None:
        raise ValueError("seeding requires ground truth")
    rng = np.random.default_rng(seed)
    out = labels.copy()
    for c in range(labels.n_classes):
        members = sorted(v for v, y in labels.truth.items() if y == c)
        if not members:
            raise ValueError(f"class {labels.class_names[c]!r} has no nodes")
        pick = members[int(rng.integers(len(members)))]
        out.acquired[pick] = c
    return out


def select_query(model: engine.FittedModel, labels: LabelStore,
                 network: Network, strategy: str, seed: int = 0) -> int:
    """Choose the next node to label; ties break to the lowest index."""
    unlabelled = [v for v in range(network.n_nodes)
                  if v not in labels.acquired]
    if not unlabelled:
        raise ValueError("no unlabelled nodes left to query")

    if strategy == "random":
        rng = np.random.default_rng(seed)
        return unlabelled[int(rng.integers(len(unlabelled)))]
    if strategy == "degree":
        degrees = network.degree[unlabelled]
        return unlabelled[int(np.argmax(degrees))]
    if strategy == "margin":
        preds = engine.predict_unlabeled(model, labels)
        best_v, best_m = unlabelled[0], np.inf
        for v in unlabelled:
            margin = preds[v][1]
            if margin < best_m:
                best_v, best_m = v, margin
        return best_v
    raise ValueError(f"unknown strategy {strategy!r}; expected one of "
                     f"{STRATEGIES}")


def _accuracy_on_unexplored(model: engine.FittedModel,
                            labels: LabelStore) -> float | None:
    """Share of not-yet-acquired truth nodes predicted correctly."""
    if labels.truth is None:
        return None
    preds = engine.predict_unlabeled(model, labels)
    hits = 0
    total = 0
    for v, truth_class in labels.truth.items():
        if v in labels.acquired:
            continue
        total += 1
        if preds[v][0] == truth_class:
            hits += 1
    return hits / total if total else None


def _query_seed(seed: int, step: int) -> int:
    return int(np.random.SeedSequence((seed, step, 0xacce))
               .generate_state(1)[0])


def run_session(network: Network, labels: LabelStore, strategy: str,
                budget: int, cfg: engine.FitConfig,
                oracle: SimulatedOracle | None = None) -> LearningCurve:
    """Seed, fit, then acquire ``budget`` labels one at a time.

    Accuracy over unexplored nodes is recorded before each acquisition
    and once after the last, giving budget + 1 curve points.
    """
    if labels.truth is None and oracle is None:
        raise ValueError("run_session needs ground truth or an oracle")
    session = seed_labels(labels, cfg.seed)
    n_free = network.n_nodes - len(session.acquired)
    if budget > n_free:
        raise ValueError(f"budget {budget} exceeds the {n_free} available "
                         f"unlabelled nodes")
    oracle = oracle or SimulatedOracle(labels)

    curve = LearningCurve(strategy=strategy, seed=cfg.seed)
    model = engine.fit(network, session, cfg)
    for step in range(budget):
        query = select_query(model, session, network, strategy,
                             seed=_query_seed(cfg.seed, step))
        _, query_margin = engine.predict_unlabeled(model, session)[query]
        curve.steps.append(CurveStep(
            n_acquired=len(session.acquired), queried_node=query,
            accuracy=_accuracy_on_unexplored(model, session),
            margin=query_margin))
        session.acquired[query] = oracle.reveal(query)
        model = engine.refit(model, session)
    curve.steps.append(CurveStep(
        n_acquired=len(session.acquired), queried_node=None,
        accuracy=_accuracy_on_unexplored(model, session), margin=None))
    return curve
