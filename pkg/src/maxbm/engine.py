"""Joint fitting loop: alternate collapsed VB sweeps with margin solving.

Each outer iteration sweeps every interaction once (tilted by the current
classifier duals at labelled endpoints), recomputes node role mixtures,
and refits the multiclass margin classifier on the acquired labels. The
loop monitors the joint objective

    -bound + 0.5*||eta||^2 + (D/n_labelled) * sum(xi)

and stops when its relative improvement drops below ``rel_tol``. In
decoupled mode the sweeps are unsupervised and the classifier is trained
once after the blockmodel has converged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import blockmodel as bm
from . import svm
from .graph import LabelStore, Network

ETA_INIT_SCALE = 0.01


@dataclass(frozen=True)
class FitConfig:
    hp: bm.HyperParams
    d_grid: tuple[float, ...] = svm.DEFAULT_D_GRID
    rel_tol: float = 1e-6
    # the bound is flat across the symmetry-breaking saddles, so the
    # objective rule alone would stop long before the posterior settles;
    # convergence additionally requires the sweep movement to die out
    move_tol: float = 1e-5
    max_outer: int = 200
    seed: int = 0
    supervised: bool = True
    cv_folds: int = 5
    # labelled nodes start with this much extra propensity mass on their
    # class role, steering the posterior toward class-aligned basins
    init_label_boost: float = 10.0
    # exponential smoothing of the supervision tilts; the raw dual
    # feedback loop overshoots into limit cycles at strong D, and
    # averaging the field leaves every joint fixed point unchanged
    tilt_damping: float = 0.5
    # dual-solver epochs per outer iteration; resolving the margin
    # problem to optimality every sweep makes the support set flip
    # discretely and the loop cycle, so the duals advance incrementally
    # and only the final classifier is solved to full KKT precision
    inner_epochs: int = 4
    # how strongly a newly acquired label re-seeds its node's posterior
    # marginals during a warm refit (0 disables injection)
    label_inject_weight: float = 0.5
    # independent initializations for cold fits; the best final joint
    # objective wins (warm refits always continue from their model)
    restarts: int = 3

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")

    def to_dict(self) -> dict:
        return {
            "k_roles": self.hp.k_roles, "alpha": self.hp.alpha,
            "beta": self.hp.beta, "d_grid": list(self.d_grid),
            "rel_tol": self.rel_tol, "move_tol": self.move_tol,
            "max_outer": self.max_outer,
            "seed": self.seed, "supervised": self.supervised,
            "cv_folds": self.cv_folds,
            "init_label_boost": self.init_label_boost,
            "tilt_damping": self.tilt_damping,
            "inner_epochs": self.inner_epochs,
            "label_inject_weight": self.label_inject_weight,
            "restarts": self.restarts,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FitConfig":
        hp = bm.HyperParams(int(doc["k_roles"]), float(doc["alpha"]),
                            float(doc["beta"]))
        return cls(hp=hp, d_grid=tuple(doc["d_grid"]),
                   rel_tol=float(doc["rel_tol"]),
                   move_tol=float(doc.get("move_tol", 1e-5)),
                   max_outer=int(doc["max_outer"]), seed=int(doc["seed"]),
                   supervised=bool(doc["supervised"]),
                   cv_folds=int(doc.get("cv_folds", 5)),
                   init_label_boost=float(doc.get("init_label_boost", 10.0)),
                   tilt_damping=float(doc.get("tilt_damping", 0.5)),
                   inner_epochs=int(doc.get("inner_epochs", 4)),
                   label_inject_weight=float(
                       doc.get("label_inject_weight", 0.5)),
                   restarts=int(doc.get("restarts", 3)))


@dataclass
class FittedModel:
    network: Network
    posterior: bm.EdgeRolePosterior
    counts: bm.ExpectedCounts
    classifier: svm.ClassifierState | None
    mixtures: np.ndarray               # (N, K), rows sum to 1
    objective_trace: list[float]
    config: FitConfig
    n_classes: int
    labelled_nodes: tuple[int, ...] = field(default_factory=tuple)
    converged: bool = True

    @property
    def eta(self) -> np.ndarray:
        if self.classifier is None:
            return np.zeros((self.config.hp.k_roles, self.n_classes))
        return self.classifier.eta

    def role_matrix(self) -> np.ndarray:
        return bm.role_interaction_matrix(self.counts, self.config.hp)


def supervision_tilts(network: Network, acquired: dict[int, int],
                      mu_by_node: dict[int, np.ndarray],
                      eta: np.ndarray) -> np.ndarray:
    """Per-node log-tilt table (N x K) from the classifier duals.

    tilt[v, k] = (1/n_v) * sum_y mu_v^y * (eta[k, y_v] - eta[k, y]);
    rows stay zero for unlabelled nodes and nodes with all-zero duals.
    """
    k = eta.shape[0]
    tilt = np.zeros((network.n_nodes, k))
    deg = network.degree
    for v, y_v in acquired.items():
        mu_v = mu_by_node.get(v)
        if mu_v is None or deg[v] == 0:
            continue
        total = float(mu_v.sum())
        if total == 0.0:
            continue
        tilt[v] = (eta[:, y_v] * total - eta @ mu_v) / deg[v]
    return np.clip(tilt, -bm.TILT_CLAMP, bm.TILT_CLAMP)


def _zero_classifier(k_roles: int, n_classes: int) -> svm.ClassifierState:
    return svm.ClassifierState(
        eta=np.zeros((k_roles, n_classes)), mu=np.zeros((0, n_classes)),
        xi=np.zeros(0), alpha=np.zeros((0, n_classes)), regularization=0.0,
        objective=0.0, dual_objective=0.0, gap=0.0, epochs=0, converged=True)


def _classifier_terms(classifier: svm.ClassifierState | None) -> tuple[float, float]:
    """(0.5*||eta||^2, (D/n)*sum(xi)) for the joint objective."""
    if classifier is None:
        return 0.0, 0.0
    reg = 0.5 * float(np.sum(classifier.eta ** 2))
    n = classifier.xi.shape[0]
    slack = (classifier.regularization / n * float(classifier.xi.sum())
             if n else 0.0)
    return reg, slack


def joint_objective_parts(model: FittedModel) -> tuple[float, float, float]:
    """The three addends: negative bound, regularizer, slack penalty."""
    neg_bound = -bm.collapsed_bound(model.posterior, model.counts,
                                    model.network, model.config.hp)
    reg, slack = _classifier_terms(model.classifier)
    return neg_bound, reg, slack


def joint_objective(model: FittedModel) -> float:
    return sum(joint_objective_parts(model))


def _cv_seed(cfg: FitConfig, n_labelled: int) -> int:
    return int(np.random.SeedSequence((cfg.seed, n_labelled, 0x5eed))
               .generate_state(1)[0])


def _init_node_coherent(network: Network, hp: bm.HyperParams, seed: int,
                        acquired: dict[int, int], boost: float
                        ) -> bm.EdgeRolePosterior:
    """Random start built from per-node role propensities.

    Each node draws a propensity vector over roles; every interaction's
    initial cell distribution is the outer product of its endpoints'
    propensities. Edge-independent random cells would decorrelate each
    node's sender and receiver roles, which seeds degenerate role-split
    basins on symmetrized networks; coupling the init through nodes keeps
    the early dynamics aligned with node-level structure. Labelled nodes
    get ``boost`` extra concentration on their class role.
    """
    rng = np.random.default_rng(seed)
    k = hp.k_roles
    conc = np.ones((network.n_nodes, k))
    for v, y in acquired.items():
        conc[v, y % k] += boost
    propensity = np.empty((network.n_nodes, k))
    for v in range(network.n_nodes):
        propensity[v] = rng.dirichlet(conc[v])
    lam = (propensity[network.senders][:, :, None]
           * propensity[network.receivers][:, None, :])
    return bm.EdgeRolePosterior(lam)


def _inject_label(posterior: bm.EdgeRolePosterior, network: Network,
                  node: int, class_index: int, weight: float) -> None:
    """Blend a newly labelled node's position marginals toward its class role.

    Tilts can only separate roles the coefficients already distinguish,
    so a fresh label gets an explicit foothold: for every interaction
    incident to the node, its side of the cell distribution is mixed
    with the class role. The other endpoint's marginal is preserved.
    """
    k = posterior.k_roles
    role = class_index % k
    boost = np.eye(k)[role]
    for i in np.flatnonzero(network.senders == node):
        cell = posterior.lam[i]
        s_marg = cell.sum(axis=1)
        other = cell.sum(axis=0) / max(cell.sum(), 1e-300)
        cond = np.where(s_marg[:, None] > 0,
                        cell / np.where(s_marg > 0, s_marg, 1.0)[:, None],
                        other[None, :])
        new_marg = (1 - weight) * s_marg + weight * boost
        posterior.lam[i] = new_marg[:, None] * cond
    for i in np.flatnonzero(network.receivers == node):
        cell = posterior.lam[i]
        r_marg = cell.sum(axis=0)
        other = cell.sum(axis=1) / max(cell.sum(), 1e-300)
        cond = np.where(r_marg[None, :] > 0,
                        cell / np.where(r_marg > 0, r_marg, 1.0)[None, :],
                        other[:, None])
        new_marg = (1 - weight) * r_marg + weight * boost
        posterior.lam[i] = cond * new_marg[None, :]


def _extend_duals(warm: FittedModel, labels: LabelStore,
                  n_classes: int) -> np.ndarray | None:
    """Map the warm model's duals onto the grown labelled-row set.

    The margin problem often has near-degenerate optima; restarting the
    duals at zero lets each refit hop between them, flipping the class
    read-out of ambiguous roles. Rows for newly acquired nodes start at
    zero (feasible; caps only tighten with the larger row count after
    rescaling by the D ratio at solve time).
    """
    prev = {v: warm.classifier.alpha[i]
            for i, v in enumerate(warm.classifier.row_nodes)}
    rows = []
    for v in sorted(labels.acquired):
        rows.append(prev.get(v, np.zeros(n_classes)))
    return np.asarray(rows)


def _warm_compatible(warm: FittedModel | None, network: Network,
                     hp: bm.HyperParams) -> bool:
    return (warm is not None and warm.posterior.k_roles == hp.k_roles
            and warm.posterior.n_interactions == network.n_interactions)


def fit(network: Network, labels: LabelStore, cfg: FitConfig,
        warm: FittedModel | None = None,
        new_labels: dict[int, int] | None = None) -> FittedModel:
    """Run the joint inference loop to convergence.

    ``warm`` reuses a previous model's posterior, coefficients and duals
    as the starting point; cold fits run ``cfg.restarts`` independent
    initializations and keep the best final joint objective.
    ``new_labels`` marks labels acquired since the warm model was fit;
    their nodes' posterior marginals are re-seeded toward the class
    role. Supervision only engages when ``cfg.supervised`` and acquired
    labels exist; otherwise this is the plain blockmodel fit.
    """
    if _warm_compatible(warm, network, cfg.hp):
        return _fit_once(network, labels, cfg, warm, new_labels, cfg.seed)
    best: FittedModel | None = None
    best_score = np.inf
    for restart in range(max(1, cfg.restarts)):
        init_seed = (cfg.seed if restart == 0 else int(
            np.random.SeedSequence((cfg.seed, restart, 0xc01d))
            .generate_state(1)[0]))
        model = _fit_once(network, labels, cfg, None, None, init_seed)
        score = joint_objective(model)
        if score < best_score:
            best_score = score
            best = model
    return best


def _fit_once(network: Network, labels: LabelStore, cfg: FitConfig,
              warm: FittedModel | None, new_labels: dict[int, int] | None,
              init_seed: int) -> FittedModel:
    hp = cfg.hp
    n_classes = labels.n_classes
    rng = np.random.default_rng(init_seed)

    d_incumbent: float | None = None
    inherited_alpha: np.ndarray | None = None
    if _warm_compatible(warm, network, hp):
        posterior = warm.posterior.copy()
        eta = warm.eta.copy()
        if cfg.supervised and new_labels:
            for node, class_index in sorted(new_labels.items()):
                _inject_label(posterior, network, node, class_index,
                              cfg.label_inject_weight)
        if warm.classifier is not None and warm.classifier.xi.shape[0] > 0:
            d_incumbent = warm.classifier.regularization
            inherited_alpha = _extend_duals(warm, labels, n_classes)
    else:
        seeding = labels.acquired if cfg.supervised else {}
        posterior = _init_node_coherent(network, hp, init_seed, seeding,
                                        cfg.init_label_boost)
        eta = rng.uniform(-ETA_INIT_SCALE, ETA_INIT_SCALE,
                          size=(hp.k_roles, n_classes))

    acq_nodes = tuple(sorted(labels.acquired))
    acq_classes = np.asarray([labels.acquired[v] for v in acq_nodes],
                             dtype=np.int64)
    has_labels = len(acq_nodes) > 0
    train_inline = cfg.supervised and has_labels

    counts = bm.expected_counts(posterior, network)
    mu_by_node: dict[int, np.ndarray] = {}
    classifier: svm.ClassifierState | None = None
    selector = (svm.RegularizationSelector(
        acq_classes, cfg.d_grid, cfg.cv_folds,
        _cv_seed(cfg, len(acq_nodes)), n_classes)
        if has_labels else None)
    warm_alpha: np.ndarray | None = None
    d_reg: float | None = None

    trace = [-bm.collapsed_bound(posterior, counts, network, hp)]
    converged = False
    tilt: np.ndarray | None = None
    best_obj = np.inf
    best_lam: np.ndarray | None = None
    for _ in range(cfg.max_outer):
        if train_inline:
            raw = supervision_tilts(network, labels.acquired, mu_by_node, eta)
            tilt = (raw if tilt is None
                    else cfg.tilt_damping * raw
                    + (1.0 - cfg.tilt_damping) * tilt)
        _, max_change = bm.vb_sweep(posterior, network, hp,
                                    supervision=tilt, counts=counts)
        counts.rebuild(posterior, network)
        mixtures = bm.node_role_mixtures(posterior, network)

        if train_inline:
            rows = mixtures[list(acq_nodes)]
            if d_reg is None:
                d_reg = selector.select(rows, incumbent=d_incumbent)
                if inherited_alpha is not None:
                    # rescale inherited duals into the new cost caps
                    n_prev = warm.classifier.xi.shape[0]
                    scale = ((d_reg / len(acq_nodes))
                             / (d_incumbent / n_prev))
                    warm_alpha = inherited_alpha * scale
            classifier = svm.solve_multiclass(rows, acq_classes, d_reg,
                                              n_classes,
                                              max_epochs=cfg.inner_epochs,
                                              warm_alpha=warm_alpha)
            classifier.row_nodes = acq_nodes
            warm_alpha = classifier.alpha
            eta = classifier.eta
            mu_by_node = {v: classifier.mu[i] for i, v in enumerate(acq_nodes)}

        neg_bound = -bm.collapsed_bound(posterior, counts, network, hp)
        reg, slack = _classifier_terms(classifier)
        trace.append(neg_bound + reg + slack)
        if trace[-1] < best_obj:
            best_obj = trace[-1]
            best_lam = posterior.lam.copy()

        if len(trace) >= 3 and max_change < cfg.move_tol:
            prev, cur = trace[-2], trace[-1]
            if abs(prev - cur) / max(1.0, abs(prev)) < cfg.rel_tol:
                converged = True
                break
        # the dual/posterior coupling can settle into a limit cycle at
        # strong D; once a full window brings no new objective low, more
        # sweeps are wasted (reported as non-converged via the trace)
        window = 25
        if len(trace) >= 1 + 2 * window:
            recent = min(trace[-window:])
            before = min(trace[-2 * window:-window])
            if recent >= before - cfg.rel_tol * max(1.0, abs(before)):
                break

    # a cycling loop ends at an arbitrary phase; keep the best iterate
    if best_lam is not None and not converged and trace[-1] > best_obj:
        posterior = bm.EdgeRolePosterior(best_lam)
        counts.rebuild(posterior, network)

    mixtures = bm.node_role_mixtures(posterior, network)
    if train_inline:
        # the loop advances the duals incrementally; the model keeps a
        # classifier solved to full KKT precision on the final mixtures
        rows = mixtures[list(acq_nodes)]
        classifier = svm.solve_multiclass(rows, acq_classes, d_reg,
                                          n_classes,
                                          warm_alpha=classifier.alpha)
        classifier.row_nodes = acq_nodes
    elif classifier is None:
        if cfg.supervised or not has_labels:
            classifier = _zero_classifier(hp.k_roles, n_classes)
        else:
            # decoupled mode: single margin fit after the blockmodel settles
            rows = mixtures[list(acq_nodes)]
            d_reg = selector.select(rows, incumbent=d_incumbent)
            classifier = svm.solve_multiclass(rows, acq_classes, d_reg,
                                              n_classes)
            classifier.row_nodes = acq_nodes

    return FittedModel(network=network, posterior=posterior, counts=counts,
                       classifier=classifier, mixtures=mixtures,
                       objective_trace=trace, config=cfg,
                       n_classes=n_classes, labelled_nodes=acq_nodes,
                       converged=converged)


def refit(model: FittedModel, labels: LabelStore) -> FittedModel:
    """Warm-started fit after the acquired label set changed."""
    new_labels = {v: c for v, c in labels.acquired.items()
                  if v not in model.labelled_nodes}
    return fit(model.network, labels, model.config, warm=model,
               new_labels=new_labels)


def predict_unlabeled(model: FittedModel, labels: LabelStore
                      ) -> dict[int, tuple[int, float]]:
    """Class and multiclass margin for every node outside ``acquired``."""
    eta = model.eta
    out: dict[int, tuple[int, float]] = {}
    for v in range(model.network.n_nodes):
        if v in labels.acquired:
            continue
        pred, _ = svm.classify(eta, model.mixtures[v])
        margin = svm.multiclass_margin(eta, model.mixtures[v], pred)
        out[v] = (pred, margin)
    return out


def model_to_snapshot(model: FittedModel, labels: LabelStore) -> dict:
    """Self-contained JSON document for session persistence."""
    return {
        "network": {
            "node_ids": list(model.network.node_ids),
            "senders": model.network.senders.tolist(),
            "receivers": model.network.receivers.tolist(),
            "directed_source": model.network.directed_source,
        },
        "posterior": bm.posterior_to_snapshot(model.posterior,
                                              model.config.hp),
        "eta": model.eta.tolist(),
        "class_names": list(labels.class_names),
        "acquired": {str(v): c for v, c in labels.acquired.items()},
        "truth": (None if labels.truth is None
                  else {str(v): c for v, c in labels.truth.items()}),
        "config": model.config.to_dict(),
        "objective_trace": model.objective_trace,
        "converged": model.converged,
    }


def model_from_snapshot(doc: dict) -> tuple[FittedModel, LabelStore]:
    net_doc = doc["network"]
    network = Network(tuple(net_doc["node_ids"]),
                      np.asarray(net_doc["senders"], dtype=np.int64),
                      np.asarray(net_doc["receivers"], dtype=np.int64),
                      bool(net_doc["directed_source"]))
    posterior, _ = bm.posterior_from_snapshot(doc["posterior"])
    cfg = FitConfig.from_dict(doc["config"])
    labels = LabelStore(
        tuple(doc["class_names"]),
        truth=(None if doc.get("truth") is None
               else {int(v): int(c) for v, c in doc["truth"].items()}),
        acquired={int(v): int(c) for v, c in doc["acquired"].items()})

    counts = bm.expected_counts(posterior, network)
    mixtures = bm.node_role_mixtures(posterior, network)
    eta = np.asarray(doc["eta"], dtype=np.float64)
    classifier = _zero_classifier(cfg.hp.k_roles, labels.n_classes)
    classifier.eta = eta
    model = FittedModel(network=network, posterior=posterior, counts=counts,
                        classifier=classifier, mixtures=mixtures,
                        objective_trace=[float(x) for x in
                                         doc["objective_trace"]],
                        config=cfg, n_classes=labels.n_classes,
                        labelled_nodes=tuple(sorted(labels.acquired)),
                        converged=bool(doc.get("converged", True)))
    return model, labels


def save_snapshot(path: str, model: FittedModel, labels: LabelStore) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_snapshot(model, labels), fh)


def load_snapshot(path: str) -> tuple[FittedModel, LabelStore]:
    with open(path, encoding="utf-8") as fh:
        return model_from_snapshot(json.load(fh))
