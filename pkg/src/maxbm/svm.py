"""Multiclass maximum-margin classifier over role-mixture features.

Solves  min 0.5*||eta||^2 + (D/n) * sum(xi)  subject to the one-vs-rest
margin constraints  eta_yv.x - eta_y.x >= 1 - delta(y, yv) - xi_v  via
exact cyclic block-coordinate descent on the dual. Dual multipliers are
reported in the stationarity scale: eta_y equals the mu-weighted feature
combination  sum_v (delta(y, y_v) * sum_y' mu_v^y' - mu_v^y) x_v,  with
the redundant own-class multiplier pinned to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import cs_solve_kernel

KKT_TOL = 1e-6
MAX_EPOCHS = 100_000
DEFAULT_D_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)


@dataclass
class ClassifierState:
    """Primal/dual solution of the multiclass margin problem."""

    eta: np.ndarray                # (K, C)
    mu: np.ndarray                 # (n, C) nonnegative duals, mu[v, y_v] = 0
    xi: np.ndarray                 # (n,) slacks
    alpha: np.ndarray              # (n, C) signed combination weights
    regularization: float          # D
    objective: float               # primal value
    dual_objective: float
    gap: float
    epochs: int
    converged: bool
    # largest increase of the descent objective across epochs; the dual
    # decomposition must make monotone progress, so this stays ~0
    descent_slip: float = 0.0
    row_nodes: tuple[int, ...] = field(default_factory=tuple)

    @property
    def n_classes(self) -> int:
        return self.eta.shape[1]


def solve_multiclass(features: np.ndarray, labels: np.ndarray, d_reg: float,
                     n_classes: int, tol: float = KKT_TOL,
                     max_epochs: int = MAX_EPOCHS,
                     warm_alpha: np.ndarray | None = None) -> ClassifierState:
    """Fit coefficients for C classes from labelled feature rows.

    ``n_classes`` may exceed the number of classes present in ``labels``;
    absent classes simply receive no support. ``warm_alpha`` restarts the
    dual solve from a feasible point (e.g. the previous refit's duals).
    Raises on non-finite features or negative D; non-convergence within
    the epoch cap is reported through ``converged``, not raised.
    """
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"features {x.shape} do not match labels {y.shape}")
    if x.shape[0] < 1:
        raise ValueError("need at least one labelled row")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    if d_reg < 0:
        raise ValueError(f"regularization D must be >= 0, got {d_reg}")
    if n_classes < 2:
        raise ValueError(f"need n_classes >= 2, got {n_classes}")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("labels out of range for n_classes")

    n = x.shape[0]
    cost = d_reg / n
    if warm_alpha is None:
        warm_alpha = np.zeros((n, n_classes))
    else:
        warm_alpha = np.ascontiguousarray(warm_alpha, dtype=np.float64)
        if warm_alpha.shape != (n, n_classes):
            raise ValueError("warm_alpha shape mismatch")
    eta, alpha, xi, epochs, primal, dual_min, gap, descent_slip = cs_solve_kernel(
        x, y, cost, n_classes, tol, max_epochs, warm_alpha)

    # alpha is the signed combination weight of each row; recover the
    # constraint multipliers: mu_v^y = -alpha_v^y for y != y_v.
    mu = -alpha
    mu[np.arange(n), y] = 0.0
    mu[mu < 0] = 0.0   # clip projection round-off
    mu += 0.0          # normalize -0.0

    converged = gap <= tol * max(1.0, abs(primal))
    return ClassifierState(eta=eta, mu=mu, xi=xi, alpha=alpha,
                           regularization=float(d_reg),
                           objective=float(primal),
                           dual_objective=float(-dual_min), gap=float(gap),
                           epochs=int(epochs), converged=bool(converged),
                           descent_slip=float(descent_slip))


def classify(eta: np.ndarray, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Predicted class (lowest index wins ties) and per-class scores."""
    scores = eta.T @ np.asarray(x, dtype=np.float64)
    return int(np.argmax(scores)), scores


def multiclass_margin(eta: np.ndarray, x: np.ndarray, y_ref: int) -> float:
    """Score gap between class y_ref and its best competitor."""
    if eta.shape[1] < 2:
        raise ValueError("margin needs at least 2 classes")
    scores = eta.T @ np.asarray(x, dtype=np.float64)
    ref = scores[y_ref]
    rest = np.delete(scores, y_ref)
    return float(ref - rest.max())


def _stratified_folds(labels: np.ndarray, n_folds: int,
                      rng: np.random.Generator) -> list[np.ndarray]:
    """Deterministic stratified fold assignment (round-robin per class)."""
    fold_of = np.empty(labels.shape[0], dtype=np.int64)
    for c in np.unique(labels):
        rows = np.flatnonzero(labels == c)
        rows = rng.permutation(rows)
        fold_of[rows] = np.arange(rows.size) % n_folds
    return [np.flatnonzero(fold_of == f) for f in range(n_folds)]


def cross_validate_accuracy(features: np.ndarray, labels: np.ndarray,
                            d_reg: float, n_classes: int, folds: int,
                            seed: int) -> float:
    """Mean held-out accuracy of one D value under stratified k-fold CV."""
    rng = np.random.default_rng(seed)
    fold_rows = _stratified_folds(labels, folds, rng)
    correct = 0
    total = 0
    for val_rows in fold_rows:
        if val_rows.size == 0:
            continue
        mask = np.ones(labels.shape[0], dtype=bool)
        mask[val_rows] = False
        state = solve_multiclass(features[mask], labels[mask], d_reg, n_classes)
        preds = np.argmax(features[val_rows] @ state.eta, axis=1)
        correct += int(np.sum(preds == labels[val_rows]))
        total += int(val_rows.size)
    return correct / total if total else 0.0


class RegularizationSelector:
    """Repeated D selection over a fixed labelled set.

    The engine re-selects D every outer iteration while the features
    drift slowly, so fold assignments are frozen up front and each
    (D, fold) solve warm-starts from its previous duals. Scoring solves
    use a relaxed gap tolerance; only the final model solve needs full
    KKT precision.
    """

    def __init__(self, labels: np.ndarray, grid, folds: int, seed: int,
                 n_classes: int, tol: float = 1e-3, max_epochs: int = 3000):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.grid = sorted(grid)
        if not self.grid:
            raise ValueError("D grid must be non-empty")
        self.n_classes = n_classes
        self.tol = tol
        self.max_epochs = max_epochs
        counts = np.bincount(self.labels, minlength=n_classes)
        self.smallest_class = int(counts[counts > 0].min())
        self.degenerate = self.smallest_class < 2
        if not self.degenerate:
            folds = min(folds, self.smallest_class)
            rng = np.random.default_rng(seed)
            self.fold_rows = _stratified_folds(self.labels, folds, rng)
            self.train_masks = []
            for val_rows in self.fold_rows:
                mask = np.ones(self.labels.shape[0], dtype=bool)
                mask[val_rows] = False
                self.train_masks.append(mask)
            self._warm: dict[tuple[int, int], np.ndarray] = {}

    def select(self, features: np.ndarray,
               incumbent: float | None = None) -> float:
        """Best D by CV accuracy; ties keep ``incumbent``, else smallest D.

        The incumbent rule stops the selection from flapping between
        grid values across refits when the fold estimates are noisy.
        """
        if self.degenerate:
            return 1.0
        scores = []
        for di, d_reg in enumerate(self.grid):
            correct = 0
            total = 0
            for fi, val_rows in enumerate(self.fold_rows):
                if val_rows.size == 0:
                    continue
                mask = self.train_masks[fi]
                state = solve_multiclass(
                    features[mask], self.labels[mask], d_reg, self.n_classes,
                    tol=self.tol, max_epochs=self.max_epochs,
                    warm_alpha=self._warm.get((di, fi)))
                self._warm[di, fi] = state.alpha
                preds = np.argmax(features[val_rows] @ state.eta, axis=1)
                correct += int(np.sum(preds == self.labels[val_rows]))
                total += int(val_rows.size)
            scores.append(correct / total if total else 0.0)
        best_acc = max(scores)
        if incumbent is not None and incumbent in self.grid \
                and scores[self.grid.index(incumbent)] >= best_acc - 1e-12:
            return float(incumbent)
        for d_reg, acc in zip(self.grid, scores):
            if acc >= best_acc - 1e-12:
                return float(d_reg)
        return float(self.grid[0])


def select_regularization(features: np.ndarray, labels: np.ndarray,
                          grid=DEFAULT_D_GRID, folds: int = 5,
                          seed: int = 0, n_classes: int | None = None) -> float:
    """Pick D by stratified CV accuracy; smallest D wins ties.

    Falls back to D = 1 when any present class has fewer than 2 labelled
    rows (CV folds would be degenerate).
    """
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    selector = RegularizationSelector(labels, grid, folds, seed, n_classes,
                                      tol=KKT_TOL, max_epochs=MAX_EPOCHS)
    return selector.select(np.asarray(features, dtype=np.float64))
