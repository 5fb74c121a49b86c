"""Collapsed variational posterior over link-level role pairs.

The role-pair distribution and the per-role node distributions are
integrated out analytically; inference keeps only one categorical
variational factor per interaction (an M x K x K tensor) and the expected
count statistics derived from it. Updates plug expected counts into the
collapsed conditional, optionally tilted by margin-classifier duals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ._kernels import accumulate_counts, cvb_sweep_kernel, cvb_update_edge
from .graph import Network

# supervision log-tilts beyond this would let the classifier override
# the count evidence entirely rather than bias it
TILT_CLAMP = 1.0
# incremental count drift beyond this triggers a full rebuild
DRIFT_TOL = 1e-6


@dataclass(frozen=True)
class HyperParams:
    """Role count and symmetric Dirichlet concentrations."""

    k_roles: int
    alpha: float = 0.1
    beta: float = 0.1

    def __post_init__(self):
        if self.k_roles < 1:
            raise ValueError(f"k_roles must be >= 1, got {self.k_roles}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")


class EdgeRolePosterior:
    """Per-interaction categorical distributions over role pairs."""

    def __init__(self, lam: np.ndarray):
        lam = np.ascontiguousarray(lam, dtype=np.float64)
        if lam.ndim != 3 or lam.shape[1] != lam.shape[2]:
            raise ValueError(f"lambda tensor must be (M, K, K), got {lam.shape}")
        self.lam = lam

    @property
    def n_interactions(self) -> int:
        return self.lam.shape[0]

    @property
    def k_roles(self) -> int:
        return self.lam.shape[1]

    def copy(self) -> "EdgeRolePosterior":
        return EdgeRolePosterior(self.lam.copy())

    def sender_marginals(self) -> np.ndarray:
        """(M, K) marginal role distribution of the sender position."""
        return self.lam.sum(axis=2)

    def receiver_marginals(self) -> np.ndarray:
        """(M, K) marginal role distribution of the receiver position."""
        return self.lam.sum(axis=1)


class ExpectedCounts:
    """Sufficient statistics of the posterior: d, n_vk and role totals."""

    def __init__(self, d: np.ndarray, n_vk: np.ndarray, n_k: np.ndarray):
        self.d = d
        self.n_vk = n_vk
        self.n_k = n_k

    @classmethod
    def zeros(cls, n_nodes: int, k_roles: int) -> "ExpectedCounts":
        return cls(np.zeros((k_roles, k_roles)),
                   np.zeros((n_nodes, k_roles)),
                   np.zeros(k_roles))

    def rebuild(self, posterior: EdgeRolePosterior, network: Network) -> None:
        accumulate_counts(posterior.lam, network.senders, network.receivers,
                          self.d, self.n_vk, self.n_k)

    def copy(self) -> "ExpectedCounts":
        return ExpectedCounts(self.d.copy(), self.n_vk.copy(), self.n_k.copy())

    def drift(self, network: Network) -> float:
        """Worst deviation of the conservation identities."""
        m = network.n_interactions
        err_d = abs(float(self.d.sum()) - m)
        err_n = float(np.max(np.abs(self.n_vk.sum(axis=1) - network.degree)))
        return max(err_d, err_n)


def init_posterior(network: Network, hp: HyperParams, seed: int) -> EdgeRolePosterior:
    """Draw each lambda[i] from a flat Dirichlet over the K^2 cells."""
    rng = np.random.default_rng(seed)
    m = network.n_interactions
    k = hp.k_roles
    lam = rng.dirichlet(np.ones(k * k), size=m).reshape(m, k, k)
    return EdgeRolePosterior(lam)


def expected_counts(posterior: EdgeRolePosterior, network: Network) -> ExpectedCounts:
    """Accumulate d, n_vk and n_k from the posterior marginals."""
    if posterior.n_interactions != network.n_interactions:
        raise ValueError(
            f"posterior covers {posterior.n_interactions} interactions, "
            f"network has {network.n_interactions}")
    counts = ExpectedCounts.zeros(network.n_nodes, posterior.k_roles)
    counts.rebuild(posterior, network)
    return counts


def _check_tilt(tilt: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(tilt)):
        raise ValueError("supervision tilt contains non-finite values")
    return np.clip(tilt, -TILT_CLAMP, TILT_CLAMP)


def update_edge(posterior: EdgeRolePosterior, counts: ExpectedCounts,
                i: int, network: Network, hp: HyperParams,
                tilt: np.ndarray | None = None) -> np.ndarray:
    """Collapsed update of one interaction's role-pair distribution.

    ``tilt`` is a (K, 2) array of log-tilts: column 0 for the sender
    role axis, column 1 for the receiver axis. Counts are adjusted in
    place (remove, update, re-add). Returns the new lambda[i].
    """
    k = posterior.k_roles
    if tilt is None:
        tilt_s = np.zeros(k)
        tilt_r = np.zeros(k)
    else:
        tilt = _check_tilt(np.asarray(tilt, dtype=np.float64))
        tilt_s = np.ascontiguousarray(tilt[:, 0])
        tilt_r = np.ascontiguousarray(tilt[:, 1])
    logits = np.empty((k, k))
    cvb_update_edge(posterior.lam, i,
                    int(network.senders[i]), int(network.receivers[i]),
                    counts.d, counts.n_vk, counts.n_k,
                    hp.alpha, hp.beta, network.n_nodes,
                    tilt_s, tilt_r, logits)
    return posterior.lam[i].copy()


def vb_sweep(posterior: EdgeRolePosterior, network: Network, hp: HyperParams,
             supervision: np.ndarray | None = None,
             counts: ExpectedCounts | None = None
             ) -> tuple[EdgeRolePosterior, float]:
    """One full pass over all interactions in ascending index order.

    ``supervision`` is an optional (N, K) per-node log-tilt table (zero
    rows for unlabelled nodes or inactive duals). Returns the posterior
    and the largest L-inf change of any lambda[i].
    """
    if supervision is None:
        tilt = np.zeros((network.n_nodes, posterior.k_roles))
    else:
        tilt = _check_tilt(np.asarray(supervision, dtype=np.float64))
        tilt = np.ascontiguousarray(tilt)
    if counts is None:
        counts = expected_counts(posterior, network)
    max_change = cvb_sweep_kernel(posterior.lam, network.senders,
                                  network.receivers, counts.d, counts.n_vk,
                                  counts.n_k, hp.alpha, hp.beta,
                                  network.n_nodes, tilt)
    if counts.drift(network) > DRIFT_TOL:
        counts.rebuild(posterior, network)
    return posterior, float(max_change)


def node_role_mixtures(posterior: EdgeRolePosterior, network: Network) -> np.ndarray:
    """Expected per-node role distributions (N x K, rows sum to 1).

    Row v averages the sender marginals of interactions sent by v and the
    receiver marginals of interactions received by v. Nodes with no
    incident interactions get the uniform distribution.
    """
    k = posterior.k_roles
    n_vk = np.zeros((network.n_nodes, k))
    np.add.at(n_vk, network.senders, posterior.sender_marginals())
    np.add.at(n_vk, network.receivers, posterior.receiver_marginals())
    deg = network.degree.astype(np.float64)
    out = np.empty_like(n_vk)
    isolated = deg == 0
    out[~isolated] = n_vk[~isolated] / deg[~isolated, None]
    out[isolated] = 1.0 / k
    return out


def collapsed_bound(posterior: EdgeRolePosterior, counts: ExpectedCounts,
                    network: Network, hp: HyperParams) -> float:
    """Likelihood lower-bound surrogate at the current posterior.

    Evaluates the collapsed Dirichlet-multinomial log evidence at the
    expected counts and adds the entropy of the factorized posterior.
    """
    a, b, k = hp.alpha, hp.beta, hp.k_roles
    n = network.n_nodes
    m = network.n_interactions

    pair_part = (gammaln(k * k * a) - gammaln(k * k * a + m)
                 + float(np.sum(gammaln(a + counts.d))) - k * k * gammaln(a))
    role_part = (k * gammaln(n * b)
                 - float(np.sum(gammaln(n * b + counts.n_k)))
                 + float(np.sum(gammaln(b + counts.n_vk))) - n * k * gammaln(b))

    lam = posterior.lam
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(lam > 0, lam * np.log(lam), 0.0)
    entropy = -float(plogp.sum())

    return pair_part + role_part + entropy


def role_interaction_matrix(counts: ExpectedCounts, hp: HyperParams) -> np.ndarray:
    """Posterior-mean role-pair interaction probabilities (sums to 1)."""
    mat = counts.d + hp.alpha
    return mat / mat.sum()


def posterior_to_snapshot(posterior: EdgeRolePosterior, hp: HyperParams) -> dict:
    """JSON-ready snapshot of the posterior tensor and hyperparameters."""
    return {
        "shape": list(posterior.lam.shape),
        "lambda": posterior.lam.ravel().tolist(),
        "k_roles": hp.k_roles,
        "alpha": hp.alpha,
        "beta": hp.beta,
    }


def posterior_from_snapshot(doc: dict) -> tuple[EdgeRolePosterior, HyperParams]:
    shape = tuple(doc["shape"])
    lam = np.asarray(doc["lambda"], dtype=np.float64).reshape(shape)
    hp = HyperParams(int(doc["k_roles"]), float(doc["alpha"]), float(doc["beta"]))
    return EdgeRolePosterior(lam), hp
