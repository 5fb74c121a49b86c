"""Network and label loading.

Networks are immutable interaction lists: every line of an edge file is a
directed sender->receiver interaction between two string node ids.
Undirected inputs are symmetrized (each line becomes two interactions) so
the directed generative machinery downstream applies unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GraphFormatError(ValueError):
    """Raised for malformed edge-list or label input."""


@dataclass(frozen=True)
class Network:
    """Immutable directed interaction list with a dense node index."""

    node_ids: tuple[str, ...]
    senders: np.ndarray          # int64, shape (M,)
    receivers: np.ndarray        # int64, shape (M,)
    directed_source: bool

    def __post_init__(self):
        self.senders.setflags(write=False)
        self.receivers.setflags(write=False)
        deg = np.bincount(self.senders, minlength=self.n_nodes) + \
            np.bincount(self.receivers, minlength=self.n_nodes)
        object.__setattr__(self, "_degree", deg)
        self._degree.setflags(write=False)
        object.__setattr__(
            self, "_index", {nid: i for i, nid in enumerate(self.node_ids)})

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_interactions(self) -> int:
        return int(self.senders.shape[0])

    @property
    def degree(self) -> np.ndarray:
        """Endpoint count per node; sums to 2 * n_interactions."""
        return self._degree

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise KeyError(f"unknown node id {node_id!r}") from None

    def interactions(self) -> list[tuple[int, int]]:
        return list(zip(self.senders.tolist(), self.receivers.tolist()))

    def to_edge_list(self) -> str:
        """Serialize back to edge-list text (one interaction per line)."""
        lines = [f"{self.node_ids[s]} {self.node_ids[r]}"
                 for s, r in zip(self.senders, self.receivers)]
        return "\n".join(lines) + "\n"


@dataclass
class LabelStore:
    """Class names plus ground-truth and acquired node labels.

    ``truth`` is the oracle's knowledge (may be absent for live human
    sessions); ``acquired`` is what the model has been told so far.
    """

    class_names: tuple[str, ...]
    truth: dict[int, int] | None = None
    acquired: dict[int, int] = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise KeyError(f"unknown class label {name!r}") from None

    def copy(self) -> "LabelStore":
        return LabelStore(self.class_names,
                          None if self.truth is None else dict(self.truth),
                          dict(self.acquired))


def load_network(text: str, directed: bool = True) -> Network:
    """Parse edge-list text into a Network.

    Each non-comment line holds two whitespace-separated node tokens.
    Nodes are indexed by first appearance. With ``directed=False`` every
    line contributes both orientations. Duplicate lines are kept as
    multi-interactions; self-loops are rejected.
    """
    index: dict[str, int] = {}
    node_ids: list[str] = []
    senders: list[int] = []
    receivers: list[int] = []

    def idx(token: str) -> int:
        i = index.get(token)
        if i is None:
            i = len(node_ids)
            index[token] = i
            node_ids.append(token)
        return i

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise GraphFormatError(
                f"line {lineno}: expected 2 node tokens, got {len(tokens)}")
        if tokens[0] == tokens[1]:
            raise GraphFormatError(
                f"line {lineno}: self-loop {tokens[0]!r} is not supported")
        s, r = idx(tokens[0]), idx(tokens[1])
        senders.append(s)
        receivers.append(r)
        if not directed:
            senders.append(r)
            receivers.append(s)

    if not senders:
        raise GraphFormatError("edge list contains no interactions")

    return Network(tuple(node_ids),
                   np.asarray(senders, dtype=np.int64),
                   np.asarray(receivers, dtype=np.int64),
                   directed_source=directed)


def load_labels(text: str, network: Network) -> LabelStore:
    """Parse ``node_id,label`` CSV into a LabelStore with full truth.

    An optional ``node,label`` header line is skipped. Class names are
    collected in first-appearance order; ``acquired`` starts empty.
    """
    class_index: dict[str, int] = {}
    class_names: list[str] = []
    truth: dict[int, int] = {}

    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if lines and lines[0].lower().replace(" ", "") in ("node,label", "node_id,label"):
        lines = lines[1:]

    for lineno, line in enumerate(lines, start=1):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise GraphFormatError(
                f"label line {lineno}: expected 'node_id,label', got {line!r}")
        node_id, label = parts
        try:
            v = network.index_of(node_id)
        except KeyError:
            raise GraphFormatError(
                f"label line {lineno}: node {node_id!r} not in network") from None
        c = class_index.get(label)
        if c is None:
            c = len(class_names)
            class_index[label] = c
            class_names.append(label)
        if v in truth and truth[v] != c:
            raise GraphFormatError(
                f"label line {lineno}: node {node_id!r} relabelled "
                f"{class_names[truth[v]]!r} -> {label!r}")
        truth[v] = c

    if len(class_names) < 2:
        raise GraphFormatError(
            f"need at least 2 distinct labels, got {len(class_names)}")

    return LabelStore(tuple(class_names), truth=truth)
