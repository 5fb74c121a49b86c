"""Bundled benchmark networks and generic dataset loading.

Two small datasets ship with the package: the karate club friendship
network (undirected, 2 factions) and a word-adjacency network of
adjectives and nouns (directed, 2 classes). The word network bundled here
is a synthetic stand-in generated to match the published data's shape
(112 nodes, ~425 directed adjacencies, approximately bipartite with
heterogeneous exceptions); see scripts/make_word_network.py. Larger
corpora (food webs, citation graphs) load from user-supplied files in the
same edge-list/CSV formats.
"""

from __future__ import annotations

from importlib import resources

from .graph import LabelStore, Network, load_labels, load_network

BUNDLED = ("karate", "word")


def _read_data(name: str) -> str:
    return (resources.files("maxbm") / "data" / name).read_text("utf-8")


def karate() -> tuple[Network, LabelStore]:
    """Zachary's karate club: 34 members, 78 friendships, 2 factions."""
    network = load_network(_read_data("karate_edges.txt"), directed=False)
    labels = load_labels(_read_data("karate_labels.csv"), network)
    return network, labels


def word_network() -> tuple[Network, LabelStore]:
    """Adjective/noun adjacency network: 112 words, directed links."""
    network = load_network(_read_data("word_edges.txt"), directed=True)
    labels = load_labels(_read_data("word_labels.csv"), network)
    return network, labels


def load_dataset(name_or_edges: str, labels_path: str | None = None,
                 directed: bool = True) -> tuple[Network, LabelStore]:
    """Load a bundled dataset by name, or a network + label file pair."""
    if name_or_edges in BUNDLED:
        return {"karate": karate, "word": word_network}[name_or_edges]()
    if labels_path is None:
        raise ValueError(
            f"{name_or_edges!r} is not a bundled dataset "
            f"({', '.join(BUNDLED)}); pass an edge file plus a label file")
    with open(name_or_edges, encoding="utf-8") as fh:
        network = load_network(fh.read(), directed=directed)
    with open(labels_path, encoding="utf-8") as fh:
        labels = load_labels(fh.read(), network)
    return network, labels
