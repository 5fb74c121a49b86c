"""Regenerate the bundled karate club data files from networkx.

Node ids follow the conventional 1..34 numbering; labels are the two
factions after the split.
"""

import pathlib

import networkx as nx

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "maxbm" / "data"


def main():
    graph = nx.karate_club_graph()
    OUT.mkdir(parents=True, exist_ok=True)

    edges = ["# karate club friendships (undirected, 1-indexed members)"]
    for u, v in sorted(graph.edges()):
        edges.append(f"{u + 1} {v + 1}")
    (OUT / "karate_edges.txt").write_text("\n".join(edges) + "\n")

    labels = ["node,label"]
    for v in sorted(graph.nodes()):
        club = graph.nodes[v]["club"].replace(" ", "_")
        labels.append(f"{v + 1},{club}")
    (OUT / "karate_labels.csv").write_text("\n".join(labels) + "\n")
    print(f"wrote {graph.number_of_nodes()} nodes, "
          f"{graph.number_of_edges()} edges")


if __name__ == "__main__":
    main()
