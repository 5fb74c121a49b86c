"""Generate the bundled word-adjacency benchmark network.

Synthetic stand-in for the classic adjective/noun adjacency data: 112
words, ~430 directed links (u -> v means u immediately precedes v).
The generator uses four latent word groups so that each class is
heterogeneous, the way the real data is:

  A1  regular adjectives     mostly precede nouns
  A2  postposed adjectives   mostly FOLLOW nouns
  N1  regular nouns          receive from adjectives and compound heads
  N2  compound-head nouns    precede other nouns

A two-class readout of the link structure is ambiguous without labels
(A2 words link like noun-modifiers), which is exactly the regime the
margin-supervised role discovery is built for. Word frequencies are
Zipf-like. Regenerating with the same seed reproduces the committed
files exactly.
"""

import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "maxbm" / "data"

SEED = 20240611
GROUP_SIZES = {"A1": 38, "A2": 10, "A3": 9, "N1": 32, "N2": 13, "N3": 10}
GROUP_CLASS = {"A1": "adjective", "A2": "adjective", "A3": "adjective",
               "N1": "noun", "N2": "noun", "N3": "noun"}
TARGET_EDGES = 430

# P(sender group, receiver group) for one adjacency. Six structural
# groups share two class labels: regular adjectives (A1), postposed
# adjectives that follow nouns (A2), intensifier adjectives that precede
# other adjectives (A3), regular nouns (N1), compound-head nouns that
# precede nouns (N2), and compound-tail nouns that only receive (N3).
PAIR_PROBS = {
    ("A1", "N1"): 0.355,
    ("A1", "N2"): 0.10,
    ("A1", "N3"): 0.06,
    ("N2", "N1"): 0.10,
    ("N2", "N3"): 0.04,
    ("N1", "A2"): 0.08,
    ("N2", "A2"): 0.03,
    ("A2", "N1"): 0.03,
    ("A3", "A1"): 0.05,
    ("A3", "A2"): 0.015,
    ("A3", "N1"): 0.015,
    ("N1", "N1"): 0.03,
    ("N1", "N2"): 0.03,
    ("A1", "A1"): 0.02,
    ("A1", "A2"): 0.015,
}


def zipf_weights(n, exponent, rng):
    ranks = np.arange(1, n + 1, dtype=float)
    w = ranks ** -exponent
    rng.shuffle(w)
    return w / w.sum()


def main():
    rng = np.random.default_rng(SEED)
    groups = [g for g, size in GROUP_SIZES.items() for _ in range(size)]
    n_words = len(groups)
    names = [f"w{i + 1:03d}" for i in range(n_words)]
    members = {g: np.flatnonzero([gg == g for gg in groups])
               for g in GROUP_SIZES}
    out_w = {g: zipf_weights(len(members[g]), 0.7, rng) for g in GROUP_SIZES}
    in_w = {g: zipf_weights(len(members[g]), 0.7, rng) for g in GROUP_SIZES}

    pair_names = list(PAIR_PROBS)
    pair_p = np.array([PAIR_PROBS[p] for p in pair_names])
    pair_p = pair_p / pair_p.sum()

    edges = set()
    while len(edges) < TARGET_EDGES:
        snd_g, rcv_g = pair_names[rng.choice(len(pair_names), p=pair_p)]
        s = members[snd_g][rng.choice(len(members[snd_g]), p=out_w[snd_g])]
        r = members[rcv_g][rng.choice(len(members[rcv_g]), p=in_w[rcv_g])]
        if s != r:
            edges.add((int(s), int(r)))

    # rare words still occur at least twice, following their group pattern
    anchor = {"A1": ("A1", "N1"), "A2": ("N1", "A2"), "A3": ("A3", "A1"),
              "N1": ("A1", "N1"), "N2": ("N2", "N1"), "N3": ("A1", "N3")}
    while True:
        degree = np.zeros(n_words, dtype=int)
        for s, r in edges:
            degree[s] += 1
            degree[r] += 1
        thin = np.flatnonzero(degree < 2)
        if thin.size == 0:
            break
        for v in thin:
            g = groups[v]
            snd_g, rcv_g = anchor[g]
            if g == snd_g:
                partner = members[rcv_g][rng.choice(len(members[rcv_g]),
                                                    p=in_w[rcv_g])]
                pair = (int(v), int(partner))
            else:
                partner = members[snd_g][rng.choice(len(members[snd_g]),
                                                    p=out_w[snd_g])]
                pair = (int(partner), int(v))
            if pair[0] != pair[1]:
                edges.add(pair)

    OUT.mkdir(parents=True, exist_ok=True)
    lines = ["# word adjacency network (directed: sender precedes receiver)"]
    for s, r in sorted(edges):
        lines.append(f"{names[s]} {names[r]}")
    (OUT / "word_edges.txt").write_text("\n".join(lines) + "\n")

    labels = ["node,label"]
    labels += [f"{names[v]},{GROUP_CLASS[groups[v]]}" for v in range(n_words)]
    (OUT / "word_labels.csv").write_text("\n".join(labels) + "\n")
    counts = {}
    for s, r in edges:
        key = (groups[s][0], groups[r][0])
        counts[key] = counts.get(key, 0) + 1
    print(f"wrote {n_words} nodes, {len(edges)} directed adjacencies; "
          f"class-pair counts {counts}")


if __name__ == "__main__":
    main()
