"""
Four crossovers side by side
============================

Index crossover cuts at random. The distance-guided variants cut where two
neighbouring services sit on the farthest-apart servers; the LCS variant also
refuses to cut through the parents' longest common subsequence.
"""

import numpy as np

from dwsc.data import GenSpec, generate
from dwsc.decode import backward_decode
from dwsc.operators import (
    dg_index_crossover,
    dg_lcs_crossover,
    dg_two_point_crossover,
    gaps,
    index_crossover,
    lcs,
    max_gap_split,
)

ds = generate(GenSpec(n_services=80, n_concepts=60, n_locations=20, n_clusters=5, chain_length=5, seed=3))
repo, task = ds.repo, ds.task
rng = np.random.default_rng(4)


def random_parent():
    ids = repo.service_ids
    return backward_decode(repo, task, tuple(ids[k] for k in rng.permutation(len(ids)))).used_order


p1, p2 = random_parent(), random_parent()
print("p1:", p1)
print("p2:", p2)

# gaps between consecutive genes, and where the widest one lies
print("p1 gaps:", np.round(gaps(repo, p1), 3), "-> cut", max_gap_split(repo, p1))
print("common subsequence:", lcs(p1, p2))

children = {
    "index": index_crossover(p1, p2, rng),
    "dg_index": dg_index_crossover(repo, p1, p2),
    "dg_two_point": dg_two_point_crossover(repo, p1, p2),
    "dg_lcs": dg_lcs_crossover(repo, p1, p2),
}
for name, (c1, c2) in children.items():
    # each child keeps every gene of at least one parent, so it still decodes
    used = backward_decode(repo, task, c1).used_order
    print(f"{name:13s} child1 {len(c1):2d} genes, {len(used)} used")
