"""
Decoding a service sequence and scoring it
==========================================

A sequence of services becomes a workflow once backward decoding has wired
every required input to a producer. This walk-through generates a small
repository, decodes one random ordering and prints its QoS.
"""

import numpy as np

from dwsc.data import GenSpec, generate
from dwsc.decode import backward_decode, export_dag, validate
from dwsc.qos import fitness, norm_bounds

# a repository of 60 services spread over 4 clusters of servers
ds = generate(GenSpec(n_services=60, n_concepts=60, n_locations=15, n_clusters=4, chain_length=4, seed=1))
repo, task = ds.repo, ds.task
print("provided:", sorted(task.provided), "wanted:", sorted(task.wanted))

# any ordering of the whole repository decodes, since every service is available
rng = np.random.default_rng(0)
ids = repo.service_ids
sequence = tuple(ids[k] for k in rng.permutation(len(ids)))
result = backward_decode(repo, task, sequence)
print(f"{len(sequence)} genes reduced to {len(result.used_order)}:", " ".join(result.used_order))

# the workflow is checked independently of the decoder
ok, problems = validate(repo, task, result.dag)
print("valid:", ok, problems)
print(export_dag(result.dag))

# fitness is normalised against bounds fixed per repository
q = fitness(repo, task, result.dag, norm_bounds(repo, task))
print(f"time {q.total_time:.4f}  cost {q.total_cost:.4f}  fitness {q.fitness:.6f}")

# decoding the reduced sequence again gives the same workflow
again = backward_decode(repo, task, result.used_order)
print("stable:", again.dag == result.dag)
