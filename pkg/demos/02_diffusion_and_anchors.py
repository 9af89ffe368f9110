"""
Graph diffusion and anchor sampling
===================================

Relations are measured against anchor nodes. Global anchors are drawn with
a randomly shifted lattice through the inverse CDF of degree-based weights.
Local anchors are each node's strongest neighbours under personalized
PageRank diffusion.
"""
import numpy as np

from relgc import generate_sbm, ppr_diffusion
from relgc.relation import global_anchors, local_anchors, qmc_points, sampling_weights

graph = generate_sbm(n=30, k=3, seed=1)
print(f"{graph.n} nodes, {graph.num_edges} edges")

# U = eta (I - (1 - eta) S)^-1 spreads each node's mass over its neighbourhood.
u = ppr_diffusion(graph.s, eta=0.2)
print("row sums of U lie in", np.round([u.sum(1).min(), u.sum(1).max()], 3))
print("diagonal share of U:", np.round(np.trace(u) / u.sum(), 3))

# Low-degree nodes get larger weights w = beta^log(1 + deg).
sw = sampling_weights(graph.degrees(), beta=0.8)
order = np.argsort(graph.degrees())
print("lowest degree node :", order[0], "p =", np.round(sw.p[order[0]], 4))
print("highest degree node:", order[-1], "p =", np.round(sw.p[order[-1]], 4))

# Eight lattice points, all shifted by one uniform draw.
print("lattice at omega=0.1:", np.round(qmc_points(8, 0.1), 4))

# Lattice draws track the weights more closely than independent draws.
rng = np.random.default_rng(0)
m = 64
qmc = np.bincount(global_anchors(sw, m, rng), minlength=graph.n) / m
iid = np.bincount(rng.choice(graph.n, m, p=sw.p), minlength=graph.n) / m
print("squared error, lattice vs iid:",
      np.round(np.sum((qmc - sw.p) ** 2), 5), np.round(np.sum((iid - sw.p) ** 2), 5))

table = local_anchors(u, 4)
same = np.mean(graph.labels[table] == graph.labels[:, None])
print(f"local anchors sharing the node's block: {same:.0%}")
