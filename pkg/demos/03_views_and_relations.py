"""
Augmented views and the relation loss
=====================================

Two views of a graph are built each epoch. The first perturbs attributes
over a graph with weak edges removed. The second perturbs them again over
the diffusion matrix. The relation loss rewards a node for relating to
anchors the same way in both views, and penalizes it for resembling other
nodes.
"""
import numpy as np

from relgc import generate_sbm
from relgc.augment import AugmentConfig, ViewMaker
from relgc.relation import global_anchors, local_anchors, relation_loss, sampling_weights

rng = np.random.default_rng(3)
# dense blocks so every node has enough edges for a 10% deletion to bite
graph = generate_sbm(n=60, k=3, p_in=0.5, p_out=0.02, d=12, seed=3)

# The raw attributes stand in for a pretrained embedding when choosing edges.
maker = ViewMaker(graph, graph.x, AugmentConfig(perturb_scale=0.1, drop_ratio=0.1, eta=0.2, seed=0))
v1, v2 = maker.views(epoch=0)
kept = (v1.s.nnz - graph.n) // 2  # the normalized matrix carries self-loops
print("edges kept in view 1:", kept, "of", graph.num_edges)
print("mean relative attribute change:", np.round(np.mean(np.abs(v1.x / graph.x - 1)), 3))

g_idx = global_anchors(sampling_weights(graph.degrees()), 16, rng)
l_idx = local_anchors(maker.diffusion, 4)

# Identical embeddings in both views: relations agree perfectly, so the
# value is set by how alike different nodes look.
z = rng.normal(size=(graph.n, 8))
print("same embedding in both views :", np.round(relation_loss(z, z, z, z, g_idx, l_idx).item(), 4))

# Unrelated embeddings lose the agreement term.
other = rng.normal(size=(graph.n, 8))
print("unrelated embeddings         :", np.round(relation_loss(z, other, z, other, g_idx, l_idx).item(), 4))

# Collapsed embeddings: agreement is perfect but so is redundancy; they cancel.
flat = np.tile(z[:1], (graph.n, 1))
print("all rows identical           :", np.round(relation_loss(flat, flat, flat, flat, g_idx, l_idx).item(), 4))
