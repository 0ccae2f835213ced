"""
Soft groups of entities
=======================

Entities are pooled into a handful of groups through a mapping whose rows
are sparse probability vectors. Sparsemax (rather than softmax) lets most
entries be exactly zero, so an entity can belong to just one or two groups.
"""

import numpy as np

from grouptkg.correlation import CorrEncoderParams, encode_groups, ordered_pairs
from grouptkg.mapper import effective_mapping, entities_to_groups, groups_to_entities
from grouptkg.optim import xavier_init
from grouptkg.tensor import Tensor

rng = np.random.default_rng(1)
n_entities, n_groups, d = 8, 3, 4

raw = Tensor(rng.normal(scale=1.5, size=(n_entities, n_groups)))
M = effective_mapping(raw)
np.set_printoptions(precision=3, suppress=True)
print("mapping (rows sum to one, many exact zeros)\n", M.data)
print("entities per group (mass):", M.data.sum(axis=0))

E = Tensor(rng.normal(size=(n_entities, d)))
G = entities_to_groups(M, E)  # weighted sums of entity rows
print("group table shape", G.shape)

###############################################################################
# The group graph is fully connected: every ordered pair of distinct groups
# exchanges a message weighted by a learned intensity in (0, 1).

I, J = ordered_pairs(n_groups)
print("ordered group pairs:", list(zip(I.tolist(), J.tolist())))

params = CorrEncoderParams(
    W_pair=xavier_init((2 * d, d), rng), b_pair=Tensor(np.zeros(d)),
    conv_kernel=Tensor(rng.uniform(-0.5, 0.5, size=(1, 1, 3))), conv_bias=Tensor(np.zeros(1)),
    W_upd=xavier_init((2 * d, d), rng), b_upd=Tensor(np.zeros(d)),
)
G_new = encode_groups(G, params)

# back onto entities: each entity is a convex mix of its groups
E_mid = groups_to_entities(M, G_new)
print("entity rows after the group stage\n", E_mid.data)
