"""
Scoring triples with TransE, DistMult and ComplEx
=================================================

All three models score a triple (s, r, o) so that larger means more
plausible. This walk-through builds tiny parameter tables by hand and shows
why DistMult cannot tell a relation from its inverse while ComplEx can.
"""

# %%
import numpy as np

from kberel import ModelParams, score, score_all_relations, score_gradients

# %% TransE: a relation is a translation, the score is minus the L1 distance
transe = ModelParams("TransE", 2, entity=np.array([[1.0, 2.0], [1.0, 3.0]]), relation=np.array([[0.0, 1.0]]))
print("TransE exact translation:", score(transe, (0, 0, 1)))  # 0.0, the best possible

# %% DistMult: a diagonal bilinear form, symmetric in subject and object
distmult = ModelParams("DistMult", 2, entity=np.array([[1.0, 2.0], [2.0, 2.0]]), relation=np.array([[3.0, -1.0]]))
print("DistMult (0,r,1) vs (1,r,0):", score(distmult, (0, 0, 1)), score(distmult, (1, 0, 0)))

# %% ComplEx: rows hold K real parts then K imaginary parts
# e0 = 1, e1 = i and w = i give opposite scores for the two directions
complex_ = ModelParams("ComplEx", 1, entity=np.array([[1.0, 0.0], [0.0, 1.0]]), relation=np.array([[0.0, 1.0]]))
print("ComplEx (0,r,1) vs (1,r,0):", score(complex_, (0, 0, 1)), score(complex_, (1, 0, 0)))

# %% Relation prediction scores every relation for a pair at once
rng = np.random.default_rng(0)
p = ModelParams("ComplEx", 4, rng.uniform(-1, 1, (5, 8)), rng.uniform(-1, 1, (3, 8)))
print("scores for (2, ?, 4):", score_all_relations(p, 2, 4))

# %% Analytic gradients drive training; each is the derivative of the score
g_s, g_r, g_o = score_gradients(distmult, (0, 0, 1))
print("d score / d w_r:", g_r)  # e_s * e_o = [2, 4]
