"""
Relation prediction under the Raw and Filter regimes
====================================================

For every test triple the true relation is ranked among all relations.
The Filter regime first removes other relations known to hold for the same
pair. Ties are split by a configurable policy.
"""

# %%
import numpy as np

from kberel import KnowledgeBase, ModelParams, Vocab, evaluate_relation_prediction, rank_from_scores

# %% Ranks from a score vector
scores = [0.9, 0.5, 0.1]
print("raw rank of relation 1:", rank_from_scores(scores, 1))
print("filtered, relation 0 also true:", rank_from_scores(scores, 1, excluded={0}))
for policy in ("mean", "optimistic", "pessimistic"):
    print(f"tie at the top under {policy}:", rank_from_scores([0.5, 0.5, 0.1], 0, tie_policy=policy))

# %% A full report; relation scores are fixed at -1, -2, -3, -4 for every pair
vocab = Vocab(["a", "b"], ["r0", "r1", "r2", "r3"])
kb = KnowledgeBase(vocab, test=[(0, 0, 1), (0, 1, 1), (0, 3, 1)])
params = ModelParams("DistMult", 1, np.ones((2, 1)), np.array([[-1.0], [-2.0], [-3.0], [-4.0]]))
report = evaluate_relation_prediction(params, kb, dataset="toy")
print([(r.raw_rank, r.filtered_rank) for r in report.ranks])
print("dataset\tmodel\tMRR-f\tMRR-r\tH1-f\tH1-r")
print(report.tsv_line())
