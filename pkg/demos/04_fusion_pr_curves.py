"""
Fusing extractor scores with KB embedding scores
================================================

A relation extractor gives every entity pair a score per relation plus
"NA". Its top non-NA prediction is re-scored as
alpha * s_re + (1 - alpha) * f_kbe, where f_kbe is the embedding model's
normalised score for the predicted relation. Sweeping alpha yields one
precision/recall curve per value; alpha = 1 is the extractor alone.
"""

# %%
import numpy as np

from kberel import (FusionConfig, REScoreRow, TrainConfig, curve_auc, generate_synthetic_kb,
                    precision_recall_curve, re_only_ranking, rescore, train)

kb = generate_synthetic_kb(20, "inverse-pair", density=0.5, seed=1)
_, params = train(kb, TrainConfig(model_kind="ComplEx", K=20, epochs=200, lr=0.1, l2=3e-3, seed=1))

# %% A noisy extractor: it knows the pair is related but guesses the direction
rng = np.random.default_rng(0)
names, rels = kb.vocab.entity_names, kb.vocab.relation_names
gold, table = set(), []
for s, r, o in kb.test + kb.valid:
    gold.add((names[s], names[o], rels[r]))
    scores = {rel: float(rng.uniform(0.3, 0.9)) for rel in rels}
    scores["NA"] = float(rng.uniform(0.0, 0.4))
    table.append(REScoreRow(names[s], names[o], scores))

# %% Curves for several alphas
baseline = precision_recall_curve(re_only_ranking(table), gold)
print(f"extractor alone  AUC {curve_auc(baseline):.3f}")
for alpha in (1.0, 0.9, 0.5):
    preds, _ = rescore(table, params, kb.vocab, FusionConfig(alpha))
    points = precision_recall_curve(preds, gold)
    print(f"alpha = {alpha:<4} AUC {curve_auc(points):.3f}  final precision {points[-1][1]:.2f}")
