"""
Training on a synthetic inverse-pair knowledge base
===================================================

The generator emits relation r0 together with its inverse r1: whenever
(a, r0, b) holds, so does (b, r1, a). Predicting which of the two holds for
a pair needs an asymmetric score, so ComplEx solves the task and DistMult
is stuck near chance.
"""

# %%
import time

from kberel import TrainConfig, evaluate_relation_prediction, generate_synthetic_kb, train

kb = generate_synthetic_kb(20, "inverse-pair", density=0.5, seed=0)
print(f"{kb.n} entities, {kb.m} relations, train/valid/test = {len(kb.train)}/{len(kb.valid)}/{len(kb.test)}")

# %% Same optimiser settings for both bilinear models
settings = dict(K=20, epochs=200, lr=0.1, l2=3e-3, seed=0)
for kind in ("ComplEx", "DistMult"):
    start = time.perf_counter()
    report, params = train(kb, TrainConfig(model_kind=kind, **settings))
    ev = evaluate_relation_prediction(params, kb)
    print(f"{kind:9s} loss {report.epoch_losses[0]:.3f} -> {report.epoch_losses[-1]:.3f}  "
          f"filtered Hits@1 {ev.hits1_filtered:.2f}  ({time.perf_counter() - start:.1f} s)")

# %% TransE trains with a margin loss and keeps entity rows on the unit sphere
report, params = train(kb, TrainConfig(model_kind="TransE", K=20, epochs=50, seed=0))
print("TransE mean loss, first and last epoch:", report.epoch_losses[0], report.epoch_losses[-1])
