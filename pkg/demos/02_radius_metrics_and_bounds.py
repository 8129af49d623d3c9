"""Track the radius estimators and complexity bounds along a training run.

The per-sample maximal logit gap, averaged over all / correct / wrong
samples, gives the three radius estimates; their relative gap feeds the
closed-form lower/upper complexity bounds.  This script prints how they
move as the model fits.
"""

from advlab import (BoundInputs, MlpConfig, ObjectiveSpec, TrainConfig,
                    complexity_bounds, fr_norm_ce, gamma_ce,
                    radius_estimates, train)
from advlab.data import blob_dataset
from advlab.fisher_rao import UndefinedMetricError

data = blob_dataset(seed=3, n_train=400, n_test=200, d=10, K=5, spread=0.15)

cfg = TrainConfig(
    model=MlpConfig([10, 24, 5], seed=1),
    objective=ObjectiveSpec(kind="standard"),
    epochs=12,
    batch_size=50,
    lr=0.2,
    seed=1,
    metrics_every=2,
)
weights, history = train(cfg, data)

print(f"{'epoch':>5} {'acc':>6} {'g_hat':>7} {'g_C':>7} {'g_M':>7} "
      f"{'Gamma':>7} {'lower':>7} {'upper':>7}")
for rec in history:
    def fmt(v):
        return f"{v:7.3f}" if v is not None else "      -"
    print(f"{rec.epoch:5d} {rec.clean_train_acc:6.3f} {rec.gamma_hat:7.3f} "
          f"{fmt(rec.gamma_hat_c)} {fmt(rec.gamma_hat_m)} {fmt(rec.gamma_ce)} "
          f"{fmt(rec.bound_lower)} {fmt(rec.bound_upper)}")

norm, radius = fr_norm_ce(weights, data.train)
est = radius_estimates(weights, data.train)
print()
print(f"final Fisher-Rao norm {norm:.4f}, ball radius {radius:.4f}")
print(f"radius <= gamma_hat ({radius:.4f} <= {est.gamma_hat:.4f}): "
      f"{radius <= est.gamma_hat + 1e-9}")

try:
    g = gamma_ce(est)
    lo, hi = complexity_bounds(BoundInputs(
        n=est.n, n_correct=est.n_correct, n_wrong=est.n_wrong,
        num_classes=data.train.num_classes, gamma_hat_m=est.gamma_hat_m,
        gamma_ce=g))
    print(f"final bounds: [{lo:.4f}, {hi:.4f}] at Gamma = {g:.4f}")
except UndefinedMetricError as exc:
    # once every training sample is classified correctly the misclassified
    # subset is empty and the relative gap has no defined value
    print(f"final bounds undefined: {exc}")
