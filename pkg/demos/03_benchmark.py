# %% [markdown]
# # Repeated-split benchmark
#
# Mean k-NN error over reseeded 50/50 splits with gamma picked per run by
# cross-validation on the train half. The acceptance suite uses 100 runs;
# 10 keep this script quick. ``opml bench`` produces the same table.

# %%
from opml import TrainConfig, load_bundled, repeated_eval
from opml.evaluation import DEFAULT_GAMMA_GRID

for name in ("iris", "wine", "breast", "balance", "glass", "pima"):
    ds = load_bundled(name)
    base = repeated_eval(ds, "identity", runs=10)
    ours = repeated_eval(ds, "opml", TrainConfig(), runs=10, gamma_grid=DEFAULT_GAMMA_GRID)
    print(f"{name:8s} euclid {base.error_rate_mean:.3f}  opml {ours.error_rate_mean:.3f}"
          f"±{ours.error_rate_std:.3f}  {ours.time_per_sample_ms:.3f} ms/sample")
