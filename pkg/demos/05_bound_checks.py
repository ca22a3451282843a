# %% [markdown]
# # Numerical checks of the analysis
#
# Randomized checks of the closed form on sampled triplets, and trace-based
# checks of the scalar ranges, norm caps, one-pass against all-triplet
# divergence, loss gap and regret envelope on real training runs.

# %%
from opml.theory import run_suite

report = run_suite(trials=2000)
print(report.table())
print("all asserted checks passed:", report.passed)
