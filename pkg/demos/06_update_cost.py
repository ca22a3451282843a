# %% [markdown]
# # Update cost against dimension
#
# Each step costs O(d^2), so doubling d should multiply the time by about
# four once the matrix no longer fits in cache. Numbers depend on the host.

# %%
from opml.timing import REFERENCE_MS, measure_update_times

res = measure_update_times([21, 64, 310, 256, 512, 1024], samples=100, repeats=3)
for d in sorted(res.median_ms):
    ref = REFERENCE_MS.get(d)
    print(f"d={d:5d}  {res.median_ms[d]:8.4f} ms" + (f"  (published {ref} ms)" if ref else ""))
for (d1, d2), r in res.ratios(256).items():
    print(f"time({d2}) / time({d1}) = {r:.2f}")
