# %% [markdown]
# # Cold start
#
# A cold-start stream deals each class out in ``parts`` blocks, so it opens
# with a run of a single class during which no triplet exists. COPML learns
# from same-class pairs over that run; OPML sits idle.

# %%
import numpy as np

from opml import SplitSpec, TrainConfig, load_bundled, make_stream, repeated_eval

ds = load_bundled("segment")
for parts in (10, 5, 2):
    split = SplitSpec(mode="coldstart", parts=parts)
    tr, _ = make_stream(ds, split)
    prefix = int(np.argmax(tr.labels != tr.labels[0]))
    e = {a: repeated_eval(ds, a, TrainConfig(), runs=5, split=split).error_rate_mean
         for a in ("opml", "copml")}
    print(f"seg-{parts:<2d} single-class prefix {prefix:4d}  opml {e['opml']:.4f}  copml {e['copml']:.4f}")
