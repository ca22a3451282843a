# %% [markdown]
# # Training on a stream and classifying with k-NN
#
# Split iris 50/50, normalize on the train half, make one pass over the train
# stream and compare k-NN test error under the learned and Euclidean metrics.

# %%
import numpy as np

from opml import SplitSpec, TrainConfig, error_rate, load_bundled, make_stream, normalize, train_opml

ds = load_bundled("iris")
train, test = make_stream(ds, SplitSpec(seed=1))
train, test, params = normalize(train, test)
print(len(train), "train /", len(test), "test, dim", ds.dim)

# %%
L, trace = train_opml(train, TrainConfig(gamma=0.1, record_trace=True))
print("step counts:", dict(trace.counts))
print("k-NN error, Euclidean: %.3f" % error_rate(np.eye(ds.dim), train, test))
print("k-NN error, learned:   %.3f" % error_rate(L, train, test))

# %%
losses = [r.loss for r in trace.triplet_records()]
half = len(losses) // 2
print("mean hinge loss, first half %.3f, second half %.3f" % (np.mean(losses[:half]), np.mean(losses[half:])))
