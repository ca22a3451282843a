# %% [markdown]
# # One metric update, checked against a direct inverse
#
# A triplet (anchor, positive, negative) pulls the anchor towards the positive
# and pushes it from the negative. The update multiplies ``L`` by
# ``(I + gamma A)^-1`` with ``A = a a' - b b'``; the library computes this
# in O(d^2) without forming or inverting a matrix.

# %%
import numpy as np

from opml import Sample, Triplet, hinge_loss, opml_update, transformed_distance
from opml.oracle import direct_opml_update

rng = np.random.default_rng(0)
d = 6
x_t, x_p, x_q = (rng.standard_normal(d) * 0.3 for _ in range(3))
t = Triplet(Sample(x_t, 0), Sample(x_p, 0), Sample(x_q, 1))
L = np.eye(d)
print("loss before:", hinge_loss(L, t))

# %%
L1 = opml_update(L, t, gamma=0.1)
print("loss after: ", hinge_loss(L1, t))
print("D(t, p): %.4f -> %.4f" % (transformed_distance(L, x_t, x_p), transformed_distance(L1, x_t, x_p)))
print("D(t, q): %.4f -> %.4f" % (transformed_distance(L, x_t, x_q), transformed_distance(L1, x_t, x_q)))

# %%
a, b = t.differences
ref = direct_opml_update(L, a, b, 0.1)
print("max |closed form - direct inverse|:", np.abs(L1 - ref).max())
