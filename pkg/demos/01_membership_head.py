"""
The centered-clamp membership head
==================================

Each label neuron subtracts the means of its input and its weights, scales
the result, recentres at 0.5 and clamps to [0, 1].
"""

# %%
import numpy as np

from it2mlc import MembershipHead

head = MembershipHead(np.array([[2.0, 0.0], [-1.0, 1.0]]))
h = np.array([1.0, 3.0])
print("scores     ", head.score(h))
print("memberships", head.apply(h))

# %%
# With all-zero weights and input the score is exactly 0.5.
print(MembershipHead(np.zeros((1, 4))).apply(np.zeros(4)))

# %%
# When a neuron's weights sum to 1, shifting every input by a constant
# leaves its score alone.
w = np.array([[0.25, 0.25, 0.5]])
g = MembershipHead(w)
x = np.array([0.3, -1.0, 2.0])
print(g.score(x), g.score(x + 10.0))

# %%
# Saturated neurons pass no gradient.
d_w, d_alpha, d_h = head.apply_grad(h, np.ones(2))
print("d_alpha", d_alpha)
