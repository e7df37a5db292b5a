"""
Intervals, the interval loss and defuzzification
================================================

A type-1 membership y becomes the interval [y**m_lower, y**m_upper]. The
exponents come from the estimated label count m_hat.
"""

# %%
import numpy as np

from it2mlc import build_interval, defuzzify, derive_fuzzifiers, it2_loss
from it2mlc.it2 import defuzz_scores

L = 6
pair = derive_fuzzifiers(m_hat=2.0, card=2, n_labels=L)
print("fuzzifiers", float(pair.m_lower), float(pair.m_upper))

y = np.array([0.9, 0.5, 0.45, 0.1, 0.05, 0.0])
it2 = build_interval(y, pair)
print("lower", it2.lower.round(4))
print("upper", it2.upper.round(4))

# %%
# The loss is a soft F1 on both bounds, so it lies in [-2, 0].
y_star = np.array([1, 1, 0, 0, 0, 0])
print("loss", it2_loss(it2, y_star))

# %%
# Two intervals with the same midpoint: a positive lambda favours the narrower one.
from it2mlc.it2 import FuzzifierPair, It2Label

two = It2Label(np.array([0.3, 0.4]), np.array([0.6, 0.5]), np.zeros(2),
               FuzzifierPair(np.array(1.0), np.array(1.0)))
for lam in (0.0, 0.1):
    print(lam, defuzz_scores(two, lam))

# %%
# Prediction keeps the top round(m_hat) labels.
pred = defuzzify(it2, m_hat=2.0, lam=0.1)
print(pred.y_hat, pred.k)

# %%
# When every label of an instance shares one fuzzifier pair, the score is
# increasing in y for any lambda <= 1. The top-k set then matches plain
# ranking by y, and lambda only starts to reorder labels above 1.
for lam in (0.0, 0.5, 1.0, 2.0, 5.0):
    print(lam, defuzzify(it2, 3.0, lam).y_hat)
