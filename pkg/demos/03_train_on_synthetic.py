"""
Training the full pipeline on synthetic data
============================================

The estimator (autoencoder plus cardinality regressor) is fitted first and
frozen. The fuzziness initializer then trains under the interval loss.
"""

# %%
from it2mlc import ExperimentConfig, prepare_data, run_pipeline
from it2mlc.harness import format_table
from it2mlc.synthetic import clustered

ds = clustered(200, 10, 3, seed=1)
cfg = ExperimentConfig(dataset="synthetic", split={"mode": "random"}, seeds=[0, 1])
data = prepare_data(cfg, dataset=ds)
print(data.train.n, data.val.n, data.test.n)

# %%
record, results = run_pipeline(cfg, data=data, keep=True)
print(format_table([record]))

# %%
# Estimated cardinalities against the truth on the first test rows.
res = results[0]
print(res.m_hat[:8].round(2))
print(res.Y_test[:8].sum(1))
