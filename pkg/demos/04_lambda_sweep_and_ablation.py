"""
Lambda sweep and type-1 ablation
================================

Lambda only enters defuzzification, so a sweep re-scores trained models
without retraining.
"""

# %%
from it2mlc import ExperimentConfig, ablation, lambda_sweep, prepare_data, run_pipeline
from it2mlc.synthetic import scene_like

ds = scene_like(n=800, seed=0, noise=6.0)
cfg = ExperimentConfig(dataset="scene-like", seeds=[0],
                       model={"epochs": 40, "ae_epochs": 40})
data = prepare_data(cfg, dataset=ds)
_, results = run_pipeline(cfg, data=data, keep=True)

# %%
sweep = lambda_sweep(cfg, [0.0, 0.1, 0.5, 1.0, 2.0, 5.0], results=results)
print(sweep.table())

# %%
result = ablation(cfg, data=data)
print(result.table())
