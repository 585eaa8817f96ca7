"""
Variance factor of the averaged estimator
=========================================

``tau = sum (lambda_i / eta_i)^2`` multiplies the noise variance in the
error of the infinitely averaged estimator and always lies in
``[d^2/p, d]``.  Where it lands depends on the spectrum.
"""

from sketchreg import McConfig, reproduce_figure

config = McConfig(num_eta_samples=2000, d_grid=(1, 2, 4, 6, 8, 10, 12, 15), base_seed=0)
panels = reproduce_figure("fig3", config)

# %%
# Flat spectra sit on the lower bound, a spike of ``d`` unit variances
# pushes ``tau`` to the upper bound at that ``d``.
for name, table in panels.items():
    print(f"\n{name}")
    print("   d   lower      tau   upper")
    for d, tau, se, lo, hi in table.rows:
        print(f"{int(d):4d}  {lo:6.3f}  {tau:7.3f}  {hi:6.1f}")
