"""
Regression on a compressed design
=================================

Fit ordinary least squares, ridge, a single compressed estimator and an
averaged one on the same noisy data, then compare the prediction error
``||X beta - X beta_hat||^2`` with the theoretical bounds.
"""

import numpy as np

from sketchreg import (
    ProjectionSpec,
    aclse_fit,
    clse_fit,
    matched_ridge_penalty,
    ols_fit,
    ridge_fit,
    synthetic_design,
    theorem2_bound,
)

# %%
# A design whose Gram matrix is ``diag(1, 1/2, ..., 1/20)``.  The design
# is already in principal-component coordinates, so the spectrum is what
# the bounds need.
x, spectrum = synthetic_design("inverse_index", 40, 20, seed=0)
beta = np.ones(20)
sigma2 = 0.5
rng = np.random.default_rng(1)
y = x.values @ beta + np.sqrt(sigma2) * rng.standard_normal(x.n)


def error(b):
    e = b - beta
    return float(e @ x.gram @ e)


# %%
# With this much noise OLS pays ``sigma2 * p = 10`` in variance.  Compress
# to ``d = 5`` directions instead.  Ridge gets the penalty whose variance
# matches that of the compressed estimator.
d = 5
spec = ProjectionSpec("gaussian", 20, d, seed=2)
fits = {
    "ols": ols_fit(x, y),
    "ridge": ridge_fit(x, y, matched_ridge_penalty(spectrum, d)),
    "clse": clse_fit(x, y, spec),
    "aclse (K=100)": aclse_fit(x, y, spec, K=100),
}
for name, fit in fits.items():
    print(f"{name:>14s}  error {error(fit.beta_original):.4f}  training mse {fit.training_mse:.4f}")

# %%
# The bound holds in expectation over projections and noise, so a single
# draw can land on either side of it.
print(f"theorem 2 bound at d={d}: {theorem2_bound(spectrum, beta, sigma2, d).total:.4f}")
