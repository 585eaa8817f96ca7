"""Closed-form MSE bounds and exact expressions for compressed least squares.

Everything here works in the principal-component basis: the Gram matrix
is ``diag(lambda_1, ..., lambda_p)`` and ``beta`` holds the coefficients in
that basis (rotate first with :func:`sketchreg.design.pc_rotate`).  The
bounds are proved for Gaussian projections with ``N(0, 1/d)`` entries; for
other families they are reported as Gaussian-theory reference values.

Sums are accumulated with :func:`math.fsum` to avoid cancellation when
``p`` is large.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _io
from .design import NoiseModel, as_spectrum
from .errors import DimError, InvalidParameter, NumericalError

KINDS = ("thm1_bound", "thm2_bound", "exact_thm3", "ridge_exact", "orthonormal_exact", "thm4_bound")

__all__ = [
    "MseReport",
    "ShrinkageFactors",
    "EtaEstimates",
    "TauEstimate",
    "theorem1_bound",
    "shrinkage_factors",
    "theorem2_bound",
    "ridge_mse",
    "exact_mse_from_eta",
    "orthonormal_mse",
    "theorem4_bound",
    "optimal_dense_vector",
    "matched_ridge_penalty",
]


@dataclass(frozen=True, eq=False)
class MseReport:
    """Variance term plus per-direction bias; ``total`` is their sum."""

    kind: str
    variance_term: float
    bias_per_direction: np.ndarray
    total: float
    stderr: float = 0.0

    @property
    def bias(self):
        return math.fsum(self.bias_per_direction)

    def to_csv(self, eigenvalues, beta):
        lines = ["i,lambda,beta,bias"]
        for i, (lam, b, bias) in enumerate(zip(eigenvalues, beta, self.bias_per_direction), start=1):
            lines.append(",".join([str(i)] + [_io.format_float(v) for v in (lam, b, bias)]))
        lines.append("variance,,," + _io.format_float(self.variance_term))
        lines.append("total,,," + _io.format_float(self.total))
        return "\n".join(lines) + "\n"


def _report(kind, variance, bias, stderr=0.0):
    bias = np.asarray(bias, dtype=float)
    if variance < 0 or np.any(bias < 0):
        raise NumericalError(f"{kind}: negative MSE component")
    return MseReport(kind, float(variance), bias, float(variance) + math.fsum(bias), float(stderr))


@dataclass(frozen=True, eq=False)
class ShrinkageFactors:
    w: np.ndarray
    d: int


@dataclass(frozen=True, eq=False)
class EtaEstimates:
    """Monte Carlo estimates of the diagonal ``T = diag(1/eta_i)``.

    ``stderr`` is the standard error of each ``eta_i`` (delta method).
    """

    eta: np.ndarray
    stderr: np.ndarray
    num_samples: int
    d: int
    eigenvalues: np.ndarray
    resamples: int = 0

    @property
    def ratio(self):
        """``lambda_i / eta_i``."""
        return self.eigenvalues / self.eta

    @property
    def ratio_stderr(self):
        return self.eigenvalues * self.stderr / self.eta**2

    @property
    def trace_identity(self):
        """``sum_i lambda_i / eta_i``, which equals ``d`` in expectation."""
        return math.fsum(self.ratio)

    @property
    def trace_stderr(self):
        return float(np.sqrt(np.sum(self.ratio_stderr**2)))


@dataclass(frozen=True)
class TauEstimate:
    """Variance factor ``tau = sum (lambda_i/eta_i)^2`` of the averaged estimator."""

    tau: float
    stderr: float
    d: int
    p: int

    def __post_init__(self):
        lo, hi = self.bounds
        slack = 3 * self.stderr + 1e-12 * hi
        if not (lo - slack <= self.tau <= hi + slack):
            raise InvalidParameter(f"tau={self.tau} outside [{lo}, {hi}] beyond 3 stderr")

    @property
    def bounds(self):
        return (self.d**2 / self.p, float(self.d))


def _noise(noise):
    return noise.sigma2 if isinstance(noise, NoiseModel) else NoiseModel(float(noise)).sigma2


def _prep(spectrum, beta):
    spectrum = as_spectrum(spectrum)
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size != spectrum.p:
        raise DimError(f"beta has length {beta.size}, spectrum has {spectrum.p}")
    return spectrum, beta


def _check_d(d, p=None):
    if not (isinstance(d, (int, np.integer)) and d >= 1):
        raise InvalidParameter(f"d must be an integer >= 1, got {d!r}")
    if p is not None and d > p:
        raise InvalidParameter(f"d={d} exceeds p={p}")


def theorem1_bound(spectrum, beta, noise, d):
    """``sigma^2 d + ||X beta||^2 / d + trace(X'X) ||beta||^2 / d``."""
    spectrum, beta = _prep(spectrum, beta)
    _check_d(d, spectrum.p)
    lam, s = spectrum.eigenvalues, spectrum.trace_sigma
    return _report("thm1_bound", _noise(noise) * d, beta**2 * (lam + s) / d)


def shrinkage_factors(spectrum, d):
    """Per-direction shrinkage factors ``w_i`` of the improved bound.

    Evaluated in the eigenvalue form and in the variance-proportion form
    ``alpha_i = lambda_i / s``; the two must agree to 1e-12.
    """
    spectrum = as_spectrum(spectrum)
    _check_d(d)
    lam, s, a = spectrum.eigenvalues, spectrum.trace_sigma, spectrum.alphas
    inv = 1.0 / d
    num = (1 + inv) * lam**2 + (1 + 2 * inv) * lam * s + s**2 * inv
    den = (d + 2 + inv) * lam**2 + 2 * (1 + inv) * lam * s + s**2 * inv
    w = num / den
    w_alpha = ((1 + inv) * a**2 + (1 + 2 * inv) * a + inv) / ((d + 2 + inv) * a**2 + 2 * (1 + inv) * a + inv)
    if np.max(np.abs(w - w_alpha)) > 1e-12:
        raise NumericalError("shrinkage factor forms disagree beyond 1e-12")
    return ShrinkageFactors(w, int(d))


def theorem2_bound(spectrum, beta, noise, d):
    """``sigma^2 d + sum_i beta_i^2 lambda_i w_i``."""
    spectrum, beta = _prep(spectrum, beta)
    _check_d(d, spectrum.p)
    w = shrinkage_factors(spectrum, d).w
    return _report("thm2_bound", _noise(noise) * d, beta**2 * spectrum.eigenvalues * w)


def ridge_mse(spectrum, beta, noise, lam):
    """Exact fixed-design MSE of ridge regression with penalty ``lam``."""
    spectrum, beta = _prep(spectrum, beta)
    if not (np.isfinite(lam) and lam >= 0):
        raise InvalidParameter(f"ridge penalty must be >= 0, got {lam}")
    ev = spectrum.eigenvalues
    with np.errstate(invalid="ignore", divide="ignore"):
        keep = np.where(ev + lam > 0, ev / (ev + lam), 0.0)
        shrink = np.where(ev + lam > 0, lam / (ev + lam), 1.0)
    variance = _noise(noise) * math.fsum(keep**2)
    return _report("ridge_exact", variance, beta**2 * ev * shrink**2)


def exact_mse_from_eta(spectrum, beta, noise, eta):
    """``sigma^2 d + sum_i beta_i^2 lambda_i (1 - lambda_i/eta_i)`` with estimated ``eta``.

    ``stderr`` propagates the per-direction errors of ``eta`` assuming
    independence across directions.
    """
    spectrum, beta = _prep(spectrum, beta)
    if eta.eta.size != spectrum.p:
        raise DimError("eta and spectrum have different lengths")
    lam = spectrum.eigenvalues
    factor = np.clip(1.0 - lam / eta.eta, 0.0, None)
    stderr = float(np.sqrt(np.sum((beta**2 * lam * eta.ratio_stderr) ** 2)))
    return _report("exact_thm3", _noise(noise) * eta.d, beta**2 * lam * factor, stderr)


def orthonormal_mse(C, beta, noise, d, p=None):
    """Closed-form CLSE MSE for ``Sigma = C I``: ``sigma^2 d + C sum beta_i^2 (1 - d/p)``."""
    beta = np.asarray(beta, dtype=float).ravel()
    p = beta.size if p is None else int(p)
    if beta.size != p:
        raise DimError(f"beta has length {beta.size}, expected p={p}")
    if not C > 0:
        raise InvalidParameter("C must be positive")
    _check_d(d, p)
    return _report("orthonormal_exact", _noise(noise) * d, C * beta**2 * (1.0 - d / p))


def theorem4_bound(spectrum, beta, noise, d, tau):
    """Bound for the infinitely averaged estimator: ``sigma^2 tau + sum beta_i^2 lambda_i w_i^2``.

    ``tau`` may be a :class:`TauEstimate` or a float in ``[d^2/p, d]``.
    """
    spectrum, beta = _prep(spectrum, beta)
    _check_d(d, spectrum.p)
    if isinstance(tau, TauEstimate):
        if tau.d != d or tau.p != spectrum.p:
            raise DimError("tau estimate was computed for different dimensions")
        value = tau.tau
    else:
        value = float(tau)
        lo, hi = d**2 / spectrum.p, float(d)
        if not lo - 1e-12 * hi <= value <= hi + 1e-12 * hi:
            raise InvalidParameter(f"tau={value} outside [{lo}, {hi}]")
    w = shrinkage_factors(spectrum, d).w
    return _report("thm4_bound", _noise(noise) * value, beta**2 * spectrum.eigenvalues * w**2)


def optimal_dense_vector(spectrum, beta, d):
    """Minimizer ``v`` of ``E||X beta - X phi phi' v||^2`` over ``v`` in R^p.

    ``v_i = beta_i lambda_i / ((1 + 1/d) lambda_i + s/d)``.
    """
    spectrum, beta = _prep(spectrum, beta)
    if not d >= 1:
        raise InvalidParameter(f"d must be >= 1, got {d}")
    lam, s = spectrum.eigenvalues, spectrum.trace_sigma
    return beta * lam / ((1 + 1.0 / d) * lam + s / d)


def matched_ridge_penalty(spectrum, d):
    """Ridge penalty whose variance factor ``sum (lambda_i/(lambda_i+lam))^2`` equals ``d``.

    Returns 0 when ``d`` is at least the rank, where no penalty can match.
    """
    from scipy.optimize import brentq

    spectrum = as_spectrum(spectrum)
    _check_d(d)
    ev = spectrum.eigenvalues
    if d >= spectrum.rank:
        return 0.0

    def gap(log_lam):
        lam = math.exp(log_lam)
        return float(np.sum((ev / (ev + lam)) ** 2)) - d

    lo, hi = math.log(ev[0]) - 60.0, math.log(ev[0]) + 60.0
    return math.exp(brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14))
