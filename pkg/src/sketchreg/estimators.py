"""Least-squares estimators: OLS, ridge, row-compressed OLS, CLSE and ACLSE.

The compressed least squares estimator (CLSE) regresses ``Y`` on the
column-compressed design ``X phi`` and maps the ``d`` coefficients back,
``beta = phi @ gamma``.  The averaged estimator (ACLSE) is the plain mean
of ``K`` CLSE coefficient vectors drawn from independent projection
streams.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _io
from .errors import DimError, InvalidParameter, RankError, SingularError
from .projections import (
    ProjectionOperator,
    ProjectionSpec,
    apply_columns,
    apply_rows,
    sample_projection,
    substream_seed,
)

#: relative singular-value cut-off for minimum-norm solutions
PINV_RTOL = 1e-10
_RANK_RTOL = 1e-12

__all__ = [
    "FitResult",
    "CvReport",
    "matrix_rank",
    "ols_fit",
    "ridge_fit",
    "clse_fit",
    "aclse_fit",
    "row_compressed_ols",
    "select_dim_cv",
]


@dataclass(frozen=True, eq=False)
class FitResult:
    beta_original: np.ndarray
    method: str
    training_mse: float
    gamma_projected: np.ndarray = None
    d: int = None
    K: int = 1
    seeds: tuple = ()
    lam: float = None
    extra: dict = field(default_factory=dict)

    def predict(self, x):
        return np.asarray(getattr(x, "values", x), dtype=float) @ self.beta_original

    def to_csv(self):
        return "".join(_io.format_float(b) + "\n" for b in self.beta_original)

    def provenance(self):
        meta = {"method": self.method, "p": self.beta_original.size}
        if self.d is not None:
            meta["d"] = self.d
        meta["K"] = self.K
        if self.seeds:
            meta["seeds"] = list(self.seeds)
        if self.lam is not None:
            meta["lambda"] = float(self.lam)
        meta["training_mse"] = float(self.training_mse)
        meta.update(self.extra)
        return meta

    def save(self, path):
        """Coefficients to ``path`` (one per row) and provenance to ``path.meta``."""
        _io.atomic_write_text(path, self.to_csv())
        _io.atomic_write_text(_io.sidecar_path(path), _io.dump_keyvalue(self.provenance()))


@dataclass(frozen=True, eq=False)
class CvReport:
    grid: np.ndarray
    fold_errors: np.ndarray  # (len(grid), folds)
    chosen_d: int
    one_se_d: int

    @property
    def mean_errors(self):
        return self.fold_errors.mean(axis=1)


def _xy(x, y):
    xv = np.asarray(getattr(x, "values", x), dtype=float)
    if xv.ndim == 1:
        xv = xv[:, None]
    yv = np.asarray(y, dtype=float)
    if yv.ndim != 1 or yv.shape[0] != xv.shape[0]:
        raise DimError(f"response of shape {yv.shape} does not match design of shape {xv.shape}")
    if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(yv))):
        raise InvalidParameter("design and response must be finite")
    return xv, yv


def matrix_rank(a):
    sv = np.linalg.svd(np.asarray(a, dtype=float), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.count_nonzero(sv**2 > _RANK_RTOL * sv[0] ** 2))


def _mse(xv, yv, beta):
    r = yv - xv @ beta
    return float(r @ r) / yv.size


def _lstsq(a, b, pinv):
    """Least squares via the SVD; minimum norm when ``pinv`` is set."""
    u, sv, vt = np.linalg.svd(a, full_matrices=False)
    keep = sv > PINV_RTOL * sv[0] if sv.size and sv[0] > 0 else np.zeros(sv.size, bool)
    if not pinv and (sv.size < a.shape[1] or not keep.all()):
        raise SingularError("Gram matrix is singular; pass pinv=True for a minimum-norm solution")
    return vt[keep].T @ ((u[:, keep].T @ b) / sv[keep])


def ols_fit(x, y, pinv=False):
    """Ordinary least squares, ``argmin ||Y - X b||^2``."""
    xv, yv = _xy(x, y)
    beta = _lstsq(xv, yv, pinv)
    return FitResult(beta, "ols", _mse(xv, yv, beta))


def ridge_fit(x, y, lam):
    """Ridge regression, ``(X'X + lam I)^{-1} X'Y``."""
    if not (np.isfinite(lam) and lam >= 0):
        raise InvalidParameter(f"ridge penalty must be >= 0, got {lam}")
    xv, yv = _xy(x, y)
    if lam == 0:
        beta = _lstsq(xv, yv, pinv=False)
    else:
        # augmented system avoids forming X'X
        p = xv.shape[1]
        aug_x = np.vstack([xv, np.sqrt(lam) * np.eye(p)])
        aug_y = np.concatenate([yv, np.zeros(p)])
        beta = _lstsq(aug_x, aug_y, pinv=False)
    return FitResult(beta, "ridge", _mse(xv, yv, beta), lam=float(lam))


def _column_operator(spec, p):
    if isinstance(spec, ProjectionOperator):
        op = spec
    else:
        if spec.input_dim != p:
            raise DimError(f"projection input_dim {spec.input_dim} does not match p={p}")
        op = sample_projection(spec)
    if op.input_dim != p:
        raise DimError(f"projection input_dim {op.input_dim} does not match p={p}")
    return op


def _clse(xv, yv, op, penalty=0.0):
    phi = op.to_dense()
    xphi = apply_columns(op, xv)
    if penalty:
        d = xphi.shape[1]
        gamma = _lstsq(
            np.vstack([xphi, np.sqrt(penalty) * np.eye(d)]),
            np.concatenate([yv, np.zeros(d)]),
            pinv=True,
        )
    else:
        gamma = _lstsq(xphi, yv, pinv=True)
    return gamma, phi @ gamma


def clse_fit(x, y, spec, penalty=0.0, check_rank=True):
    """Compressed least squares: regress on ``X phi`` and return ``phi gamma``.

    Parameters
    ----------
    spec : ProjectionSpec or ProjectionOperator
        Column-role projection with ``input_dim == p``.
    penalty : float
        Experimental ridge penalty on ``gamma``; no MSE theory covers it.
    check_rank : bool
        Raise :class:`RankError` when ``d`` exceeds ``Rank(X)``.

    A singular projected Gram matrix falls back to the minimum-norm
    solution with relative threshold ``PINV_RTOL``.
    """
    xv, yv = _xy(x, y)
    op = _column_operator(spec, xv.shape[1])
    d = op.output_dim
    if check_rank:
        rank = matrix_rank(xv)
        if d > rank:
            raise RankError(f"projection dimension d={d} exceeds Rank(X)={rank}")
    if penalty < 0:
        raise InvalidParameter("penalty must be >= 0")
    gamma, beta = _clse(xv, yv, op, penalty)
    extra = {"family": op.spec.family}
    if penalty:
        extra["penalty"] = float(penalty)
    return FitResult(
        beta,
        "clse",
        _mse(xv, yv, beta),
        gamma_projected=gamma,
        d=d,
        K=1,
        seeds=(op.spec.seed,),
        extra=extra,
    )


def aclse_fit(x, y, spec, K, threads=1, penalty=0.0):
    """Averaged CLSE over ``K`` independent projections.

    Stream ``k`` uses seed ``substream_seed(spec.seed, k)``.  Sub-fits may
    run on ``threads`` workers; the coefficient vectors are always summed
    in ascending stream order, so the result does not depend on
    ``threads``.
    """
    if int(K) < 1:
        raise InvalidParameter(f"K must be >= 1, got {K}")
    if not isinstance(spec, ProjectionSpec):
        raise InvalidParameter("aclse_fit needs a ProjectionSpec to derive independent streams")
    xv, yv = _xy(x, y)
    if spec.input_dim != xv.shape[1]:
        raise DimError(f"projection input_dim {spec.input_dim} does not match p={xv.shape[1]}")
    rank = matrix_rank(xv)
    if spec.output_dim > rank:
        raise RankError(f"projection dimension d={spec.output_dim} exceeds Rank(X)={rank}")
    seeds = tuple(substream_seed(spec.seed, k) for k in range(int(K)))

    def one(seed):
        return _clse(xv, yv, sample_projection(spec.with_seed(seed)), penalty)[1]

    if threads > 1 and K > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            betas = list(pool.map(one, seeds))
    else:
        betas = [one(s) for s in seeds]
    total = np.zeros(xv.shape[1])
    for b in betas:
        total = total + b
    beta = total / K
    return FitResult(
        beta,
        "aclse",
        _mse(xv, yv, beta),
        d=spec.output_dim,
        K=int(K),
        seeds=seeds,
        extra={"family": spec.family, "base_seed": spec.seed},
    )


def row_compressed_ols(x, y, spec, pinv=False):
    """OLS on the row-compressed data ``(psi X, psi Y)``."""
    xv, yv = _xy(x, y)
    n, p = xv.shape
    if isinstance(spec, ProjectionOperator):
        op = spec
    else:
        if spec.input_dim != n:
            raise DimError(f"row projection input_dim {spec.input_dim} does not match n={n}")
        op = sample_projection(spec)
    m = op.output_dim
    if m < p and not pinv:
        raise RankError(f"m={m} < p={p}: compressed problem is under-determined")
    px, py = apply_rows(op, xv, yv)
    try:
        beta = _lstsq(px, py, pinv)
    except SingularError as exc:
        raise RankError(str(exc)) from exc
    return FitResult(
        beta,
        "row_ols",
        _mse(xv, yv, beta),
        d=m,
        seeds=(op.spec.seed,),
        extra={"family": op.spec.family, "m": m},
    )


def select_dim_cv(x, y, spec_template, grid, folds=5, K=1):
    """Choose the projection dimension by K-fold cross-validation.

    Rows are shuffled with ``spec_template.seed`` and split into contiguous
    folds.  Cell ``(fold f, grid index j)`` uses projection stream
    ``f * len(grid) + j``.  The error of a cell is the mean squared
    prediction error on the held-out fold.

    Returns
    -------
    CvReport
        ``chosen_d`` minimizes the mean fold error (ties go to the smaller
        ``d``); ``one_se_d`` is the smallest ``d`` whose mean error is within
        one standard error of the minimum.
    """
    grid = np.array(sorted(set(int(g) for g in grid)))
    if grid.size == 0:
        raise InvalidParameter("cross-validation grid is empty")
    if int(folds) < 2:
        raise InvalidParameter("need at least two folds")
    xv, yv = _xy(x, y)
    n, p = xv.shape
    if folds > n:
        raise InvalidParameter(f"{folds} folds for {n} rows")
    order = np.random.default_rng(spec_template.seed).permutation(n)
    chunks = np.array_split(order, folds)
    errors = np.empty((grid.size, folds))
    for f, test in enumerate(chunks):
        train = np.setdiff1d(order, test, assume_unique=True)
        xt, yt = xv[train], yv[train]
        rank = matrix_rank(xt)
        if grid[-1] > rank:
            raise RankError(f"grid value {grid[-1]} exceeds rank {rank} of training fold {f}")
        for j, d in enumerate(grid):
            spec = ProjectionSpec(
                spec_template.family,
                p,
                int(d),
                substream_seed(spec_template.seed, f * grid.size + j),
                spec_template.density,
            )
            if K == 1:
                beta = clse_fit(xt, yt, spec, check_rank=False).beta_original
            else:
                beta = aclse_fit(xt, yt, spec, K).beta_original
            resid = yv[test] - xv[test] @ beta
            errors[j, f] = float(resid @ resid) / test.size
    means = errors.mean(axis=1)
    best = int(np.argmin(means))
    se = errors[best].std(ddof=1) / np.sqrt(folds)
    within = np.nonzero(means <= means[best] + se)[0]
    return CvReport(grid, errors, int(grid[best]), int(grid[within[0]]))
