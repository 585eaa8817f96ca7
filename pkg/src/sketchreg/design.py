"""Design matrices: CSV ingestion, centering, Gram spectrum and PC rotation.

All of the MSE theory in :mod:`sketchreg.theory` is stated for a design whose
Gram matrix ``X'X`` is diagonal.  :func:`pc_rotate` produces that
representation for an arbitrary design; :func:`synthetic_design` builds
designs with a prescribed diagonal Gram matrix directly.
"""

import csv
import errno
import os
from dataclasses import dataclass, field

import numpy as np

from . import _io
from .errors import EmptyInput, InvalidParameter, NumericalError, ParseError

#: eigenvalues below this fraction of the largest one count as zero
RANK_RTOL = 1e-12

__all__ = [
    "DesignMatrix",
    "Spectrum",
    "NoiseModel",
    "as_spectrum",
    "center",
    "load_csv",
    "save_csv",
    "pc_rotate",
    "synthetic_design",
    "design_from_spectrum",
]


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """An ``n x p`` predictor matrix with centering and rotation metadata.

    Parameters
    ----------
    values : (n, p) ndarray
    column_means : (p,) ndarray, optional
        Means subtracted by :func:`center`; zeros when the data is raw.
    rotation : (p, p) ndarray, optional
        Orthogonal ``V`` such that ``values = X_original @ V``.
    """

    values: np.ndarray
    column_means: np.ndarray = None
    rotation: np.ndarray = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidParameter(f"design must be a non-empty 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameter("design contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        means = np.zeros(values.shape[1]) if self.column_means is None else np.asarray(self.column_means, float)
        object.__setattr__(self, "column_means", means)
        if self.rotation is not None:
            object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    @property
    def gram(self):
        return self.values.T @ self.values

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Gram eigenvalues in non-increasing order.

    ``trace_sigma`` is ``s = sum(lambda_i)`` and ``alphas`` the variance
    proportions ``lambda_i / s``.
    """

    eigenvalues: np.ndarray
    trace_sigma: float = field(init=False)
    alphas: np.ndarray = field(init=False)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).ravel()
        if lam.size == 0 or not np.all(np.isfinite(lam)):
            raise InvalidParameter("spectrum must be a non-empty finite vector")
        if np.any(lam < 0):
            raise InvalidParameter("eigenvalues must be non-negative")
        if np.any(np.diff(lam) > 0):
            raise InvalidParameter("eigenvalues must be sorted non-increasing")
        s = float(np.sum(lam))
        if not s > 0:
            raise InvalidParameter("trace of the Gram matrix must be positive")
        lam = lam.copy()
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "trace_sigma", s)
        object.__setattr__(self, "alphas", lam / s)

    @property
    def p(self):
        return self.eigenvalues.size

    @property
    def rank(self):
        return int(np.count_nonzero(self.eigenvalues > RANK_RTOL * self.eigenvalues[0]))

    def __len__(self):
        return self.p


@dataclass(frozen=True)
class NoiseModel:
    """i.i.d. noise with variance ``sigma2``."""

    sigma2: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma2) and self.sigma2 >= 0):
            raise InvalidParameter(f"sigma2 must be finite and >= 0, got {self.sigma2}")


def as_spectrum(obj):
    """Coerce a :class:`Spectrum`, a sequence of eigenvalues or a design."""
    if isinstance(obj, Spectrum):
        return obj
    if isinstance(obj, DesignMatrix):
        return pc_rotate(obj)[1]
    return Spectrum(np.asarray(obj, dtype=float))


def center(x):
    """Subtract column means; the means are recorded on the result."""
    x = x if isinstance(x, DesignMatrix) else DesignMatrix(x)
    means = x.values.mean(axis=0)
    return DesignMatrix(x.values - means, column_means=x.column_means + means, rotation=x.rotation)


def load_csv(path, has_header=False):
    """Read a design and response from a CSV file.

    The last column is the response; every row must have the same number
    of columns (at least two).

    Returns
    -------
    x : DesignMatrix
        Uncentered ``n x (columns - 1)`` predictors.
    y : (n,) ndarray
    """
    if not os.path.exists(path):
        raise FileNotFoundError(errno.ENOENT, "no such file", os.fspath(path))
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, raw in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not raw or all(not c.strip() for c in raw):
                continue
            if width is None:
                width = len(raw)
                if width < 2:
                    raise ParseError("need at least one predictor and a response column", row=lineno)
            elif len(raw) != width:
                raise ParseError(f"expected {width} columns, found {len(raw)}", row=lineno)
            parsed = []
            for colno, cell in enumerate(raw, start=1):
                try:
                    val = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell!r}", row=lineno, col=colno) from None
                if not np.isfinite(val):
                    raise ParseError(f"non-finite cell {cell!r}", row=lineno, col=colno)
                parsed.append(val)
            rows.append(parsed)
    if not rows:
        raise EmptyInput(f"no data rows in {path}")
    data = np.array(rows)
    return DesignMatrix(data[:, :-1]), data[:, -1].copy()


def save_csv(path, x, y, header=None):
    """Write predictors and response with 17 significant digits."""
    xv = np.asarray(x.values if isinstance(x, DesignMatrix) else x, dtype=float)
    yv = np.asarray(y, dtype=float).reshape(-1, 1)
    if xv.shape[0] != yv.shape[0]:
        raise InvalidParameter("x and y have different numbers of rows")
    table = np.hstack([xv, yv])
    lines = [] if header is None else [",".join(header)]
    lines += [",".join(_io.format_float(v) for v in row) for row in table]
    _io.atomic_write_text(path, "\n".join(lines) + "\n")


def pc_rotate(x):
    """Rotate ``x`` to the basis of principal components.

    Returns ``(X @ V, spectrum)`` where the columns of ``V`` are the Gram
    eigenvectors ordered by non-increasing eigenvalue.  Each eigenvector is
    signed so that its largest-magnitude entry is positive.  Coefficients
    transform as ``beta_pc = V.T @ beta``.
    """
    x = x if isinstance(x, DesignMatrix) else DesignMatrix(x)
    try:
        _, sv, vt = np.linalg.svd(x.values, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    lam = np.zeros(x.p)
    lam[: sv.size] = sv**2
    lam[lam <= RANK_RTOL * lam[0]] = 0.0
    v = vt.T
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(x.p)])
    signs[signs == 0] = 1.0
    v = v * signs
    rotation = v if x.rotation is None else x.rotation @ v
    rotated = DesignMatrix(x.values @ v, column_means=x.column_means, rotation=rotation)
    return rotated, Spectrum(lam)


def design_from_spectrum(eigenvalues, n=None, seed=None):
    """Design whose Gram matrix is ``diag(eigenvalues)``.

    Built as ``sqrt(Sigma)`` padded with zero rows up to ``n``.  With a
    ``seed`` the rows are mixed by a Haar-random orthogonal matrix, which
    keeps ``X'X`` equal to ``Sigma`` up to rounding.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    p = lam.size
    n = p if n is None else int(n)
    if n < p:
        raise InvalidParameter(f"need n >= p for an exact spectrum, got n={n}, p={p}")
    values = np.zeros((n, p))
    values[:p, :p] = np.diag(np.sqrt(lam))
    if seed is not None:
        from scipy.stats import ortho_group

        q = ortho_group.rvs(n, random_state=np.random.default_rng(seed)) if n > 1 else np.ones((1, 1))
        values = q @ values
    return DesignMatrix(values)


def synthetic_design(kind, n, p, seed=None, *, d=None, eps=None, scale=1.0):
    """Designs with a prescribed diagonal covariance.

    Parameters
    ----------
    kind : {"identity", "inverse_index", "spiked"}
        ``identity`` gives ``Sigma = scale * I``; ``inverse_index`` gives
        ``Sigma_ii = scale / i``; ``spiked`` gives ``Sigma_ii = scale`` for
        ``i <= d`` and ``scale * eps`` beyond.
    n, p : int
    seed : int, optional
        Row mixing, see :func:`design_from_spectrum`.

    Returns
    -------
    DesignMatrix, Spectrum
    """
    if p < 1:
        raise InvalidParameter("p must be >= 1")
    if not scale > 0:
        raise InvalidParameter("scale must be positive")
    if kind == "identity":
        lam = np.ones(p)
    elif kind == "inverse_index":
        lam = 1.0 / np.arange(1, p + 1)
    elif kind == "spiked":
        if d is None or not 1 <= d <= p:
            raise InvalidParameter(f"spiked design needs 1 <= d <= p, got d={d}")
        if eps is None or not eps > 0:
            raise InvalidParameter(f"spiked design needs eps > 0, got {eps}")
        lam = np.full(p, float(eps))
        lam[:d] = 1.0
    else:
        raise InvalidParameter(f"unknown design kind {kind!r}")
    lam = scale * lam
    return design_from_spectrum(lam, n=n, seed=seed), Spectrum(lam)
