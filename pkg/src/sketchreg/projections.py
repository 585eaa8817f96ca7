"""Random projection operators.

An operator maps vectors of length ``input_dim`` to length ``output_dim``.
Its matrix ``M`` has shape ``(input_dim, output_dim)``:

* column compression (``p -> d``): ``X @ M``, i.e. ``M`` is ``phi``;
* row compression (``n -> m``): ``M.T @ X``, i.e. ``M.T`` is ``psi``.

Every family is normalized so that ``E[M M'] = I``.  Gaussian entries come
from numpy's ``Generator.standard_normal`` (ziggurat); reproducibility is
guaranteed for a given numpy version and seed, not across platforms.
"""

from dataclasses import dataclass

import numpy as np

from . import _io
from .errors import DimError, InvalidParameter

FAMILIES = ("gaussian", "sign", "sparse", "srht", "explicit")
DEFAULT_SPARSE_DENSITY = 1.0 / 3.0
_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

__all__ = [
    "ProjectionSpec",
    "ProjectionOperator",
    "substream_seed",
    "sample_projection",
    "apply_columns",
    "apply_rows",
    "fwht",
    "hadamard_matrix",
    "next_pow2",
]


def substream_seed(base_seed, k):
    """Seed of independent stream ``k``: ``base + k * 0x9E3779B97F4A7C15 mod 2**64``."""
    return (int(base_seed) + int(k) * _GOLDEN) & _MASK64


def next_pow2(n):
    return 1 << max(0, int(n) - 1).bit_length()


@dataclass(frozen=True)
class ProjectionSpec:
    """What to sample: family, dimensions, seed and (for ``sparse``) density."""

    family: str
    input_dim: int
    output_dim: int
    seed: int = 0
    density: float = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameter(f"unknown projection family {self.family!r}")
        if int(self.input_dim) < 1 or int(self.output_dim) < 1:
            raise InvalidParameter("projection dimensions must be >= 1")
        if self.output_dim > self.input_dim:
            raise InvalidParameter(
                f"output_dim {self.output_dim} exceeds input_dim {self.input_dim}"
            )
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        if self.family == "sparse":
            q = DEFAULT_SPARSE_DENSITY if self.density is None else float(self.density)
            if not 0 < q <= 1:
                raise InvalidParameter(f"sparse density must lie in (0, 1], got {q}")
            object.__setattr__(self, "density", q)

    @property
    def scale(self):
        if self.family == "sparse":
            return 1.0 / np.sqrt(self.output_dim * self.density)
        return 1.0 / np.sqrt(self.output_dim)

    def with_seed(self, seed):
        return ProjectionSpec(self.family, self.input_dim, self.output_dim, seed, self.density)

    def with_dims(self, input_dim=None, output_dim=None):
        return ProjectionSpec(
            self.family,
            self.input_dim if input_dim is None else input_dim,
            self.output_dim if output_dim is None else output_dim,
            self.seed,
            self.density,
        )

    def to_text(self):
        fields = {
            "family": self.family,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "seed": self.seed,
        }
        if self.density is not None:
            fields["density"] = self.density
        return _io.dump_keyvalue(fields)

    @classmethod
    def from_text(cls, text):
        kv = _io.parse_keyvalue(text)
        density = kv.get("density")
        return cls(
            kv["family"],
            int(kv["input_dim"]),
            int(kv["output_dim"]),
            int(kv.get("seed", 0)),
            None if density is None else float(density),
        )


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    """A sampled projection.

    Dense families keep ``matrix``.  SRHT keeps only its random state:
    the ``signs`` diagonal on the padded dimension and the ``rows`` picked
    out of the Hadamard transform.
    """

    spec: ProjectionSpec
    matrix: np.ndarray = None
    signs: np.ndarray = None
    rows: np.ndarray = None

    @property
    def input_dim(self):
        return self.spec.input_dim

    @property
    def output_dim(self):
        return self.spec.output_dim

    @property
    def padded_dim(self):
        return next_pow2(self.input_dim)

    @classmethod
    def from_matrix(cls, matrix):
        """Wrap a fixed ``(input_dim, output_dim)`` matrix."""
        m = np.array(matrix, dtype=float)
        if m.ndim != 2:
            raise InvalidParameter("projection matrix must be 2-D")
        m.setflags(write=False)
        spec = ProjectionSpec("explicit", m.shape[0], m.shape[1])
        return cls(spec, matrix=m)

    @classmethod
    def identity(cls, dim):
        return cls.from_matrix(np.eye(dim))

    def transform(self, a):
        """Map each row of ``a`` (length ``input_dim``) to length ``output_dim``."""
        a = np.asarray(a, dtype=float)
        if a.shape[-1] != self.input_dim:
            raise DimError(f"expected trailing dimension {self.input_dim}, got {a.shape[-1]}")
        if self.matrix is not None:
            return a @ self.matrix
        pad = self.padded_dim - self.input_dim
        if pad:
            a = np.concatenate([a, np.zeros(a.shape[:-1] + (pad,))], axis=-1)
        return fwht(a * self.signs)[..., self.rows] * self.spec.scale

    def to_dense(self):
        """Explicit matrix, obtained by transforming the basis vectors."""
        if self.matrix is not None:
            return np.array(self.matrix)
        return self.transform(np.eye(self.input_dim))


def fwht(a):
    """Unnormalized Walsh-Hadamard transform along the last axis.

    Sylvester ordering, ``H_2k = [[H_k, H_k], [H_k, -H_k]]``; the length must
    be a power of two.  Cost is ``O(P log P)`` per row.
    """
    a = np.asarray(a, dtype=float)
    size = a.shape[-1]
    if size & (size - 1):
        raise DimError(f"Walsh-Hadamard length must be a power of two, got {size}")
    if size == 1:
        return a.copy()
    half = size // 2
    top = fwht(a[..., :half])
    bottom = fwht(a[..., half:])
    return np.concatenate([top + bottom, top - bottom], axis=-1)


def hadamard_matrix(size, dtype=np.int64):
    """Sylvester Hadamard matrix of order ``size`` (a power of two)."""
    if size < 1 or size & (size - 1):
        raise DimError(f"Hadamard order must be a power of two, got {size}")
    h = np.ones((1, 1), dtype=dtype)
    while h.shape[0] < size:
        h = np.block([[h, h], [h, -h]])
    return h


def sample_projection(spec):
    """Draw the operator described by ``spec``; a pure function of ``spec``."""
    if spec.family == "explicit":
        raise InvalidParameter("explicit operators are built with ProjectionOperator.from_matrix")
    rng = np.random.default_rng(spec.seed)
    shape = (spec.input_dim, spec.output_dim)
    if spec.family == "gaussian":
        m = rng.standard_normal(shape) * spec.scale
    elif spec.family == "sign":
        m = np.where(rng.random(shape) < 0.5, -1.0, 1.0) * spec.scale
    elif spec.family == "sparse":
        mask = rng.random(shape) < spec.density
        sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
        m = mask * sign * spec.scale
    else:
        padded = next_pow2(spec.input_dim)
        signs = np.where(rng.random(padded) < 0.5, -1.0, 1.0)
        rows = np.sort(rng.choice(padded, size=spec.output_dim, replace=False))
        signs.setflags(write=False)
        rows.setflags(write=False)
        return ProjectionOperator(spec, signs=signs, rows=rows)
    m.setflags(write=False)
    return ProjectionOperator(spec, matrix=m)


def _as_operator(op):
    return sample_projection(op) if isinstance(op, ProjectionSpec) else op


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=float)


def apply_columns(op, x):
    """Compress variables: return the ``n x d`` matrix ``X phi``."""
    op = _as_operator(op)
    xv = _values(x)
    if xv.ndim != 2 or xv.shape[1] != op.input_dim:
        raise DimError(f"operator expects {op.input_dim} columns, design has shape {xv.shape}")
    return op.transform(xv)


def apply_rows(op, x, y):
    """Compress samples: return ``(psi X, psi Y)`` with ``m`` rows."""
    op = _as_operator(op)
    xv = _values(x)
    yv = np.asarray(y, dtype=float)
    if xv.ndim != 2 or xv.shape[0] != op.input_dim or yv.shape[0] != op.input_dim:
        raise DimError(
            f"operator expects {op.input_dim} rows, got design {xv.shape} and response {yv.shape}"
        )
    return op.transform(xv.T).T, op.transform(yv.T).T
