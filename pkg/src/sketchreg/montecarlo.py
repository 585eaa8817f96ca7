"""Monte Carlo estimation of eta and tau, empirical MSE, figure reproductions.

Work is split into cells of at most ``McConfig.chunk`` draws.  Cell ``c``
draws from the substream ``substream_seed(base_seed, c)`` and cells are
reduced in index order, so results do not depend on ``threads``.

Noise is Gaussian with variance ``sigma2``.
"""

import hashlib
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _io
from .design import DesignMatrix, NoiseModel, Spectrum, as_spectrum, pc_rotate, synthetic_design
from .errors import DimError, InvalidParameter, NumericalWarning, RankError
from .projections import ProjectionSpec, sample_projection, substream_seed
from .theory import (
    EtaEstimates,
    TauEstimate,
    exact_mse_from_eta,
    ridge_mse,
    shrinkage_factors,
    theorem1_bound,
    theorem2_bound,
    theorem4_bound,
)

METHODS = ("ols", "ridge", "clse", "aclse", "row_ols")
_SINGULAR_RTOL = 1e-12

__all__ = [
    "McConfig",
    "ExperimentResult",
    "estimate_eta",
    "estimate_tau",
    "empirical_mse",
    "reproduce_figure",
    "write_result",
]


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo sizes.

    ``num_projection_samples`` (M) is the number of projection draws behind
    a single-projection empirical MSE; ``num_eta_samples`` the number of
    draws for eta and tau.  ``num_replicates`` is the number of
    independent averaged estimators (each built from ``K`` projections)
    and of OLS/ridge replicates.  Every draw or replicate is paired with
    ``num_noise_reps`` (R) fresh noise vectors.
    """

    num_projection_samples: int = 2000
    num_noise_reps: int = 500
    base_seed: int = 0
    d_grid: tuple = tuple(range(1, 16))
    K_grid: tuple = (100,)
    num_replicates: int = 200
    num_eta_samples: int = 20000
    chunk: int = 250

    def __post_init__(self):
        if self.num_projection_samples < 100 or self.num_eta_samples < 100:
            raise InvalidParameter("num_projection_samples and num_eta_samples must be >= 100")
        if self.num_noise_reps < 1 or self.num_replicates < 2 or self.chunk < 1:
            raise InvalidParameter("num_noise_reps, num_replicates and chunk must be positive")
        if not self.d_grid or not self.K_grid:
            raise InvalidParameter("d_grid and K_grid must be non-empty")
        object.__setattr__(self, "d_grid", tuple(sorted(int(d) for d in self.d_grid)))
        object.__setattr__(self, "K_grid", tuple(int(k) for k in self.K_grid))
        if self.d_grid[0] < 1 or min(self.K_grid) < 1:
            raise InvalidParameter("grid entries must be >= 1")


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """A table with one row per ``d`` (ascending) and named columns."""

    figure: str
    columns: tuple
    rows: np.ndarray
    panel: str = ""
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return self.rows[:, self.columns.index(name)]

    @property
    def d(self):
        return self.column("d").astype(int)

    def to_csv(self):
        return _io.table_to_csv(self.columns, self.rows)


def _run_cells(fn, args, threads):
    if threads > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, args))
    return [fn(a) for a in args]


def _cell_sizes(total, chunk):
    return [min(chunk, total - start) for start in range(0, total, chunk)]


def _gaussian_phis(rng, size, p, d):
    return rng.standard_normal((size, p, d)) / math.sqrt(d)


def _hat_coefficients(phi, gram, resample=None):
    """``phi (phi' Sigma phi)^{-1} phi'`` for a batch, shape ``(B, p, p)``.

    Draws whose projected Gram is numerically singular are replaced with
    ``resample(count)`` when given, else inverted on the eigenvalues above
    ``1e-10`` of the largest (minimum-norm solution).  Returns the
    operators and the number of replaced draws.
    """
    def singular(ev):
        return ev[:, 0] <= _SINGULAR_RTOL * np.maximum(ev[:, -1], np.finfo(float).tiny)

    ev, vec = np.linalg.eigh(np.swapaxes(phi, 1, 2) @ gram @ phi)
    bad = singular(ev)
    replaced = 0
    if resample is not None:
        while np.any(bad):
            idx = np.nonzero(bad)[0]
            replaced += idx.size
            phi = phi.copy()
            phi[idx] = resample(idx.size)
            ev[idx], vec[idx] = np.linalg.eigh(np.swapaxes(phi[idx], 1, 2) @ gram @ phi[idx])
            bad[:] = False
            bad[idx] = singular(ev[idx])
    cutoff = 1e-10 * ev[:, -1:]
    inv_ev = np.divide(1.0, ev, out=np.zeros_like(ev), where=ev > cutoff)
    w = phi @ vec
    return (w * inv_ev[:, None, :]) @ np.swapaxes(w, 1, 2), replaced


def estimate_eta(spectrum, d, M=20000, seed=0, threads=1, chunk=2000):
    """Estimate ``eta_i`` from ``M`` Gaussian projections.

    The diagonal of ``phi (phi' Sigma phi)^{-1} phi'`` is averaged over
    draws and then inverted, ``eta_i = 1 / mean_i``.
    """
    spectrum = as_spectrum(spectrum)
    lam = spectrum.eigenvalues
    p = spectrum.p
    if not (isinstance(d, (int, np.integer)) and 1 <= d <= spectrum.rank):
        raise RankError(f"d={d} must lie in [1, rank={spectrum.rank}]")
    if M < 2:
        raise InvalidParameter("need M >= 2 samples")
    gram = np.diag(lam)

    def cell(args):
        c, size = args
        rng = np.random.default_rng(substream_seed(seed, c))
        phi = _gaussian_phis(rng, size, p, d)
        ops, replaced = _hat_coefficients(phi, gram, lambda k: _gaussian_phis(rng, k, p, d))
        return np.diagonal(ops, axis1=1, axis2=2).copy(), replaced

    out = _run_cells(cell, list(enumerate(_cell_sizes(M, chunk))), threads)
    diag = np.concatenate([o[0] for o in out])
    resamples = sum(o[1] for o in out)
    if resamples > 0.01 * M:
        warnings.warn(f"{resamples} of {M} projection draws were singular and re-sampled", NumericalWarning)
    mean = diag.mean(axis=0)
    se_mean = diag.std(axis=0, ddof=1) / math.sqrt(M)
    eta = 1.0 / mean
    return EtaEstimates(eta, se_mean / mean**2, int(M), int(d), lam.copy(), resamples)


def estimate_tau(eta):
    """``tau = sum (lambda_i/eta_i)^2`` with a delta-method standard error."""
    r, se = eta.ratio, eta.ratio_stderr
    tau = math.fsum(r**2)
    stderr = float(np.sqrt(np.sum((2 * r * se) ** 2)))
    return TauEstimate(tau, stderr, eta.d, eta.eigenvalues.size)


def _column_phis(rng, size, p, d, family, density):
    if family == "gaussian":
        return _gaussian_phis(rng, size, p, d)
    seeds = rng.integers(0, 2**63, size=size)
    return np.stack(
        [sample_projection(ProjectionSpec(family, p, d, int(s), density)).to_dense() for s in seeds]
    )


def empirical_mse(x, beta, noise, method, config, *, K=None, lam=None, family="gaussian",
                  density=None, threads=1, with_theory=True):
    """Monte Carlo estimate of ``E_phi E_eps ||X beta - X beta_hat||^2``.

    Parameters
    ----------
    x : DesignMatrix or array
        Fixed design in any basis; bounds are evaluated on its spectrum
        with ``beta`` rotated to the principal-component basis.
    beta : (p,) array
        True coefficients in the basis of ``x``.
    noise : NoiseModel, float, or a list of them
        With a list, every noise level is evaluated on the same projection
        and standard-normal draws and a list of results is returned.
    method : {"ols", "ridge", "clse", "aclse", "row_ols"}
        ``clse``/``aclse`` sweep ``config.d_grid`` as the projection
        dimension, ``row_ols`` sweeps it as the compressed sample size
        ``m``.  ``ols`` and ``ridge`` give a single row with ``d = p``.
    K : int, optional
        Projections per averaged estimator; defaults to ``config.K_grid[0]``.
    lam : float
        Ridge penalty (``method="ridge"``).

    Returns
    -------
    ExperimentResult
        Columns ``d, empirical_mse, stderr`` followed by the matching
        theory values (``thm1, thm2, exact, exact_stderr`` for ``clse``;
        ``thm2, thm4, tau, tau_stderr`` for ``aclse``; ``exact`` for
        ``ols``/``ridge``).
    """
    if method not in METHODS:
        raise InvalidParameter(f"unknown method {method!r}")
    several = isinstance(noise, (list, tuple))
    levels = [nm if isinstance(nm, NoiseModel) else NoiseModel(float(nm))
              for nm in (noise if several else [noise])]
    x = x if isinstance(x, DesignMatrix) else DesignMatrix(x)
    xv = x.values
    n, p = xv.shape
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size != p:
        raise DimError(f"beta has length {beta.size}, design has p={p}")
    gram = xv.T @ xv
    ev, evec = np.linalg.eigh(gram)
    # ||X e||^2 == ||half @ e||^2
    half = np.sqrt(np.clip(ev, 0, None))[:, None] * evec.T
    sigmas = np.array([math.sqrt(nm.sigma2) for nm in levels])
    noisy = bool(np.any(sigmas > 0))
    reps = config.num_noise_reps if noisy else 1
    if noisy and reps < 100:
        raise InvalidParameter("num_noise_reps must be >= 100 when noise is simulated")
    rotated, spectrum = pc_rotate(DesignMatrix(xv))
    beta_pc = rotated.rotation.T @ beta
    K = config.K_grid[0] if K is None else int(K)
    if method == "ridge" and (lam is None or lam < 0):
        raise InvalidParameter("ridge needs lam >= 0")
    signal_coef = (gram @ beta)[None, :, None]

    def xt_noise(rng, batch):
        """``X' Z`` for standard-normal ``Z`` of shape ``(batch, n, R)``."""
        if not noisy:
            return np.zeros((batch, p, 1))
        return xv.T @ rng.standard_normal((batch, n, reps))

    def level_errors(bias_err, noise_coef):
        """Mean of ``||X (bias_err - s * noise_coef)||^2`` over columns, per level ``s``."""
        hb = half @ bias_err
        hn = half @ noise_coef
        bb = np.einsum("bpr,bpr->b", hb, hb)
        bn = np.einsum("bpr,bpr->b", np.broadcast_to(hb, hn.shape), hn) / hn.shape[-1]
        nn = np.einsum("bpr,bpr->b", hn, hn) / hn.shape[-1]
        return np.stack([bb - 2 * s * bn + s * s * nn for s in sigmas])

    def per_draw(ops, xtz):
        return level_errors(beta[None, :, None] - ops @ signal_coef, ops @ xtz)

    if method in ("ols", "ridge"):
        grid = [p]
        total = config.num_replicates
        if method == "ols":
            op = np.linalg.pinv(gram, rcond=1e-10, hermitian=True)
        else:
            op = np.linalg.inv(gram + lam * np.eye(p))

        def cell(args):
            c, _, size = args
            rng = np.random.default_rng(substream_seed(config.base_seed, c))
            return per_draw(np.broadcast_to(op, (size, p, p)), xt_noise(rng, size))

    elif method in ("clse", "aclse"):
        grid = list(config.d_grid)
        if grid[-1] > min(p, spectrum.rank):
            raise RankError(f"d={grid[-1]} exceeds Rank(X)={spectrum.rank}")
        total = config.num_projection_samples if method == "clse" else config.num_replicates

        def cell(args):
            c, d, size = args
            rng = np.random.default_rng(substream_seed(config.base_seed, c))
            if method == "clse":
                phi = _column_phis(rng, size, p, d, family, density)
                ops, _ = _hat_coefficients(phi, gram)
                return per_draw(ops, xt_noise(rng, size))
            avg = np.empty((size, p, p))
            for r in range(size):
                phi = _column_phis(rng, K, p, d, family, density)
                ops, _ = _hat_coefficients(phi, gram)
                acc = np.zeros((p, p))
                for k in range(K):
                    acc = acc + ops[k]
                avg[r] = acc / K
            return per_draw(avg, xt_noise(rng, size))

    else:
        grid = list(config.d_grid)
        if grid[0] < p or grid[-1] > n:
            raise InvalidParameter(f"row compression needs p <= m <= n, got grid {grid}")
        total = config.num_projection_samples

        def cell(args):
            c, m, size = args
            rng = np.random.default_rng(substream_seed(config.base_seed, c))
            psi_t = _column_phis(rng, size, n, m, family, density)
            a = np.swapaxes(psi_t, 1, 2) @ xv
            at = np.swapaxes(a, 1, 2)
            # beta_hat = (A'A)^{-1} A' psi Y with Y = X beta + sigma Z
            ops = np.linalg.solve(at @ a, at @ np.swapaxes(psi_t, 1, 2))
            z = rng.standard_normal((size, n, reps)) if noisy else np.zeros((size, n, 1))
            bias_err = beta[None, :, None] - ops @ (xv @ beta)[None, :, None]
            return level_errors(bias_err, ops @ z)

    tasks = []
    for d in grid:
        for size in _cell_sizes(total, config.chunk):
            tasks.append((len(tasks), d, size))
    results = _run_cells(cell, tasks, threads)

    columns = ["d", "empirical_mse", "stderr"]
    if method == "clse":
        columns += ["thm1", "thm2", "exact", "exact_stderr"]
    elif method == "aclse":
        columns += ["thm2", "thm4", "tau", "tau_stderr"]
    elif method in ("ols", "ridge"):
        columns += ["exact"]
    rows = [[] for _ in levels]
    for d in grid:
        vals = np.concatenate([r for (c, dd, _), r in zip(tasks, results) if dd == d], axis=1)
        eta = None
        if with_theory and family == "gaussian" and method in ("clse", "aclse"):
            eta = estimate_eta(spectrum, d, config.num_eta_samples,
                               substream_seed(config.base_seed, len(tasks) + d), threads)
        for j, nm in enumerate(levels):
            v = vals[j]
            row = [d, float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))]
            if method == "clse":
                row += [theorem1_bound(spectrum, beta_pc, nm, d).total,
                        theorem2_bound(spectrum, beta_pc, nm, d).total]
                if eta is not None:
                    exact = exact_mse_from_eta(spectrum, beta_pc, nm, eta)
                    row += [exact.total, exact.stderr]
                else:
                    row += [math.nan, math.nan]
            elif method == "aclse":
                row += [theorem2_bound(spectrum, beta_pc, nm, d).total]
                if eta is not None:
                    tau = estimate_tau(eta)
                    row += [theorem4_bound(spectrum, beta_pc, nm, d, tau).total, tau.tau, tau.stderr]
                else:
                    row += [math.nan, math.nan, math.nan]
            elif method == "ols":
                row += [nm.sigma2 * spectrum.rank]
            elif method == "ridge":
                row += [ridge_mse(spectrum, beta_pc, nm, lam).total]
            rows[j].append(row)
    results = []
    for j, nm in enumerate(levels):
        meta = {"method": method, "sigma2": nm.sigma2, "K": K if method == "aclse" else 1,
                "family": family, **asdict(config)}
        if lam is not None:
            meta["lambda"] = lam
        results.append(ExperimentResult("custom", tuple(columns), np.array(rows[j], dtype=float), meta=meta))
    return results if several else results[0]


FIG2_NOISE = {"sigma2_0": 0.0, "sigma2_1_40": 1 / 40, "sigma2_1_20": 1 / 20}


def reproduce_figure(tag, config=None, *, p=20, n=None, spiked_d=5, eps=1e-6, threads=1):
    """Regenerate the plotted series of one figure as tables.

    ``fig1``: exact bias factor ``1 - lambda_i/eta_i`` against the bound
    ``w_i`` for the first and last direction of ``Sigma_ii = 1/i``.
    ``fig2``: MSE of the single and the averaged estimator on the same
    design, ``beta = 1``, for three noise levels (panels left to right).
    ``fig3``: ``tau`` with its bounds for identity, ``1/i`` and spiked
    covariances.

    Returns
    -------
    dict of str to ExperimentResult, one entry per panel
    """
    config = McConfig() if config is None else config
    n = p if n is None else n
    grid = [d for d in config.d_grid if d <= p]
    if not grid:
        raise InvalidParameter("d_grid has no entry <= p")
    out = {}
    if tag == "fig1":
        _, spectrum = synthetic_design("inverse_index", n, p)
        etas = [estimate_eta(spectrum, d, config.num_eta_samples,
                             substream_seed(config.base_seed, d), threads) for d in grid]
        for panel, i in (("first", 0), ("last", p - 1)):
            rows = []
            for d, eta in zip(grid, etas):
                w = shrinkage_factors(spectrum, d).w
                rows.append([d, 1 - eta.ratio[i], eta.ratio_stderr[i], w[i]])
            out[panel] = ExperimentResult("fig1", ("d", "exact", "stderr", "bound"),
                                          np.array(rows), panel, {"direction": i + 1})
    elif tag == "fig2":
        x, spectrum = synthetic_design("inverse_index", n, p)
        beta = np.ones(p)
        cfg = McConfig(**{**asdict(config), "d_grid": tuple(grid)})
        levels = list(FIG2_NOISE.values())
        singles = empirical_mse(x, beta, levels, "clse", cfg, threads=threads, with_theory=False)
        avgs = empirical_mse(x, beta, levels, "aclse", cfg, threads=threads)
        for (panel, s2), single, avg in zip(FIG2_NOISE.items(), singles, avgs):
            rows = np.column_stack([
                single.column("d"), single.column("empirical_mse"), single.column("stderr"),
                avg.column("empirical_mse"), avg.column("stderr"),
                single.column("thm2"), avg.column("thm4"),
            ])
            out[panel] = ExperimentResult(
                "fig2",
                ("d", "mse_single", "stderr_single", "mse_averaged", "stderr_averaged", "thm2", "thm4"),
                rows, panel, {"sigma2": s2, "K": cfg.K_grid[0]},
            )
    elif tag == "fig3":
        spectra = {
            "identity": synthetic_design("identity", n, p)[1],
            "inverse_index": synthetic_design("inverse_index", n, p)[1],
            "spiked": synthetic_design("spiked", n, p, d=spiked_d, eps=eps)[1],
        }
        for j, (panel, spectrum) in enumerate(spectra.items()):
            rows = []
            for d in grid:
                eta = estimate_eta(spectrum, d, config.num_eta_samples,
                                   substream_seed(config.base_seed, 1000 * j + d), threads)
                tau = estimate_tau(eta)
                rows.append([d, tau.tau, tau.stderr, *tau.bounds])
            out[panel] = ExperimentResult("fig3", ("d", "tau", "stderr", "lower", "upper"),
                                          np.array(rows), panel)
    else:
        raise InvalidParameter(f"unknown figure {tag!r}")
    return out


def content_hash(*parts):
    """SHA-256 over arrays (as float64 bytes), bytes and strings, in order."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            h.update(part)
        elif isinstance(part, str):
            h.update(part.encode())
        else:
            h.update(np.ascontiguousarray(np.asarray(part, dtype=float)).tobytes())
    return h.hexdigest()


def write_result(result, path, provenance=None, inputs=()):
    """CSV table to ``path``; config echo and a hash of ``inputs`` to ``path.meta``."""
    _io.atomic_write_text(path, result.to_csv())
    meta = {"figure": result.figure}
    if result.panel:
        meta["panel"] = result.panel
    meta.update(result.meta)
    meta.update(provenance or {})
    echo = _io.dump_keyvalue(meta)
    meta["content_hash"] = content_hash(echo, *inputs)
    _io.atomic_write_text(_io.sidecar_path(path), _io.dump_keyvalue(meta))
