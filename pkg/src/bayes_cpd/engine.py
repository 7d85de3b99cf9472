"""Functional CUSUM change-point detection for density-valued sequences.

The detection pipeline: transform each density (clr for the Bayes-space
method, identity for the raw-L2 competitor), build the functional CUSUM
profile over candidate split points, locate the break at the profile's
argmax, estimate the covariance operator of the transformed residuals,
simulate the eigenvalue-weighted Brownian-bridge limit of the test
statistic by Monte Carlo, and convert the observed maximum into a p-value.

Both methods share one core on an (n, m) matrix of transformed values, so
they differ in nothing but the transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .density import ClrFunction, DensityFunction, Grid, b_add, b_mean, b_smul, clr
from .errors import DegenerateInputError, NumericError, StructuralError
from .seeds import derive_seed, parallel_map

#: Profile maxima at or below this are treated as an identically-zero CUSUM.
DEGENERATE_STATISTIC_TOL = 1e-12
#: Eigenvalues below this fraction of the leading one are clipped to zero.
EIGENVALUE_CLIP_RATIO = 1e-12

DEFAULT_ALPHA = 0.05
DEFAULT_MC_SAMPLES = 2000
DEFAULT_THETA = 0.95
DEFAULT_BRIDGE_NODES = 1001

_MC_CHUNK = 256

METHOD_BAYES = "bayes-clr"
METHOD_L2 = "l2-raw"

CENTERING_GLOBAL = "global"
CENTERING_SEGMENTED = "segmented"


@dataclass(frozen=True)
class DistributionalSequence:
    """Time-ordered densities on one shared grid; index i runs 1..n."""

    densities: tuple[DensityFunction, ...]

    def __post_init__(self):
        if len(self.densities) < 4:
            raise StructuralError(
                f"sequence needs at least 4 densities, got {len(self.densities)}"
            )
        grid = self.densities[0].grid
        for f in self.densities[1:]:
            if f.grid != grid:
                raise StructuralError("densities do not share one grid")

    @property
    def n(self) -> int:
        return len(self.densities)

    @property
    def grid(self) -> Grid:
        return self.densities[0].grid

    def values_matrix(self) -> np.ndarray:
        return np.vstack([f.values for f in self.densities])

    def clr_matrix(self) -> np.ndarray:
        return np.vstack([clr(f).values for f in self.densities])

    def reversed(self) -> "DistributionalSequence":
        return DistributionalSequence(tuple(reversed(self.densities)))

    def subsequence(self, positions: Sequence[int]) -> "DistributionalSequence":
        """Sub-sequence at the given 1-based positions (order preserved)."""
        return DistributionalSequence(
            tuple(self.densities[p - 1] for p in positions)
        )


@dataclass(frozen=True)
class CusumProfile:
    """Squared CUSUM norms per split k = 1..n and the smallest maximizer."""

    norms_sq: np.ndarray
    argmax_k: int
    degenerate: bool

    @property
    def statistic(self) -> float:
        return float(self.norms_sq.max())

    def norm_sq_at(self, k: int) -> float:
        return float(self.norms_sq[k - 1])


@dataclass(frozen=True)
class CovarianceEigen:
    """Eigendecomposition of the residual covariance operator on the grid.

    ``eigenvalues`` is the full clipped spectrum, descending.
    ``eigenfunctions`` holds one grid function per column, orthonormal in
    the trapezoid-weighted inner product.  ``truncation`` is the smallest
    leading count whose cumulative eigenvalue share reaches ``theta``.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    truncation: int
    theta: float
    degenerate: bool

    @property
    def L(self) -> int:
        return self.truncation

    def retained(self) -> np.ndarray:
        return self.eigenvalues[: self.truncation]


@dataclass(frozen=True)
class DetectionResult:
    """Outcome of one change-point detection run."""

    k_hat: int
    statistic: float
    p_value: float
    alpha: float
    reject_null: bool
    L: int
    eigenvalues: tuple[float, ...]
    mc_samples: int
    seed: int
    centering: str
    degenerate: bool
    method: str
    increment: DensityFunction | None = field(default=None, repr=False)


def _cusum_matrix(mat: np.ndarray) -> np.ndarray:
    """All n CUSUM functions (one per row k = 1..n) of an (n, m) matrix."""
    n = mat.shape[0]
    prefix = np.cumsum(mat, axis=0)
    total = prefix[-1]
    frac = (np.arange(1, n + 1) / n)[:, None]
    return (prefix - frac * total) / np.sqrt(n)


def _profile_from_matrix(mat: np.ndarray, weights: np.ndarray) -> CusumProfile:
    cusum = _cusum_matrix(mat)
    norms_sq = (cusum * cusum) @ weights
    np.maximum(norms_sq, 0.0, out=norms_sq)
    statistic = float(norms_sq.max())
    argmax_k = int(np.argmax(norms_sq)) + 1  # smallest maximizer: argmax is first
    degenerate = statistic <= DEGENERATE_STATISTIC_TOL
    if degenerate:
        argmax_k = 1
    return CusumProfile(norms_sq=norms_sq, argmax_k=argmax_k, degenerate=degenerate)


def clr_cusum(seq: DistributionalSequence, k: int) -> ClrFunction:
    """clr-domain CUSUM at split k: (prefix sum - (k/n) total sum) / sqrt(n)."""
    n = seq.n
    if not 1 <= k <= n:
        raise StructuralError(f"split index k={k} outside 1..{n}")
    mat = seq.clr_matrix()
    total = mat.sum(axis=0)
    values = (mat[:k].sum(axis=0) - (k / n) * total) / np.sqrt(n)
    return ClrFunction(seq.grid, values)


def cusum_profile(seq: DistributionalSequence) -> CusumProfile:
    """Squared Bayes-norm of the CUSUM for every split k = 1..n."""
    return _profile_from_matrix(seq.clr_matrix(), seq.grid.weights)


def cusum_profile_l2_raw(seq: DistributionalSequence) -> CusumProfile:
    """Squared L2-norm CUSUM profile on raw density values (competitor)."""
    return _profile_from_matrix(seq.values_matrix(), seq.grid.weights)


def locate(seq: DistributionalSequence) -> int:
    """Estimated change-point: smallest k maximizing the CUSUM norm profile."""
    return cusum_profile(seq).argmax_k


def test_statistic(seq: DistributionalSequence) -> float:
    """Maximum squared CUSUM norm over all splits."""
    return cusum_profile(seq).statistic


def _residual_matrix(mat: np.ndarray, centering: str, k_hat: int | None) -> np.ndarray:
    n = mat.shape[0]
    if centering == CENTERING_GLOBAL:
        return mat - mat.mean(axis=0)
    if centering == CENTERING_SEGMENTED:
        if k_hat is None or not 1 <= k_hat < n:
            raise DegenerateInputError(
                f"segmented centering needs 1 <= k_hat < n, got {k_hat}"
            )
        out = np.empty_like(mat)
        out[:k_hat] = mat[:k_hat] - mat[:k_hat].mean(axis=0)
        out[k_hat:] = mat[k_hat:] - mat[k_hat:].mean(axis=0)
        return out
    raise StructuralError(f"unknown centering mode {centering!r}")


def residuals(
    seq: DistributionalSequence,
    centering: str = CENTERING_GLOBAL,
    k_hat: int | None = None,
) -> list[ClrFunction]:
    """clr residuals after removing the global or per-segment clr mean."""
    mat = _residual_matrix(seq.clr_matrix(), centering, k_hat)
    return [ClrFunction(seq.grid, row) for row in mat]


def _covariance_eigen_from_matrix(
    res: np.ndarray, weights: np.ndarray, theta: float
) -> CovarianceEigen:
    n, m = res.shape
    cov = (res.T @ res) / n
    sqrt_w = np.sqrt(weights)
    sym = cov * np.outer(sqrt_w, sqrt_w)
    evals, evecs = np.linalg.eigh(sym)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    leading = float(evals[0]) if evals.size else 0.0
    if leading <= 0.0:
        return CovarianceEigen(
            eigenvalues=np.zeros_like(evals),
            eigenfunctions=evecs / sqrt_w[:, None],
            truncation=0,
            theta=theta,
            degenerate=True,
        )
    clipped = np.where(evals < EIGENVALUE_CLIP_RATIO * leading, 0.0, evals)
    cumulative = np.cumsum(clipped) / clipped.sum()
    truncation = int(np.searchsorted(cumulative, theta)) + 1
    truncation = min(truncation, int(np.count_nonzero(clipped)))
    return CovarianceEigen(
        eigenvalues=clipped,
        eigenfunctions=evecs / sqrt_w[:, None],
        truncation=truncation,
        theta=theta,
        degenerate=False,
    )


def covariance_eigen(
    residual_functions: Sequence[ClrFunction], theta: float = DEFAULT_THETA
) -> CovarianceEigen:
    """Eigenpairs of the empirical covariance operator of clr residuals.

    The integral operator with kernel C(t, s) = (1/n) sum_i e_i(t) e_i(s)
    is discretized with trapezoid weights W and solved as the symmetric
    problem W^(1/2) C W^(1/2); eigenfunctions are mapped back by W^(-1/2)
    so they are orthonormal under the weighted inner product.
    """
    if len(residual_functions) < 2:
        raise StructuralError("need at least 2 residuals for a covariance")
    if not 0.0 < theta <= 1.0:
        raise StructuralError(f"theta must be in (0, 1], got {theta}")
    grid = residual_functions[0].grid
    mat = np.vstack([r.values for r in residual_functions])
    return _covariance_eigen_from_matrix(mat, grid.weights, theta)


def _simulate_chunk(
    lambdas: np.ndarray, count: int, bridge_nodes: int, chunk_seed: int
) -> np.ndarray:
    rng = np.random.default_rng(chunk_seed)
    steps = bridge_nodes - 1
    dt = 1.0 / steps
    t = np.arange(1, bridge_nodes) * dt
    incr = rng.standard_normal((count, lambdas.size, steps)) * np.sqrt(dt)
    walk = np.cumsum(incr, axis=2)
    bridge = walk - t[None, None, :] * walk[:, :, -1:]
    weighted = np.einsum("l,klj->kj", lambdas, bridge * bridge)
    return weighted.max(axis=1)


def simulate_limit_samples(
    eigen: CovarianceEigen | Sequence[float],
    mc_samples: int,
    bridge_nodes: int = DEFAULT_BRIDGE_NODES,
    seed: int = 0,
    threads: int = 1,
) -> np.ndarray:
    """Monte Carlo samples of sup_x sum_l lambda_l B_l(x)^2.

    Each Brownian bridge is a Gaussian random walk with sqrt(dt)-scaled
    increments, pinned by B(t) = W(t) - t W(1); the sup is taken over the
    ``bridge_nodes`` grid.  Accepts a :class:`CovarianceEigen` (uses its
    retained eigenvalues) or an explicit eigenvalue sequence.  Samples are
    generated in fixed-size chunks with seeds derived from ``(seed,
    chunk)``, so output is independent of thread count.
    """
    if isinstance(eigen, CovarianceEigen):
        lambdas = np.asarray(eigen.retained(), dtype=np.float64)
    else:
        lambdas = np.asarray(eigen, dtype=np.float64)
    if lambdas.size == 0:
        raise DegenerateInputError("no eigenvalues retained; nothing to simulate")
    if np.any(lambdas < 0) or not np.all(np.isfinite(lambdas)):
        raise NumericError("eigenvalues must be finite and non-negative")
    if mc_samples < 1:
        raise StructuralError(f"mc_samples must be >= 1, got {mc_samples}")
    if bridge_nodes < 64:
        raise StructuralError(f"bridge_nodes must be >= 64, got {bridge_nodes}")

    counts = [_MC_CHUNK] * (mc_samples // _MC_CHUNK)
    if mc_samples % _MC_CHUNK:
        counts.append(mc_samples % _MC_CHUNK)

    def run(chunk_index: int) -> np.ndarray:
        return _simulate_chunk(
            lambdas, counts[chunk_index], bridge_nodes, derive_seed(seed, chunk_index)
        )

    chunks = parallel_map(run, range(len(counts)), threads)
    return np.concatenate(chunks)


def p_value(statistic: float, samples: Sequence[float]) -> float:
    """Fraction of Monte Carlo limit samples at or above the statistic."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise StructuralError("p_value needs a nonempty sample set")
    if not np.isfinite(statistic):
        raise NumericError(f"statistic must be finite, got {statistic!r}")
    return float(np.count_nonzero(samples >= statistic)) / samples.size


def _degenerate_result(
    profile: CusumProfile,
    *,
    alpha: float,
    mc_samples: int,
    seed: int,
    centering: str,
    method: str,
) -> DetectionResult:
    return DetectionResult(
        k_hat=profile.argmax_k,
        statistic=profile.statistic,
        p_value=1.0,
        alpha=alpha,
        reject_null=False,
        L=0,
        eigenvalues=(),
        mc_samples=mc_samples,
        seed=seed,
        centering=centering,
        degenerate=True,
        method=method,
    )


def _detect_core(
    mat: np.ndarray,
    weights: np.ndarray,
    *,
    alpha: float,
    mc_samples: int,
    theta: float,
    seed: int,
    centering: str,
    bridge_nodes: int,
    threads: int,
    method: str,
) -> DetectionResult:
    if not 0.0 < alpha < 1.0:
        raise StructuralError(f"alpha must be in (0, 1), got {alpha}")
    profile = _profile_from_matrix(mat, weights)
    if profile.degenerate:
        return _degenerate_result(
            profile, alpha=alpha, mc_samples=mc_samples, seed=seed,
            centering=centering, method=method,
        )
    k_hat = profile.argmax_k
    res = _residual_matrix(mat, centering, k_hat)
    eigen = _covariance_eigen_from_matrix(res, weights, theta)
    if eigen.degenerate or eigen.truncation == 0:
        return _degenerate_result(
            profile, alpha=alpha, mc_samples=mc_samples, seed=seed,
            centering=centering, method=method,
        )
    samples = simulate_limit_samples(
        eigen, mc_samples, bridge_nodes=bridge_nodes, seed=seed, threads=threads
    )
    p = p_value(profile.statistic, samples)
    return DetectionResult(
        k_hat=k_hat,
        statistic=profile.statistic,
        p_value=p,
        alpha=alpha,
        reject_null=p < alpha,
        L=eigen.truncation,
        eigenvalues=tuple(float(v) for v in eigen.retained()),
        mc_samples=mc_samples,
        seed=seed,
        centering=centering,
        degenerate=False,
        method=method,
    )


def mean_increment(seq: DistributionalSequence, k_hat: int) -> DensityFunction:
    """Bayes-space difference of post- and pre-break segment means."""
    if not 1 <= k_hat < seq.n:
        raise DegenerateInputError(f"increment needs 1 <= k_hat < n, got {k_hat}")
    pre = b_mean(seq.densities[:k_hat])
    post = b_mean(seq.densities[k_hat:])
    return b_add(post, b_smul(-1.0, pre))


def detect(
    seq: DistributionalSequence,
    alpha: float = DEFAULT_ALPHA,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    theta: float = DEFAULT_THETA,
    seed: int = 0,
    *,
    centering: str = CENTERING_GLOBAL,
    bridge_nodes: int = DEFAULT_BRIDGE_NODES,
    threads: int = 1,
) -> DetectionResult:
    """Full Bayes-space change-point detection on a density sequence."""
    result = _detect_core(
        seq.clr_matrix(),
        seq.grid.weights,
        alpha=alpha,
        mc_samples=mc_samples,
        theta=theta,
        seed=seed,
        centering=centering,
        bridge_nodes=bridge_nodes,
        threads=threads,
        method=METHOD_BAYES,
    )
    if result.reject_null and 1 <= result.k_hat < seq.n:
        result = replace(result, increment=mean_increment(seq, result.k_hat))
    return result


def detect_l2_raw(
    seq: DistributionalSequence,
    alpha: float = DEFAULT_ALPHA,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    theta: float = DEFAULT_THETA,
    seed: int = 0,
    *,
    centering: str = CENTERING_GLOBAL,
    bridge_nodes: int = DEFAULT_BRIDGE_NODES,
    threads: int = 1,
) -> DetectionResult:
    """Competing detector: the same pipeline on raw density values in L2."""
    return _detect_core(
        seq.values_matrix(),
        seq.grid.weights,
        alpha=alpha,
        mc_samples=mc_samples,
        theta=theta,
        seed=seed,
        centering=centering,
        bridge_nodes=bridge_nodes,
        threads=threads,
        method=METHOD_L2,
    )
