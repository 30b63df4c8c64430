"""Monte Carlo and random-matrix experiments for the two central limit theorems."""
from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg, stats

from .covariance import (
    PSD_TOL,
    CovarianceModel,
    sigma_squared,
    spectral_density,
    summability_check,
)
from .errors import ContractError, DivergenceError, HypothesisViolation, ModelInvalidError, NumericError
from .orthopoly import Basis, FunctionalSeries, rank

EMBED_TOL = 1e-10
MC_CHUNK = 256


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _embedding_eigenvalues(m: CovarianceModel, N: int) -> np.ndarray | None:
    """Eigenvalues of the size-2N circulant extension, or None if it is not PSD."""
    size = 2 * N
    r = np.asarray(m(np.arange(N + 1)), dtype=float)
    c = np.concatenate([r, r[1:N][::-1]])
    lam = np.fft.fft(c).real
    if lam.min() < -EMBED_TOL * max(lam.max(), 1.0):
        return None
    return np.clip(lam, 0.0, None) / size


def _toeplitz_factor(m: CovarianceModel, N: int) -> np.ndarray:
    C = linalg.toeplitz(np.asarray(m(np.arange(N)), dtype=float))
    try:
        return linalg.cholesky(C, lower=True)
    except linalg.LinAlgError:
        raise ModelInvalidError("covariance matrix is not positive definite; the model is not a valid covariance") from None


def _paths(m: CovarianceModel, N: int, gens: Sequence[np.random.Generator]) -> np.ndarray:
    lam = _embedding_eigenvalues(m, N)
    if lam is not None:
        size = 2 * N
        z = np.stack([g.standard_normal(size) + 1j * g.standard_normal(size) for g in gens])
        return np.fft.fft(np.sqrt(lam) * z, axis=-1).real[:, :N]
    chol = _toeplitz_factor(m, N)
    z = np.stack([g.standard_normal(N) for g in gens])
    return z @ chol.T


def sample_gaussian_path(m: CovarianceModel, N: int, seed: int = 0) -> np.ndarray:
    """One stationary Gaussian path ``X_1..X_N`` with covariance ``r``.

    Circulant embedding of size ``2N``; if the embedding has negative
    eigenvalues, a dense Cholesky factor of the Toeplitz matrix is used instead.
    """
    if N < 1:
        raise ContractError("N must be positive")
    return _paths(m, N, [_rng(seed)])[0]


@dataclass
class McReport:
    reps: int
    N: int
    sample_mean: float
    sample_var: float
    sample_skew: float
    sample_kurtosis: float  # excess kurtosis
    ks_distance_vs_normal: float
    sigma2: float
    seed: int

    def to_json(self) -> dict:
        return {"schema": 1, **asdict(self)}


def require_clt_hypotheses(s: FunctionalSeries, m: CovarianceModel):
    """Raise unless the induced covariance is summable with nonzero sum. Returns sigma^2."""
    rep = summability_check(s, m)
    if not rep.summable:
        raise DivergenceError(f"summability fails for rank {rep.rank}: {rep.criterion}")
    sig = sigma_squared(s, m)
    if sig.vanishing:
        raise HypothesisViolation(f"long-run variance vanishes (sigma^2 = {sig.value:.3g}); the CLT needs sigma^2 != 0")
    return sig.value


def mc_distribution(s: FunctionalSeries, m: CovarianceModel, N: int, reps: int, seed: int = 0,
                    threads: int = 1) -> McReport:
    """Replicate ``N^{-1/2} sum_{i<=N} H(X_i)`` and compare with ``N(0, sigma^2)``.

    Replication ``j`` draws from its own stream derived from ``(seed, j)``.
    """
    if s.basis is not Basis.HERMITE:
        raise ContractError("Monte Carlo needs a Hermite series (classical world)")
    if reps < 1 or N < 1:
        raise ContractError("reps and N must be positive")
    sigma2 = require_clt_hypotheses(s, m)

    def chunk(start):
        idx = range(start, min(start + MC_CHUNK, reps))
        x = _paths(m, N, [_rng(seed, j) for j in idx])
        return s(x).sum(axis=1) / math.sqrt(N)

    starts = range(0, reps, MC_CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(chunk, starts))
    else:
        parts = [chunk(st) for st in starts]
    v = np.concatenate(parts)
    ks = stats.kstest(v, stats.norm(scale=math.sqrt(sigma2)).cdf).statistic
    return McReport(
        reps=reps, N=N,
        sample_mean=float(v.mean()),
        sample_var=float(v.var(ddof=1)) if reps > 1 else 0.0,
        sample_skew=float(stats.skew(v)) if reps > 2 else 0.0,
        sample_kurtosis=float(stats.kurtosis(v)) if reps > 3 else 0.0,
        ks_distance_vs_normal=float(ks),
        sigma2=sigma2, seed=seed,
    )


class MovingAverage(NamedTuple):
    coeffs: np.ndarray
    residual: float


def _spectral_horizon(m: CovarianceModel, grid: int) -> int:
    if m.support is not None:
        return m.support
    lim = grid // 2 - 1
    if m.kind == "geometric" and m.a > 0:
        return min(lim, int(math.ceil(math.log(1e-17) / math.log(m.a))))
    if m.kind == "geometric":
        return 0
    return lim


def ma_coefficients(m: CovarianceModel, max_lag: int, grid: int | None = None) -> MovingAverage:
    """Causal coefficients ``a_0..a_max_lag`` with ``sum_j a_j a_{j+t} ~ r(t)``.

    The minimum-phase square root of the spectral density, computed through
    the cepstrum (log-spectrum folded onto nonnegative quefrencies).
    """
    if max_lag < 0:
        raise ContractError("max_lag must be nonnegative")
    grid = grid or max(1 << 16, 8 * (max_lag + 1))
    T = _spectral_horizon(m, grid)
    if m.support is not None:
        grid = max(grid, 4 * (T + 1))
    f = spectral_density(m, T, grid)
    if f.min() < -PSD_TOL:
        raise ModelInvalidError(f"negative spectral density {f.min():.3g}: not a valid covariance")
    f = np.clip(f, 1e-12 * f.max(), None)
    cep = np.fft.ifft(np.log(f)).real
    fold = np.zeros(grid)
    fold[0] = cep[0] / 2
    fold[1:grid // 2] = cep[1:grid // 2]
    fold[grid // 2] = cep[grid // 2] / 2
    a = np.fft.ifft(np.exp(np.fft.fft(fold))).real[: max_lag + 1]
    h = max_lag // 2
    acov = np.correlate(a, a, mode="full")[max_lag: max_lag + h + 1]
    target = np.asarray(m(np.arange(h + 1)), dtype=float)
    diff = np.abs(acov - target)
    residual = float(diff[0] + 2 * diff[1:].sum())
    return MovingAverage(a, residual)


def stieltjes_semicircle(z, sigma: float = 1.0):
    """``int dmu(x) / (x - z)`` for the centred semicircle law of variance ``sigma**2``."""
    z = np.asarray(z, dtype=complex)
    if sigma <= 0:
        raise ContractError("sigma must be positive")
    if np.any(z.imag <= 0):
        raise ContractError("Stieltjes transform is defined for Im z > 0")
    # product of principal roots picks the branch with sqrt(z^2 - 4 s^2) ~ z at infinity
    root = np.sqrt(z - 2 * sigma) * np.sqrt(z + 2 * sigma)
    out = (-z + root) / (2 * sigma * sigma)
    return complex(out) if out.ndim == 0 else out


def stieltjes_empirical(eigenvalues, z):
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0:
        raise ContractError("empty eigenvalue list")
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ContractError("Stieltjes transform is defined for Im z > 0")
    out = np.mean(1.0 / (lam[:, None] - z.ravel()[None, :]), axis=0).reshape(z.shape)
    return complex(out) if out.ndim == 0 else out


def semicircle_moment(p: int, sigma2: float = 1.0) -> float:
    return 0.0 if p % 2 else math.comb(p, p // 2) / (p // 2 + 1) * sigma2 ** (p // 2)


DEFAULT_Z = (1j, 1 + 1j, -1 + 1j, 0.5j, 2j, 1.5 + 0.5j)


@dataclass
class SpectralReport:
    dim: int
    N: int
    empirical_moments: list[float]
    reference_moments: list[float] | None
    sigma2: float | None
    stieltjes_samples: list[tuple[complex, complex, complex | None]]
    seed: int
    ma_terms: int
    eigenvalues: np.ndarray = field(repr=False, default=None)

    def histogram(self, bins: int = 64):
        density, edges = np.histogram(self.eigenvalues, bins=bins, density=True)
        return 0.5 * (edges[1:] + edges[:-1]), density

    def to_json(self) -> dict:
        def c(v):
            return None if v is None else [v.real, v.imag]

        return {"schema": 1, "dim": self.dim, "N": self.N, "seed": self.seed, "sigma2": self.sigma2,
                "ma_terms": self.ma_terms,
                "empirical_moments": self.empirical_moments, "reference_moments": self.reference_moments,
                "stieltjes_samples": [{"z": c(z), "empirical": c(e), "reference": c(r)}
                                      for z, e, r in self.stieltjes_samples]}


def gue(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian Gaussian matrix with entry variance ``1/dim`` (so the spectrum fills [-2, 2])."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / (2 * math.sqrt(dim))


def _series_of_matrix(s: FunctionalSeries, X: np.ndarray) -> np.ndarray:
    # forward Chebyshev recursion keeping two terms
    eye = np.eye(X.shape[0], dtype=X.dtype)
    out = np.zeros_like(X)
    prev, cur = eye, X
    for k, c in enumerate(s.coeffs):
        if k >= 2:
            prev, cur = cur, X @ cur - prev
        if k >= 1 and c:
            out += c * cur
    return out


def rmt_clt_check(s: FunctionalSeries, m: CovarianceModel, N: int, dim: int, seed: int = 0,
                  z_points: Sequence[complex] = DEFAULT_Z, ma_tol: float = 1e-10) -> SpectralReport:
    """Spectrum of ``N^{-1/2} sum_i U(X_i)`` for a matrix model of a stationary semicircular family.

    ``X_i = sum_j a_j G_{i+j}`` with independent Hermitian Gaussian ``G`` and
    causal MA weights ``a`` reproducing ``r``; the ``G_j`` come from streams
    keyed by ``(seed, j)``.
    """
    if s.basis is not Basis.CHEBYSHEV:
        raise ContractError("the random-matrix check needs a Chebyshev series (free world)")
    if dim < 256:
        raise ContractError("dim must be at least 256")
    if N < 1:
        raise ContractError("N must be positive")
    rank(s)
    a = ma_coefficients(m, 256).coeffs
    tail = np.cumsum((a**2)[::-1])[::-1]
    L = int(np.argmax(tail < ma_tol)) if np.any(tail < ma_tol) else len(a)
    a = a[: max(L, 1)]
    L = len(a)

    window: deque[np.ndarray] = deque(gue(dim, _rng(seed, j)) for j in range(L))
    Y = np.zeros((dim, dim), dtype=complex)
    for i in range(N):
        X = sum(a[j] * window[j] for j in range(L))
        Y += _series_of_matrix(s, X)
        window.popleft()
        window.append(gue(dim, _rng(seed, i + L)))
    Y /= math.sqrt(N)
    Y = 0.5 * (Y + Y.conj().T)
    try:
        lam = linalg.eigvalsh(Y)
    except linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from None
    emp = [float(np.mean(lam**p)) for p in range(1, 7)]
    try:
        sigma2 = sigma_squared(s, m).value
    except DivergenceError:
        sigma2 = None
    ref = [semicircle_moment(p, sigma2) for p in range(1, 7)] if sigma2 and sigma2 > 0 else None
    samples = []
    for z in z_points:
        ref_z = stieltjes_semicircle(z, math.sqrt(sigma2)) if ref else None
        samples.append((complex(z), stieltjes_empirical(lam, z), ref_z))
    return SpectralReport(dim, N, emp, ref, sigma2, samples, seed, L, lam)
