"""Stationary covariance models and the covariances they induce on functionals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import zeta

from .errors import ConfigurationError, ContractError, DivergenceError, NumericError
from .orthopoly import Basis, FunctionalSeries

KINDS = ("geometric", "power", "tabulated")
T_CAP = 10**6
VANISHING_TOL = 1e-12


@dataclass(frozen=True)
class CovarianceModel:
    """``r(t)`` for integer lags with ``r(0) = 1``.

    geometric: ``a**|t|`` with ``0 <= a < 1``; power: ``(1+|t|)**-beta``;
    tabulated: ``values[|t|]`` inside the table and 0 beyond it.
    """

    kind: str
    a: float = 0.0
    beta: float = 0.0
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown covariance kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "geometric" and not (0.0 <= self.a < 1.0):
            raise ConfigurationError(f"geometric decay needs 0 <= a < 1, got {self.a}")
        if self.kind == "power" and not self.beta > 0:
            raise ConfigurationError(f"power decay needs beta > 0, got {self.beta}")
        if self.kind == "tabulated":
            vals = tuple(float(v) for v in self.values)
            if not vals or vals[0] != 1.0:
                raise ConfigurationError("tabulated covariance must start with r(0) = 1")
            if any(abs(v) > 1.0 or not math.isfinite(v) for v in vals):
                raise ConfigurationError("tabulated covariance values must satisfy |r(t)| <= 1")
            object.__setattr__(self, "values", vals)

    @classmethod
    def geometric(cls, a: float) -> "CovarianceModel":
        return cls("geometric", a=float(a))

    @classmethod
    def power(cls, beta: float) -> "CovarianceModel":
        return cls("power", beta=float(beta))

    @classmethod
    def tabulated(cls, values: Sequence[float]) -> "CovarianceModel":
        return cls("tabulated", values=tuple(values))

    @classmethod
    def parse(cls, text: str) -> "CovarianceModel":
        """``geometric:0.5``, ``power:0.6`` or ``tabulated:1,-0.5``."""
        kind, _, arg = text.partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "geometric":
                return cls.geometric(float(arg))
            if kind == "power":
                return cls.power(float(arg))
            if kind == "tabulated":
                return cls.tabulated([float(v) for v in arg.split(",") if v.strip()])
        except ValueError as exc:
            raise ConfigurationError(f"cannot parse covariance model {text!r}: {exc}") from None
        raise ConfigurationError(f"unknown covariance kind in {text!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "CovarianceModel":
        kind = d.get("kind")
        if kind == "geometric":
            return cls.geometric(d["a"])
        if kind == "power":
            return cls.power(d["beta"])
        if kind == "tabulated":
            return cls.tabulated(d["values"])
        raise ConfigurationError(f"unknown covariance kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "geometric":
            return {"kind": "geometric", "a": self.a}
        if self.kind == "power":
            return {"kind": "power", "beta": self.beta}
        return {"kind": "tabulated", "values": list(self.values)}

    @property
    def support(self) -> int | None:
        """Largest lag with a possibly nonzero value, or None for infinite support."""
        return len(self.values) - 1 if self.kind == "tabulated" else None

    def __call__(self, t):
        lag = np.abs(np.asarray(t))
        if self.kind == "geometric":
            if self.a == 0.0:
                out = (lag == 0).astype(float)
            else:
                out = np.power(self.a, lag.astype(float))
        elif self.kind == "power":
            out = np.power(1.0 + lag.astype(float), -self.beta)
        else:
            vals = np.asarray(self.values)
            idx = np.minimum(lag, len(vals) - 1).astype(np.int64)
            out = np.where(lag < len(vals), vals[idx], 0.0)
        return out if out.ndim else float(out)


def functional_covariance(s: FunctionalSeries, m: CovarianceModel, t):
    """``sum_k c_k^2 ||P_k||^2 r(t)^k`` -- the covariance of ``P(X_0)`` and ``P(X_t)``."""
    r = np.asarray(m(t), dtype=float)
    out = np.zeros_like(r)
    for k, w in enumerate(s.weights()):
        if w:
            out = out + w * r**k
    return out if out.ndim else float(out)


class SummabilityReport(NamedTuple):
    summable: bool
    rank: int
    criterion: str


def summability_check(s: FunctionalSeries, m: CovarianceModel) -> SummabilityReport:
    """Decide whether ``sum_t |r(t)|^rank`` is finite."""
    k = s.rank
    if m.kind == "geometric":
        return SummabilityReport(True, k, f"geometric decay a={m.a} < 1: sum of a^(rank*|t|) converges")
    if m.kind == "tabulated":
        return SummabilityReport(True, k, "finite support")
    ok = m.beta * k > 1
    rel = ">" if ok else "<="
    return SummabilityReport(ok, k, f"power decay: beta*rank = {m.beta}*{k} = {m.beta * k:g} {rel} 1")


class SigmaSquared(NamedTuple):
    value: float
    tail_bound: float
    vanishing: bool
    method: str


def _tail_bound(weights, m: CovarianceModel, T: int) -> float:
    """Bound on ``sum_{|t|>T} |induced covariance(t)|``."""
    bound = 0.0
    for k, w in enumerate(weights):
        if k == 0 or w == 0:
            continue
        if m.kind == "geometric":
            q = m.a**k
            bound += 2 * abs(w) * q ** (T + 1) / (1 - q)
        elif m.kind == "power":
            e = m.beta * k
            bound += 2 * abs(w) * (1.0 + T) ** (1 - e) / (e - 1)
        elif T < m.support:
            bound += 2 * abs(w) * (m.support - T)
    return bound


def _check_world(s: FunctionalSeries, world):
    if world is not None and Basis.for_world(world) is not s.basis:
        raise ContractError(f"a {s.basis.value} series belongs to the {s.basis.world} world, not {world!r}")


def sigma_squared(s: FunctionalSeries, m: CovarianceModel, world: str | None = None,
                  tail_tol: float = 1e-12, method: str = "auto") -> SigmaSquared:
    """Long-run variance ``sum_{t in Z}`` of the induced covariance.

    ``method="auto"`` sums geometric and power models in closed form (geometric
    series, Riemann zeta) and tabulated models exactly; ``"truncate"`` doubles a
    truncation horizon until the analytic tail bound drops below ``tail_tol``.
    """
    _check_world(s, world)
    rep = summability_check(s, m)
    if not rep.summable:
        raise DivergenceError(f"induced covariance is not summable for rank {rep.rank}: {rep.criterion}")
    w = s.weights()
    if method == "auto":
        if m.kind == "geometric":
            value = sum(wk * (1 + m.a**k) / (1 - m.a**k) for k, wk in enumerate(w) if k and wk)
        elif m.kind == "power":
            # sum over t in Z of (1+|t|)^-e = 1 + 2 (zeta(e) - 1)
            value = sum(wk * (2 * zeta(m.beta * k) - 1) for k, wk in enumerate(w) if k and wk)
        else:
            T = m.support
            lags = np.arange(-T, T + 1)
            value = float(np.sum(functional_covariance(s, m, lags)))
        value, bound, used = float(value), 0.0, "closed-form"
    elif method == "truncate":
        T = 64
        while _tail_bound(w, m, T) > tail_tol:
            if T >= T_CAP:
                raise NumericError(f"tail bound {_tail_bound(w, m, T):.3g} still above {tail_tol:g} at horizon {T_CAP}")
            T = min(2 * T, T_CAP)
        lags = np.arange(1, T + 1)
        value = float(functional_covariance(s, m, 0) + 2 * np.sum(functional_covariance(s, m, lags)))
        bound, used = _tail_bound(w, m, T), f"truncate(T={T})"
    else:
        raise ContractError(f"unknown method {method!r}")
    scale = max(float(np.sum(np.abs(w))), 1.0)
    vanishing = abs(value) <= VANISHING_TOL * scale + bound
    return SigmaSquared(value, bound, vanishing, used)


def truncated_sigma_squared(s: FunctionalSeries, m: CovarianceModel, T: int) -> float:
    """Brute-force ``sum_{|t|<=T}`` of the induced covariance."""
    lags = np.arange(-T, T + 1)
    return float(np.sum(functional_covariance(s, m, lags)))


class PsdReport(NamedTuple):
    min_spectral_value: float
    flagged: bool
    horizon: int
    grid: int


PSD_TOL = 1e-8


def spectral_density(m: CovarianceModel, T: int, grid: int) -> np.ndarray:
    """``sum_{|t|<=T} r(t) exp(2 pi i x t)`` at ``x = j/grid``."""
    if grid <= 2 * T:
        raise ContractError(f"grid {grid} must exceed 2*T = {2 * T}")
    c = np.zeros(grid)
    r = np.asarray(m(np.arange(T + 1)), dtype=float)
    c[: T + 1] = r
    if T:
        c[-T:] = r[1:][::-1]
    return np.fft.fft(c).real


def psd_check(m: CovarianceModel, T: int | None = None, grid: int = 4096) -> PsdReport:
    if T is None:
        T = m.support if m.support is not None else 64
    if m.support is not None and T < m.support:
        raise ContractError(f"horizon {T} is shorter than the tabulated support {m.support}")
    grid = max(grid, 2 * T + 1)
    f = spectral_density(m, T, grid)
    lo = float(f.min())
    return PsdReport(lo, lo < -PSD_TOL, T, grid)
