"""Rectangle probabilities of multivariate normal and t distributions.

Randomised lattice quasi-Monte Carlo over the separation-of-variables
transform with a pivoted Cholesky factor (variables are reordered so
that the most constrained ones are integrated first).  For ``df > 0``
an extra coordinate draws the chi scaling of the multivariate t.

Every call with the same :class:`QmcConfig` uses the same random
shifts, so results are reproducible and p-values computed for several
statistics share their integration error (which keeps adjusted
p-values monotone in the statistic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

PSD_TOL = 1e-8
_UNIT = 1e-15


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class QmcConfig:
    n_points: int = 4096
    n_shifts: int = 12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_points < 128:
            raise ValueError("n_points must be >= 128")
        if self.n_shifts < 8:
            raise ValueError("n_shifts must be >= 8")


DEFAULT_QMC = QmcConfig()


def _primes(n: int) -> np.ndarray:
    out: list[int] = []
    cand = 2
    while len(out) < n:
        if all(cand % p for p in out if p * p <= cand):
            out.append(cand)
        cand += 1
    return np.array(out, dtype=float)


def repair_corr(corr: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Symmetrise, clip tiny negative eigenvalues and restore the unit diagonal."""
    r = np.asarray(corr, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("correlation matrix must be square")
    r = 0.5 * (r + r.T)
    w, v = np.linalg.eigh(r)
    if w.min() < -tol * max(1.0, w.max()):
        raise ValueError(f"correlation matrix not positive semidefinite (min eigenvalue {w.min():.3g})")
    if w.min() < 0.0:
        r = (v * np.clip(w, 0.0, None)) @ v.T
    d = np.sqrt(np.clip(np.diag(r), _UNIT, None))
    r = r / np.outer(d, d)
    np.fill_diagonal(r, 1.0)
    return r


def _pivoted_cholesky(corr: np.ndarray, lower: np.ndarray, upper: np.ndarray):
    """Cholesky factor with Genz-Bretz variable prioritisation.

    Returns (L, lower, upper) in the chosen order.  Singular pivots get a
    zero column so those coordinates become deterministic.
    """
    q = corr.shape[0]
    r = corr.copy()
    a = lower.copy()
    b = upper.copy()
    L = np.zeros((q, q))
    y = np.zeros(q)
    for i in range(q):
        s = L[i:, :i] @ y[:i]
        var = np.diag(r)[i:] - np.sum(L[i:, :i] ** 2, axis=1)
        den = np.sqrt(np.clip(var, 0.0, None))
        with np.errstate(divide="ignore", invalid="ignore"):
            prob = np.where(
                den > 1e-10,
                special.ndtr((b[i:] - s) / den) - special.ndtr((a[i:] - s) / den),
                np.inf,
            )
        j = i + int(np.argmin(prob))
        if j != i:
            r[[i, j]] = r[[j, i]]
            r[:, [i, j]] = r[:, [j, i]]
            L[[i, j]] = L[[j, i]]
            a[[i, j]] = a[[j, i]]
            b[[i, j]] = b[[j, i]]
        d2 = r[i, i] - L[i, :i] @ L[i, :i]
        if d2 <= 1e-20:
            L[i, i] = 0.0
            y[i] = 0.0
            continue
        lii = math.sqrt(d2)
        L[i, i] = lii
        L[i + 1:, i] = (r[i + 1:, i] - L[i + 1:, :i] @ L[i, :i]) / lii
        si = L[i, :i] @ y[:i]
        lo, hi = (a[i] - si) / lii, (b[i] - si) / lii
        mass = special.ndtr(hi) - special.ndtr(lo)
        if mass > 1e-300:
            y[i] = (stats.norm.pdf(lo) - stats.norm.pdf(hi)) / mass
        else:
            y[i] = lo if np.isfinite(lo) else hi
    return L, a, b


def _integrand(w: np.ndarray, L: np.ndarray, a: np.ndarray, b: np.ndarray, df: int) -> np.ndarray:
    """Separation-of-variables integrand at points ``w`` (n, dims) in [0, 1]."""
    n = w.shape[0]
    q = L.shape[0]
    if df > 0:
        scale = np.sqrt(stats.chi2.ppf(np.clip(w[:, 0], _UNIT, 1 - _UNIT), df) / df)
        w = w[:, 1:]
    else:
        scale = np.ones(n)
    f = np.ones(n)
    y = np.empty((n, q))
    for i in range(q):
        s = y[:, :i] @ L[i, :i] if i else np.zeros(n)
        lii = L[i, i]
        ai = a[i] * scale
        bi = b[i] * scale
        if lii == 0.0:
            f = f * ((ai - 1e-10 <= s) & (s <= bi + 1e-10))
            y[:, i] = 0.0
            continue
        with np.errstate(invalid="ignore"):
            d = special.ndtr((ai - s) / lii)
            e = special.ndtr((bi - s) / lii)
        f = f * (e - d)
        if i < q - 1:
            u = d + w[:, i] * (e - d)
            y[:, i] = special.ndtri(np.clip(u, _UNIT, 1 - _UNIT))
    return f


def mv_rect_prob(
    lower,
    upper,
    corr,
    df: int = 0,
    cfg: QmcConfig = DEFAULT_QMC,
) -> tuple[float, float]:
    """P(lower <= T <= upper) for T multivariate normal (``df=0``) or t.

    Returns ``(prob, error)`` where ``error`` is three standard errors
    over the random shifts.
    """
    a = np.atleast_1d(np.asarray(lower, dtype=float))
    b = np.atleast_1d(np.asarray(upper, dtype=float))
    r = np.atleast_2d(np.asarray(corr, dtype=float))
    q = a.size
    if b.size != q or r.shape != (q, q):
        raise ValueError("dimension mismatch between bounds and correlation matrix")
    if np.any(a >= b):
        raise ValueError("lower bounds must be below upper bounds")
    if df < 0:
        raise ValueError("df must be >= 0")
    r = repair_corr(r)
    if q == 1:
        dist = stats.norm if df == 0 else stats.t(df)
        return float(dist.cdf(b[0]) - dist.cdf(a[0])), 0.0
    L, a, b = _pivoted_cholesky(r, a, b)
    dims = q - 1 + (1 if df > 0 else 0)
    gen = np.sqrt(_primes(dims))
    gen -= np.floor(gen)
    rng = np.random.default_rng(cfg.seed)
    shifts = rng.random((cfg.n_shifts, dims))
    base = np.outer(np.arange(1, cfg.n_points + 1), gen)
    est = np.empty(cfg.n_shifts)
    for k in range(cfg.n_shifts):
        x = base + shifts[k]
        x -= np.floor(x)
        w = np.abs(2.0 * x - 1.0)  # baker's transform
        est[k] = _integrand(w, L, a, b, df).mean()
    prob = float(est.mean())
    err = 3.0 * float(est.std(ddof=1)) / math.sqrt(cfg.n_shifts)
    return min(max(prob, 0.0), 1.0), err


def maxmod_adjusted_p(
    statistics,
    corr,
    df: int = 0,
    cfg: QmcConfig = DEFAULT_QMC,
) -> np.ndarray:
    """Two-sided single-step p-values ``P(max |T| >= |t_j|)``."""
    t = np.abs(np.atleast_1d(np.asarray(statistics, dtype=float)))
    q = t.size
    r = repair_corr(corr)
    out = np.empty(q)
    cache: dict[float, float] = {}
    for j, tj in enumerate(t):
        if tj not in cache:
            if tj == 0.0:
                cache[tj] = 1.0
            elif not np.isfinite(tj):
                cache[tj] = 0.0
            else:
                prob, err = mv_rect_prob(-np.full(q, tj), np.full(q, tj), r, df, cfg)
                cache[tj] = min(1.0, max(1.0 - prob, err))
        out[j] = cache[tj]
    return out


def maxmod_critical(
    alpha: float,
    corr,
    df: int = 0,
    cfg: QmcConfig = DEFAULT_QMC,
    tol: float = 1e-4,
    max_iter: int = 100,
) -> float:
    """Two-sided critical value ``c`` with ``P(max |T| <= c) = 1 - alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    r = repair_corr(corr)
    q = r.shape[0]
    dist = stats.norm if df == 0 else stats.t(df)
    lo = float(dist.ppf(1 - alpha / 2))
    if q == 1:
        return lo
    hi = float(dist.ppf(1 - alpha / (2 * q))) + 0.05
    target = 1.0 - alpha

    def cover(c: float) -> float:
        return mv_rect_prob(-np.full(q, c), np.full(q, c), r, df, cfg)[0]

    lo -= 0.05
    while cover(hi) < target:
        hi += 0.5
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        p = cover(mid)
        if abs(p - target) <= tol:
            return mid
        if p < target:
            lo = mid
        else:
            hi = mid
    raise IntegrationError("critical value bisection did not converge")
