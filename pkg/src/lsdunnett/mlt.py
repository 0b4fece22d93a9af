"""Most likely transformation models with additive group shifts.

The conditional distribution function is modelled as
``P(Y <= y | group) = Phi(b(y)'theta + x'beta)`` with ``b`` a Bernstein
basis of order ``M`` on the 1%/99% quantile support, ``theta``
nondecreasing (so the transformation is monotone) and ``x`` the
treatment-coded group indicators.  With this sign convention a group
that is stochastically *larger* than the control has a *negative*
shift ``beta``.

The negative log-likelihood

    -sum_i [log phi(b_i'theta + x_i'beta) + log(b_i''theta)]

is convex in ``(theta, beta)``, so it is minimised by an active-set
Newton method on the linear monotonicity constraints using analytic
first and second derivatives.  The covariance is the inverse observed
information at the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .contrasts import dunnett_labels, mlt_selector
from .datamodel import Dataset
from .maxt import MaxTResult, maxt_test, rejects
from .mvdist import DEFAULT_QMC, QmcConfig

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class BernsteinBasis:
    order: int = 5
    support: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self) -> None:
        a, b = self.support
        if not a < b:
            raise ValueError("support must satisfy a < b")
        if self.order < 0:
            raise ValueError("order must be >= 0")

    @property
    def n_basis(self) -> int:
        return self.order + 1

    def _inside(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m = self.order
        j = np.arange(m + 1)
        val = special.comb(m, j) * u[:, None] ** j * (1.0 - u[:, None]) ** (m - j)
        if m == 0:
            return val, np.zeros_like(val)
        jj = np.arange(m)
        low = special.comb(m - 1, jj) * u[:, None] ** jj * (1.0 - u[:, None]) ** (m - 1 - jj)
        der = np.zeros_like(val)
        der[:, 1:] += m * low
        der[:, :-1] -= m * low
        return val, der / (self.support[1] - self.support[0])

    def evaluate(self, y) -> tuple[np.ndarray, np.ndarray]:
        """Basis values and first derivatives, each (n, order + 1).

        Outside the support the basis is extended linearly from the
        nearer boundary (value and slope matched).
        """
        y = np.atleast_1d(np.asarray(y, dtype=float))
        a, b = self.support
        u = np.clip((y - a) / (b - a), 0.0, 1.0)
        val, der = self._inside(u)
        for edge, mask in ((a, y < a), (b, y > b)):
            if mask.any():
                ev, ed = self._inside(np.array([0.0 if edge == a else 1.0]))
                val[mask] = ev + (y[mask] - edge)[:, None] * ed
                der[mask] = ed
        return val, der


def bernstein_eval(basis: BernsteinBasis, y) -> tuple[np.ndarray, np.ndarray]:
    v, d = basis.evaluate(y)
    if np.ndim(y) == 0:
        return v[0], d[0]
    return v, d


@dataclass(frozen=True)
class TransformationModel:
    basis: BernsteinBasis
    theta: np.ndarray
    beta: np.ndarray
    vcov: np.ndarray
    loglik: float
    loglik_start: float
    iterations: int
    active: tuple[int, ...]
    levels: tuple[str, ...] = ()

    @property
    def coef(self) -> np.ndarray:
        return np.concatenate([self.theta, self.beta])

    def transform(self, y, group: int = 0) -> np.ndarray:
        v, _ = self.basis.evaluate(y)
        shift = 0.0 if group == 0 else self.beta[group - 1]
        return v @ self.theta + shift

    def to_text(self) -> str:
        a, b = self.basis.support
        lines = [f"order {self.basis.order}", f"support {a!r} {b!r}",
                 "theta " + " ".join(repr(float(t)) for t in self.theta),
                 "beta " + " ".join(repr(float(t)) for t in self.beta)]
        if self.levels:
            lines.append("levels " + " ".join(self.levels))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TransformationModel":
        kv = {}
        for line in text.strip().splitlines():
            key, _, rest = line.partition(" ")
            kv[key] = rest.split()
        basis = BernsteinBasis(int(kv["order"][0]), (float(kv["support"][0]), float(kv["support"][1])))
        theta = np.array([float(v) for v in kv["theta"]])
        beta = np.array([float(v) for v in kv.get("beta", [])])
        p = theta.size + beta.size
        return cls(basis, theta, beta, np.full((p, p), np.nan), np.nan, np.nan, 0, (),
                   tuple(kv.get("levels", ())))


class _Problem:
    """Negative log-likelihood with analytic derivatives."""

    def __init__(self, B: np.ndarray, dB: np.ndarray, X: np.ndarray):
        self.A = np.hstack([B, X])
        self.dA = np.hstack([dB, np.zeros_like(X)])
        self.p = self.A.shape[1]

    def fun(self, x: np.ndarray) -> float:
        z = self.A @ x
        hp = self.dA @ x
        if np.any(hp <= 0.0):
            return np.inf
        return float(0.5 * z @ z + z.size * _LOG_SQRT_2PI - np.log(hp).sum())

    def grad(self, x: np.ndarray) -> np.ndarray:
        z = self.A @ x
        hp = self.dA @ x
        return self.A.T @ z - self.dA.T @ (1.0 / hp)

    def hess(self, x: np.ndarray) -> np.ndarray:
        hp = self.dA @ x
        w = self.dA / hp[:, None]
        return self.A.T @ self.A + w.T @ w


def loglik(model_or_x, ds: Dataset, basis: BernsteinBasis) -> float:
    """Log-likelihood of coefficients ``(theta, beta)`` on ``ds``."""
    prob = _problem(ds, basis)
    x = model_or_x.coef if isinstance(model_or_x, TransformationModel) else np.asarray(model_or_x)
    return -prob.fun(x)


def loglik_grad(x, ds: Dataset, basis: BernsteinBasis) -> np.ndarray:
    return -_problem(ds, basis).grad(np.asarray(x, dtype=float))


def _problem(ds: Dataset, basis: BernsteinBasis) -> _Problem:
    B, dB = basis.evaluate(ds.response)
    X = np.zeros((ds.n_obs, ds.n_groups - 1))
    rows = np.flatnonzero(ds.codes > 0)
    X[rows, ds.codes[rows] - 1] = 1.0
    return _Problem(B, dB, X)


def support_from_data(y, probs=(0.01, 0.99)) -> tuple[float, float]:
    # R's default (type 7) quantile, which is numpy's "linear"
    lo, hi = np.quantile(np.asarray(y, dtype=float), probs)
    if not lo < hi:
        lo, hi = float(np.min(y)), float(np.max(y))
    if not lo < hi:
        raise ValueError("response has no spread; transformation model undefined")
    return float(lo), float(hi)


def starting_values(ds: Dataset, basis: BernsteinBasis) -> np.ndarray:
    """Least-squares fit of the basis to normal scores of the pooled sample."""
    n = ds.n_obs
    target = stats.norm.ppf((stats.rankdata(ds.response) - 0.375) / (n + 0.25))
    B, _ = basis.evaluate(ds.response)
    theta, *_ = np.linalg.lstsq(B, target, rcond=None)
    # enforce strict monotonicity so the start is interior
    step = 1e-3 * max(float(np.ptp(target)), 1.0) / max(basis.order, 1)
    for j in range(1, theta.size):
        theta[j] = max(theta[j], theta[j - 1] + step)
    return np.concatenate([theta, np.zeros(ds.n_groups - 1)])


def _max_feasible_step(x, p, D, inactive, dA) -> tuple[float, int | None]:
    amax, block = np.inf, None
    Dp = D @ p
    Dx = D @ x
    for i in inactive:
        if Dp[i] < 0.0:
            a = -Dx[i] / Dp[i]
            if a < amax:
                amax, block = max(a, 0.0), i
    # keep h' > 0 at every observation (barrier of the log term)
    hp = dA @ x
    dh = dA @ p
    neg = dh < 0.0
    if neg.any():
        a = 0.99 * float(np.min(-hp[neg] / dh[neg]))
        if a < amax:
            amax, block = a, None
    return amax, block


def _active_set_newton(prob: _Problem, x0: np.ndarray, D: np.ndarray,
                       maxit: int = 500, gtol: float = 1e-5, xtol: float = 1e-9):
    x = x0.copy()
    active: list[int] = []
    f = prob.fun(x)
    for it in range(1, maxit + 1):
        g = prob.grad(x)
        H = prob.hess(x)
        A = D[active] if active else np.zeros((0, x.size))
        m = A.shape[0]
        K = np.zeros((x.size + m, x.size + m))
        K[:x.size, :x.size] = H
        K[:x.size, x.size:] = A.T
        K[x.size:, :x.size] = A
        sol = np.linalg.solve(K, np.concatenate([-g, np.zeros(m)]))
        p, nu = sol[:x.size], sol[x.size:]
        mult = -nu
        kkt = np.linalg.norm(g - A.T @ mult) if m else np.linalg.norm(g)
        if kkt < gtol or np.linalg.norm(p) < xtol:
            if m and mult.min() < -gtol:
                active.pop(int(np.argmin(mult)))
                continue
            return x, f, it, tuple(sorted(active)), kkt
        inactive = [i for i in range(D.shape[0]) if i not in active]
        amax, block = _max_feasible_step(x, p, D, inactive, prob.dA)
        step = min(1.0, amax)
        slope = g @ p
        while True:
            xn = x + step * p
            fn = prob.fun(xn)
            if fn <= f + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-16:
                break
        if step < 1e-16:
            return x, f, it, tuple(sorted(active)), kkt
        if block is not None and step >= amax:
            xn = x + amax * p
            active.append(block)
            xn[block + 1] = xn[block] = 0.5 * (xn[block] + xn[block + 1])
        if active:
            # the KKT step keeps active constraints at equality only up to rounding
            for j in sorted(active):
                xn[j + 1] = xn[j]
            fn = prob.fun(xn)
        x, f = xn, fn
    raise ConvergenceError(f"no convergence after {maxit} iterations")


def fit_mlt(ds: Dataset, order: int = 5, support_probs=(0.01, 0.99),
            maxit: int = 500, gtol: float = 1e-5) -> TransformationModel:
    """Maximum likelihood transformation model with group shifts."""
    if order < 1:
        raise ValueError("order must be >= 1")
    basis = BernsteinBasis(order, support_from_data(ds.response, support_probs))
    prob = _problem(ds, basis)
    x0 = starting_values(ds, basis)
    nb = basis.n_basis
    D = np.zeros((order, prob.p))
    D[np.arange(order), np.arange(order)] = -1.0
    D[np.arange(order), np.arange(1, order + 1)] = 1.0
    f0 = prob.fun(x0)
    x, f, it, active, kkt = _active_set_newton(prob, x0, D, maxit, gtol)
    if kkt >= gtol and not active:
        raise ConvergenceError(f"gradient norm {kkt:.3g} after {it} iterations")
    if np.any(prob.dA @ x <= 0.0):
        raise ConvergenceError("transformation not increasing at some observation")
    H = prob.hess(x)
    H = 0.5 * (H + H.T)
    w, v = np.linalg.eigh(H)
    w = np.clip(w, 1e-12 * w.max(), None)
    vcov = (v / w) @ v.T
    return TransformationModel(basis, x[:nb].copy(), x[nb:].copy(), vcov, -f, -f0, it, active,
                               ds.levels)


def mlt_dunnett(ds: Dataset, order: int = 5, alpha: float = 0.05,
                cfg: QmcConfig = DEFAULT_QMC) -> MaxTResult:
    """Dunnett-type test on the group shifts of the transformation model."""
    m = fit_mlt(ds, order)
    fam = mlt_selector(m.basis.n_basis, ds.n_groups - 1, dunnett_labels(ds.levels))
    return maxt_test(m.coef, m.vcov, fam, 0, alpha, cfg, "mlt")


def mlt_rejects(ds: Dataset, order: int = 5, alpha: float = 0.05,
                cfg: QmcConfig = DEFAULT_QMC) -> bool:
    m = fit_mlt(ds, order)
    fam = mlt_selector(m.basis.n_basis, ds.n_groups - 1, dunnett_labels(ds.levels))
    return rejects(m.coef, m.vcov, fam, 0, alpha, cfg)
