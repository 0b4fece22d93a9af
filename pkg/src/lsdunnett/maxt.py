"""Single-step max-T inference for linear functions of coefficient estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import linmod
from .contrasts import ContrastFamily, dunnett_contrasts, dunnett_labels
from .datamodel import Dataset, levene_transform
from .mvdist import DEFAULT_QMC, QmcConfig, maxmod_adjusted_p, maxmod_critical, repair_corr


@dataclass(frozen=True)
class MaxTResult:
    labels: tuple[str, ...]
    estimates: np.ndarray
    std_errors: np.ndarray
    statistics: np.ndarray
    corr: np.ndarray
    df: int
    adj_p: np.ndarray
    sci_lower: np.ndarray
    sci_upper: np.ndarray
    alpha: float
    critical: float
    degenerate: np.ndarray
    method: str = ""

    @property
    def raw_p(self) -> np.ndarray:
        """Unadjusted two-sided p-values."""
        t = np.abs(self.statistics)
        dist = stats.norm if self.df == 0 else stats.t(self.df)
        return np.where(self.degenerate, 1.0, 2.0 * dist.sf(np.nan_to_num(t)))

    def rejected(self, alpha: float | None = None) -> np.ndarray:
        return self.adj_p < (self.alpha if alpha is None else alpha)

    def subset(self, rows) -> "MaxTResult":
        """Rows of this result (inference still refers to the full family)."""
        idx = np.asarray(rows)
        return MaxTResult(
            labels=tuple(self.labels[i] for i in np.arange(len(self.labels))[idx]),
            estimates=self.estimates[idx],
            std_errors=self.std_errors[idx],
            statistics=self.statistics[idx],
            corr=self.corr[np.ix_(np.arange(len(self.labels))[idx], np.arange(len(self.labels))[idx])],
            df=self.df,
            adj_p=self.adj_p[idx],
            sci_lower=self.sci_lower[idx],
            sci_upper=self.sci_upper[idx],
            alpha=self.alpha,
            critical=self.critical,
            degenerate=self.degenerate[idx],
            method=self.method,
        )


def contrast_moments(coef, vcov, family: ContrastFamily):
    coef = np.asarray(coef, dtype=float)
    vcov = np.asarray(vcov, dtype=float)
    C = family.matrix
    if C.shape[1] != coef.size or vcov.shape != (coef.size, coef.size):
        raise ValueError("dimension mismatch between coefficients, vcov and contrasts")
    est = C @ coef
    cov = C @ vcov @ C.T
    cov = 0.5 * (cov + cov.T)
    var = np.diag(cov)
    scale = max(float(np.max(np.abs(var))), 1e-300)
    degenerate = ~(var > 1e-14 * scale) | ~np.isfinite(var) | ~np.isfinite(est)
    se = np.sqrt(np.clip(var, 0.0, None))
    return est, cov, se, degenerate


def maxt_test(
    coef,
    vcov,
    family: ContrastFamily,
    df: int = 0,
    alpha: float = 0.05,
    cfg: QmcConfig = DEFAULT_QMC,
    method: str = "",
) -> MaxTResult:
    """Statistics, single-step adjusted p-values and simultaneous intervals.

    ``df=0`` refers the statistics to the multivariate normal, otherwise
    to the multivariate t with ``df`` degrees of freedom.  Contrasts with
    zero variance are flagged degenerate, get ``adj_p = 1`` and are left
    out of the joint distribution.
    """
    est, cov, se, degenerate = contrast_moments(coef, vcov, family)
    q = est.size
    ok = ~degenerate
    tstat = np.full(q, np.nan)
    tstat[ok] = est[ok] / se[ok]
    corr = np.full((q, q), np.nan)
    adj = np.ones(q)
    crit = np.nan
    if ok.any():
        sub = cov[np.ix_(ok, ok)]
        sd = np.sqrt(np.diag(sub))
        r = repair_corr(sub / np.outer(sd, sd))
        corr[np.ix_(ok, ok)] = r
        adj[ok] = maxmod_adjusted_p(tstat[ok], r, df, cfg)
        crit = maxmod_critical(alpha, r, df, cfg)
    half = np.where(ok, crit * se, 0.0)
    return MaxTResult(
        labels=family.labels,
        estimates=est,
        std_errors=se,
        statistics=tstat,
        corr=corr,
        df=int(df),
        adj_p=adj,
        sci_lower=est - half,
        sci_upper=est + half,
        alpha=alpha,
        critical=crit,
        degenerate=degenerate,
        method=method,
    )


def maxt_min_p(coef, vcov, family: ContrastFamily, df: int = 0, cfg: QmcConfig = DEFAULT_QMC) -> float:
    """Smallest adjusted p-value of the family (the one of the largest |t|)."""
    t, corr = standardized(coef, vcov, family)
    if t.size == 0:
        return 1.0
    return float(maxmod_adjusted_p([t.max()] * t.size, corr, df, cfg)[0])


def standardized(coef, vcov, family: ContrastFamily) -> tuple[np.ndarray, np.ndarray]:
    """|t| and correlation of the non-degenerate contrasts."""
    est, cov, se, degenerate = contrast_moments(coef, vcov, family)
    ok = ~degenerate
    sub = cov[np.ix_(ok, ok)]
    sd = se[ok]
    return np.abs(est[ok] / sd), sub / np.outer(sd, sd)


def exceeds(t: float, corr: np.ndarray, df: int, alpha: float, cfg: QmcConfig = DEFAULT_QMC,
            cache: dict | None = None) -> bool:
    """Whether ``P(max |T| >= t) < alpha`` for the family with ``corr``.

    The raw p-value bounds the adjusted one from below and ``q`` times
    it bounds it from above, so the integral is only needed in between.
    With ``cache`` the critical value is memoised per correlation matrix.
    """
    q = corr.shape[0]
    if q == 0 or not t > 0:
        return False
    dist = stats.norm if df == 0 else stats.t(df)
    raw = 2.0 * float(dist.sf(t))
    if raw >= alpha:
        return False
    if q * raw < alpha:
        return True
    if cache is not None:
        key = (df, np.round(corr, 10).tobytes())
        if key not in cache:
            cache[key] = maxmod_critical(alpha, corr, df, cfg)
        return t > cache[key]
    return float(maxmod_adjusted_p([t] * q, corr, df, cfg)[0]) < alpha


def rejects(coef, vcov, family: ContrastFamily, df: int = 0, alpha: float = 0.05,
            cfg: QmcConfig = DEFAULT_QMC, cache: dict | None = None) -> bool:
    """True when any contrast of the family has adjusted p below ``alpha``."""
    t, corr = standardized(coef, vcov, family)
    return t.size > 0 and exceeds(float(t.max()), corr, df, alpha, cfg, cache)


def _dunnett(model: linmod.FittedLinearModel, vcov: np.ndarray, df: int, alpha: float,
             cfg: QmcConfig, method: str) -> MaxTResult:
    k = model.coefficients.size - 1
    fam = dunnett_contrasts(k, dunnett_labels(model.labels))
    return maxt_test(model.coefficients, vcov, fam, df, alpha, cfg, method)


def dunnett_classical(ds: Dataset, alpha: float = 0.05, cfg: QmcConfig = DEFAULT_QMC) -> MaxTResult:
    """Dunnett test with the pooled variance and residual df."""
    m = linmod.fit_ols(ds)
    return _dunnett(m, m.vcov_classical, m.df_resid, alpha, cfg, "location")


def dunnett_sandwich(ds: Dataset, alpha: float = 0.05, cfg: QmcConfig = DEFAULT_QMC,
                     hc: str = "HC3") -> MaxTResult:
    """Dunnett test with the HC3 covariance, still on the residual df."""
    m = linmod.fit_ols(ds)
    return _dunnett(m, linmod.vcov_sandwich(m, hc), m.df_resid, alpha, cfg, "sandwich")


def dunnett_scale(ds: Dataset, alpha: float = 0.05, cfg: QmcConfig = DEFAULT_QMC,
                  df: str = "asymptotic") -> MaxTResult:
    """Dunnett test on the Levene (median-centred) endpoint.

    ``df="asymptotic"`` uses the normal reference; ``df="classical"``
    uses the residual df of the transformed-response fit.
    """
    if df not in ("asymptotic", "classical"):
        raise ValueError("df must be 'asymptotic' or 'classical'")
    m = linmod.fit_ols(levene_transform(ds))
    return _dunnett(m, m.vcov_classical, 0 if df == "asymptotic" else m.df_resid, alpha, cfg, "scale")
