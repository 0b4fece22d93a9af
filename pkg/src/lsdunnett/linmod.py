"""One-way layout least squares with classical and HC covariances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .datamodel import Dataset


@dataclass(frozen=True)
class FittedLinearModel:
    """Treatment-coded fit of ``y ~ group`` with the control as reference.

    ``coefficients[0]`` is the control mean and ``coefficients[j]`` the
    difference between group ``j`` and the control.
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    design: np.ndarray
    sigma2: float
    df_resid: int
    vcov_classical: np.ndarray
    group_sizes: np.ndarray
    codes: np.ndarray
    labels: tuple[str, ...]

    @property
    def xtx_inv(self) -> np.ndarray:
        return _xtx_inv(self.group_sizes)

    @property
    def leverage(self) -> np.ndarray:
        # h_ii = 1/n_g in a one-way layout
        return 1.0 / self.group_sizes[self.codes]


def design_matrix(codes: np.ndarray, n_groups: int) -> np.ndarray:
    X = np.zeros((codes.size, n_groups))
    X[:, 0] = 1.0
    rows = np.flatnonzero(codes > 0)
    X[rows, codes[rows]] = 1.0
    return X


def _xtx_inv(sizes: np.ndarray) -> np.ndarray:
    # closed form for treatment coding: 1/n0 everywhere plus 1/nj on the diagonal
    g = sizes.size
    inv = np.full((g, g), 1.0 / sizes[0])
    inv[0, 1:] = inv[1:, 0] = -1.0 / sizes[0]
    inv[np.arange(1, g), np.arange(1, g)] += 1.0 / sizes[1:]
    return inv


def fit_ols(ds: Dataset) -> FittedLinearModel:
    y = ds.response
    sizes = ds.group_sizes.astype(float)
    means = np.bincount(ds.codes, weights=y, minlength=ds.n_groups) / sizes
    coef = means - means[0]
    coef[0] = means[0]
    resid = y - means[ds.codes]
    df = ds.n_obs - ds.n_groups
    sigma2 = float(resid @ resid) / df if df > 0 else np.nan
    return FittedLinearModel(
        coefficients=coef,
        residuals=resid,
        design=design_matrix(ds.codes, ds.n_groups),
        sigma2=sigma2,
        df_resid=df,
        vcov_classical=sigma2 * _xtx_inv(sizes),
        group_sizes=sizes,
        codes=ds.codes,
        labels=ds.levels,
    )


def vcov_sandwich(model: FittedLinearModel, type: str = "HC3") -> np.ndarray:
    """Heteroscedasticity-consistent covariance ``B M B``.

    ``type`` is one of HC0..HC3; HC3 divides each squared residual by
    ``(1 - h_ii)**2``.
    """
    r2 = model.residuals**2
    h = model.leverage
    n, p = model.design.shape
    if type != "HC0" and np.any(h >= 1.0 - 1e-12):
        raise ValueError("leverage of 1 (single-observation cell); sandwich undefined")
    if type == "HC0":
        omega = r2
    elif type == "HC1":
        omega = r2 * n / (n - p)
    elif type == "HC2":
        omega = r2 / (1.0 - h)
    elif type == "HC3":
        omega = r2 / (1.0 - h) ** 2
    else:
        raise ValueError(f"unknown sandwich type {type!r}")
    X = model.design
    bread = model.xtx_inv
    meat = (X * omega[:, None]).T @ X
    v = bread @ meat @ bread
    return 0.5 * (v + v.T)


def levene_global_test(ds: Dataset) -> float:
    """Global variance-homogeneity p-value (Levene, mean-centred).

    One-way ANOVA F test on ``|y - mean(group)|``.  Note that this uses
    group means, unlike :func:`~lsdunnett.datamodel.levene_transform`,
    which centres on group medians.
    """
    return levene_global_stat(ds)[1]


def levene_global_stat(ds: Dataset) -> tuple[float, float]:
    means = np.bincount(ds.codes, weights=ds.response) / ds.group_sizes
    z = np.abs(ds.response - means[ds.codes])
    fit = fit_ols(ds.with_response(z))
    g, n = ds.n_groups, ds.n_obs
    ss_within = float(fit.residuals @ fit.residuals)
    ss_between = float(((fit.coefficients[0] + np.r_[0.0, fit.coefficients[1:]] - z.mean()) ** 2)
                       @ ds.group_sizes)
    if ss_within <= 0.0:
        return (0.0, 1.0) if ss_between <= 0.0 else (np.inf, 0.0)
    f = (ss_between / (g - 1)) / (ss_within / (n - g))
    return f, float(stats.f.sf(f, g - 1, n - g))
