import numpy as np
import pytest
from scipy import stats

from lsdunnett import linmod
from lsdunnett.datamodel import Dataset


def _ds(groups):
    codes = np.concatenate([[i] * len(g) for i, g in enumerate(groups)])
    return Dataset(tuple(f"g{i}" for i in range(len(groups))), codes, np.concatenate(groups).astype(float))


def test_exact_fit():
    m = linmod.fit_ols(_ds([[0, 0], [1, 1]]))
    np.testing.assert_allclose(m.coefficients, [0, 1])
    assert m.sigma2 == 0


def test_chol_fit(chol):
    m = linmod.fit_ols(chol)
    assert m.coefficients[0] == pytest.approx(95.1)
    assert m.df_resid == 54


def test_f4_effect(f4):
    m = linmod.fit_ols(f4)
    j = f4.levels.index("acr")
    assert m.coefficients[j] == pytest.approx(f4.group("acr").mean() - f4.group("wt").mean())
    assert m.coefficients[j] < 0


def test_matches_lstsq(chol):
    m = linmod.fit_ols(chol)
    beta, *_ = np.linalg.lstsq(m.design, chol.response, rcond=None)
    np.testing.assert_allclose(m.coefficients, beta, rtol=1e-12)
    np.testing.assert_allclose(m.xtx_inv, np.linalg.inv(m.design.T @ m.design), atol=1e-14)
    h = np.diag(m.design @ m.xtx_inv @ m.design.T)
    np.testing.assert_allclose(m.leverage, h)


def test_hc3_toy_by_hand():
    # c: (0, 2), t: (0, 4); residuals -1, 1, -2, 2; every leverage 1/2
    m = linmod.fit_ols(_ds([[0, 2], [0, 4]]))
    v = linmod.vcov_sandwich(m, "HC3")
    # HC3 meat weight r^2/(1-h)^2 = 4 r^2.  var(control mean) = sum over control of (1/2)^2 * 4 r^2
    v00 = 0.25 * 4 * (1 + 1)
    v11 = 0.25 * 4 * (4 + 4)
    expected = np.array([[v00, -v00], [-v00, v00 + v11]])
    np.testing.assert_allclose(v, expected)


def test_hc_variants_general_formula(chol):
    m = linmod.fit_ols(chol)
    X, r, h = m.design, m.residuals, m.leverage
    n, p = X.shape
    B = np.linalg.inv(X.T @ X)
    for kind, w in [("HC0", r**2), ("HC1", r**2 * n / (n - p)), ("HC2", r**2 / (1 - h)),
                    ("HC3", r**2 / (1 - h) ** 2)]:
        np.testing.assert_allclose(linmod.vcov_sandwich(m, kind), B @ (X.T * w) @ X @ B, rtol=1e-10)
    with pytest.raises(ValueError):
        linmod.vcov_sandwich(m, "HC9")


def test_sandwich_vs_classical_chol(chol):
    m = linmod.fit_ols(chol)
    hc = linmod.vcov_sandwich(m)
    assert hc[1, 1] > m.vcov_classical[1, 1]


def test_sandwich_near_classical_homoscedastic():
    a = np.array([-1.0, 1.0] * 20)
    m = linmod.fit_ols(_ds([a, a + 3]))
    ratio = linmod.vcov_sandwich(m)[1, 1] / m.vcov_classical[1, 1]
    assert ratio == pytest.approx(1.0, abs=0.1)


def test_levene_chol(chol):
    assert linmod.levene_global_test(chol) == pytest.approx(0.07, abs=0.01)


def test_levene_mirror_groups():
    f, p = linmod.levene_global_stat(_ds([[1, 2, 4], [-1, -2, -4]]))
    assert f == pytest.approx(0.0, abs=1e-12)
    assert p == pytest.approx(1.0)


def test_levene_hand_anova():
    # groups (1, 3, 5) and (0, 4, 8): |y - mean| = (2, 0, 2) and (4, 0, 4)
    f, p = linmod.levene_global_stat(_ds([[1, 3, 5], [0, 4, 8]]))
    ssb = 3 * (4 / 3 - 2) ** 2 + 3 * (8 / 3 - 2) ** 2
    ssw = (4 / 9 + 16 / 9 + 4 / 9) + (16 / 9 + 64 / 9 + 16 / 9)
    assert f == pytest.approx(ssb / (ssw / 4))
    assert p == pytest.approx(stats.f.sf(ssb / (ssw / 4), 1, 4))
    # scipy's Levene test with mean centring is an independent oracle
    assert p == pytest.approx(stats.levene([1, 3, 5], [0, 4, 8], center="mean").pvalue)
