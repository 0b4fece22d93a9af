"""Independent reference computations used by several test modules."""

import itertools

import numpy as np
from scipy import integrate, stats


def bivariate_rect_quadrature(lower, upper, rho):
    """P(lower <= Z <= upper) for a standard bivariate normal, by 1-D adaptive quadrature.

    Conditioning on Z1 = x leaves Z2 ~ N(rho x, 1 - rho^2), so the
    inner integral is exact and only the outer one is numerical.
    """
    s = np.sqrt(1.0 - rho * rho)

    def inner(x):
        return stats.norm.pdf(x) * (stats.norm.cdf((upper[1] - rho * x) / s)
                                    - stats.norm.cdf((lower[1] - rho * x) / s))

    val, _ = integrate.quad(inner, lower[0], upper[0], epsabs=1e-12, epsrel=1e-10, limit=200)
    return val


def bivariate_rect_dblquad(lower, upper, rho):
    """Same probability by direct 2-D integration of the density."""
    det = 1.0 - rho * rho

    def dens(y, x):
        return np.exp(-(x * x - 2 * rho * x * y + y * y) / (2 * det)) / (2 * np.pi * np.sqrt(det))

    val, _ = integrate.dblquad(dens, lower[0], upper[0], lower[1], upper[1], epsabs=1e-11, epsrel=1e-9)
    return val


def mc_max_abs_exceed(t, corr, draws=10_000_000, seed=12345, chunk=1_000_000):
    """Naive Monte Carlo estimate of P(max_j |Z_j| >= t) for Z ~ N(0, corr)."""
    L = np.linalg.cholesky(corr)
    rng = np.random.default_rng(seed)
    hits = 0
    for start in range(0, draws, chunk):
        m = min(chunk, draws - start)
        z = rng.standard_normal((m, corr.shape[0])) @ L.T
        hits += int(np.count_nonzero(np.abs(z).max(axis=1) >= t))
    return hits / draws


def lepage_enumeration_pvalues(y, codes, n_groups, location_only=False):
    """Max-test adjusted p-values by brute force over all N! orderings.

    Standardisation uses the empirical mean and variance over the very
    same enumeration, so no moment formula is shared with the package.
    """
    y = np.asarray(y, float)
    n = y.size
    r = stats.rankdata(y)
    h = np.column_stack([r, np.minimum(r, n + 1 - r)])
    if location_only:
        h = h[:, :1]
    g = np.zeros((n, n_groups - 1))
    for j in range(1, n_groups):
        g[codes == j, j - 1] = 1.0
    g[codes == 0] = -1.0
    stats_all = []
    for perm in itertools.permutations(range(n)):
        stats_all.append((g.T @ h[list(perm)]).T.ravel())
    t_all = np.array(stats_all)
    mu = t_all.mean(axis=0)
    sd = t_all.std(axis=0)
    ok = sd > 1e-12
    z_all = np.zeros_like(t_all)
    z_all[:, ok] = (t_all[:, ok] - mu[ok]) / sd[ok]
    z_obs = np.zeros(t_all.shape[1])
    z_obs[ok] = ((g.T @ h).T.ravel()[ok] - mu[ok]) / sd[ok]
    p = np.ones(z_obs.size)
    if not ok.any():
        return p
    maxima = np.abs(z_all[:, ok]).max(axis=1)
    for j in np.flatnonzero(ok):
        p[j] = np.mean(maxima >= abs(z_obs[j]) - 1e-9)
    return p
