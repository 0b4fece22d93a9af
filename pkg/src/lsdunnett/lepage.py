"""Lepage-type permutation max-test for many-to-one comparisons.

Each observation gets two scores, its midrank (location) and its
Ansari-Bradley score (scale).  For comparison ``j`` the design is
transformed by the Dunnett contrast, ``g_j(x) = 1{x = j} - 1{x = control}``,
and the linear statistics ``T_jc = sum_i g_j(x_i) h_c(y_i)`` are
standardised with their exact permutation moments.  The maximum
absolute standardised statistic is referred to its permutation
distribution, giving single-step adjusted p-values.

When the number of distinct group-label assignments does not exceed
``nresample`` the permutation distribution is enumerated exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .contrasts import dunnett_labels
from .datamodel import Dataset

CHUNK = 1000
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class ScoreMatrix:
    values: np.ndarray
    labels: tuple[str, ...] = ("Location", "Scale")


@dataclass(frozen=True)
class PermutationResult:
    labels: tuple[str, ...]
    statistics: np.ndarray
    adj_p: np.ndarray
    nresample: int
    seed: int
    exact: bool
    degenerate: np.ndarray
    alpha: float = 0.05
    method: str = "lepage"

    def rejected(self, alpha: float | None = None) -> np.ndarray:
        return self.adj_p < (self.alpha if alpha is None else alpha)


def lepage_scores(y) -> ScoreMatrix:
    """Midranks and Ansari-Bradley scores ``min(R, N + 1 - R)``."""
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise ValueError("need at least two observations")
    r = stats.rankdata(y)
    return ScoreMatrix(np.column_stack([r, np.minimum(r, y.size + 1 - r)]))


def contrast_design(codes: np.ndarray, n_groups: int) -> np.ndarray:
    """(N, k) Dunnett-transformed one-hot design."""
    g = np.zeros((codes.size, n_groups - 1))
    for j in range(1, n_groups):
        g[codes == j, j - 1] = 1.0
    g[codes == 0, :] = -1.0
    return g


def conditional_moments(g: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact permutation mean and covariance of ``vec(g' h)``.

    ``vec`` stacks the columns of the (k, c) statistic, so the result is
    ordered by score column first.
    """
    n = g.shape[0]
    eh = h.mean(axis=0)
    hc = h - eh
    vh = hc.T @ hc / n
    gs = g.sum(axis=0)
    mu = np.outer(gs, eh).ravel(order="F")
    a = n / (n - 1) * (g.T @ g) - np.outer(gs, gs) / (n - 1)
    return mu, np.kron(vh, a)


def _n_assignments(sizes: np.ndarray) -> int:
    out = math.factorial(int(sizes.sum()))
    for s in sizes:
        out //= math.factorial(int(s))
    return out


def _distinct_assignments(codes: np.ndarray):
    """Every distinct rearrangement of the group labels, as index orders."""
    n = codes.size
    sizes = np.bincount(codes)

    def rec(free: tuple[int, ...], level: int):
        if level == sizes.size - 1:
            yield [free]
            return
        for chosen in itertools.combinations(free, int(sizes[level])):
            rest = tuple(i for i in free if i not in chosen)
            for tail in rec(rest, level + 1):
                yield [chosen, *tail]

    for parts in rec(tuple(range(n)), 0):
        lab = np.empty(n, dtype=np.intp)
        for level, pos in enumerate(parts):
            lab[list(pos)] = level
        yield lab


class _Standardiser:
    def __init__(self, codes: np.ndarray, n_groups: int, h: np.ndarray):
        self.g = contrast_design(codes, n_groups)
        self.h = h
        mu, cov = conditional_moments(self.g, h)
        sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        scale = max(float(sd.max()), 1e-300)
        self.mu = mu
        self.degenerate = ~(sd > 1e-12 * scale)
        self.sd = np.where(self.degenerate, 1.0, sd)

    def z_from_labels(self, labels: np.ndarray) -> np.ndarray:
        """Standardised statistics for rows of relabelled groups, (B, k*c)."""
        # column j of the design for relabelled data; labels: (B, N) codes
        b, n = labels.shape
        k = self.g.shape[1]
        onehot = np.zeros((b, n, k + 1))
        np.put_along_axis(onehot, labels[..., None], 1.0, axis=2)
        g = onehot[..., 1:] - onehot[..., :1]
        t = np.einsum("bnk,nc->bck", g, self.h).reshape(b, -1)
        z = (t - self.mu) / self.sd
        z[:, self.degenerate] = 0.0
        return z

    def z_from_perm(self, perm: np.ndarray) -> np.ndarray:
        """Standardised statistics with scores permuted by ``perm`` (B, N)."""
        hp = self.h[perm]  # (B, N, c)
        t = np.einsum("bnc,nk->bck", hp, self.g).reshape(perm.shape[0], -1)
        z = (t - self.mu) / self.sd
        z[:, self.degenerate] = 0.0
        return z


def _count_exceed(maxima: np.ndarray, z_abs: np.ndarray) -> np.ndarray:
    thr = z_abs * (1.0 - _TIE_TOL) - _TIE_TOL
    return (maxima[:, None] >= thr[None, :]).sum(axis=0)


def _null_maxima(st: _Standardiser, codes: np.ndarray, nresample: int, seed: int,
                 columns: list[np.ndarray]) -> tuple[list[np.ndarray], bool]:
    """Null max |z| over each column subset; exact enumeration when affordable."""
    sizes = np.bincount(codes)
    if _n_assignments(sizes) <= nresample:
        labs = np.array(list(_distinct_assignments(codes)))
        z = np.abs(st.z_from_labels(labs))
        return [z[:, c].max(axis=1) for c in columns], True
    n = codes.size
    out: list[list[np.ndarray]] = [[] for _ in columns]
    for chunk, start in enumerate(range(0, nresample, CHUNK)):
        b = min(CHUNK, nresample - start)
        rng = np.random.default_rng([seed, chunk])
        perm = rng.permuted(np.tile(np.arange(n), (b, 1)), axis=1)
        z = np.abs(st.z_from_perm(perm))
        for i, c in enumerate(columns):
            out[i].append(z[:, c].max(axis=1))
    return [np.concatenate(o) for o in out], False


def _adjust(maxima: np.ndarray, z_abs: np.ndarray, exact: bool) -> np.ndarray:
    hits = _count_exceed(maxima, z_abs)
    if exact:
        return hits / maxima.size
    return (1.0 + hits) / (maxima.size + 1.0)


def lepage_dunnett(
    ds: Dataset,
    nresample: int = 10000,
    seed: int = 0,
    alpha: float = 0.05,
    components: str = "both",
) -> PermutationResult:
    """Single-step permutation max-test on location (and scale) scores.

    ``components="location_only"`` runs the max-test over the k rank
    statistics alone.
    """
    if components not in ("both", "location_only"):
        raise ValueError("components must be 'both' or 'location_only'")
    if nresample < 1000:
        raise ValueError("nresample must be >= 1000")
    h = lepage_scores(ds.response).values
    names = ["location"]
    if components == "location_only":
        h = h[:, :1]
    else:
        names.append("scale")
    st = _Standardiser(ds.codes, ds.n_groups, h)
    z_obs = ((np.einsum("nk,nc->ck", st.g, h).ravel() - st.mu) / st.sd)
    z_obs[st.degenerate] = 0.0
    ok = np.flatnonzero(~st.degenerate)
    adj = np.ones(z_obs.size)
    exact = _n_assignments(np.bincount(ds.codes)) <= nresample
    if ok.size:
        (maxima,), exact = _null_maxima(st, ds.codes, nresample, seed, [ok])
        adj[ok] = _adjust(maxima, np.abs(z_obs[ok]), exact)
    labels = tuple(f"{nm}: {lab}" for nm in names for lab in dunnett_labels(ds.levels))
    stat = np.where(st.degenerate, np.nan, z_obs)
    return PermutationResult(labels, stat, adj, int(nresample), int(seed), exact,
                             st.degenerate.copy(), alpha,
                             "lepage" if components == "both" else "lepage-location")


def lepage_rejections(ds: Dataset, nresample: int, seed: int, alpha: float = 0.05) -> tuple[bool, bool]:
    """(LEPA rejects anything, location-only max-test rejects anything).

    Both tests reuse one set of resampled permutations; each has its
    own maximum statistic and null distribution.
    """
    h = lepage_scores(ds.response).values
    k = ds.n_groups - 1
    st = _Standardiser(ds.codes, ds.n_groups, h)
    z_obs = np.abs((np.einsum("nk,nc->ck", st.g, h).ravel() - st.mu) / st.sd)
    z_obs[st.degenerate] = 0.0
    both = np.flatnonzero(~st.degenerate)
    if both.size == 0:
        return False, False
    loc = both[both < k]
    (m_both, m_loc), exact = _null_maxima(st, ds.codes, nresample, seed,
                                          [both, loc if loc.size else both])
    rej = []
    for cols, m in ((both, m_both), (loc, m_loc)):
        if cols.size == 0:
            rej.append(False)
            continue
        rej.append(bool(_adjust(m, np.array([z_obs[cols].max()]), exact)[0] < alpha))
    return rej[0], rej[1]
