import numpy as np
import pytest

from lsdunnett import linmod
from lsdunnett.contrasts import ContrastFamily, block_diagonal, dunnett_contrasts, mlt_selector
from lsdunnett.datamodel import Dataset


def test_dunnett_shapes():
    np.testing.assert_array_equal(dunnett_contrasts(1).matrix, [[0, 1]])
    np.testing.assert_array_equal(dunnett_contrasts(3).matrix,
                                  [[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])


def test_balanced_corr_half():
    rng = np.random.default_rng(3)
    ds = Dataset(("a", "b", "c", "d"), np.repeat(np.arange(4), 6), rng.normal(size=24))
    m = linmod.fit_ols(ds)
    r = dunnett_contrasts(3).induced_corr(m.vcov_classical)
    np.testing.assert_allclose(r[np.triu_indices(3, 1)], 0.5)


def test_unbalanced_corr_formula():
    sizes = np.array([8, 3, 5])
    ds = Dataset(("a", "b", "c"), np.repeat(np.arange(3), sizes), np.arange(16.0) ** 1.5)
    r = dunnett_contrasts(2).induced_corr(linmod.fit_ols(ds).vcov_classical)
    n0, n1, n2 = sizes
    expected = np.sqrt(n1 * n2 / ((n0 + n1) * (n0 + n2)))
    assert r[0, 1] == pytest.approx(expected)


def test_mlt_selector():
    s = mlt_selector(6, 3)
    assert s.matrix.shape == (3, 9)
    assert [int(np.flatnonzero(row)[0]) + 1 for row in s.matrix] == [7, 8, 9]
    np.testing.assert_array_equal(mlt_selector(1, 1).matrix, [[0, 1]])
    x = np.arange(9.0)
    np.testing.assert_array_equal(s.matrix @ x, x[6:])


def test_block_diagonal_labels():
    f = block_diagonal(dunnett_contrasts(2, ["a", "b"]), dunnett_contrasts(2, ["a", "b"]),
                       prefixes=["location", "scale"])
    assert f.labels == ("location: a", "location: b", "scale: a", "scale: b")
    assert f.matrix.shape == (4, 6)


def test_validation():
    with pytest.raises(ValueError):
        ContrastFamily(np.array([[0.0, 0.0]]), ("x",))
    with pytest.raises(ValueError):
        ContrastFamily(np.eye(2), ("x", "x"))
    with pytest.raises(ValueError):
        dunnett_contrasts(0)
