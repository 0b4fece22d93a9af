"""Many-to-one contrast families on model coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ContrastFamily:
    matrix: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        labels = tuple(self.labels)
        if m.shape[0] != len(labels):
            raise ValueError("one label per contrast row required")
        if len(set(labels)) != len(labels):
            raise ValueError("contrast labels must be unique")
        if np.any(np.all(m == 0.0, axis=1)):
            raise ValueError("contrast rows must be nonzero")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", labels)

    @property
    def n_contrasts(self) -> int:
        return self.matrix.shape[0]

    def induced_corr(self, vcov: np.ndarray) -> np.ndarray:
        cov = self.matrix @ vcov @ self.matrix.T
        sd = np.sqrt(np.diag(cov))
        return cov / np.outer(sd, sd)


def dunnett_contrasts(k: int, labels: Sequence[str] | None = None) -> ContrastFamily:
    """``[0 | I_k]`` on treatment-coded coefficients."""
    if k < 1:
        raise ValueError("need at least one treatment")
    if labels is None:
        labels = [f"T{j} - C" for j in range(1, k + 1)]
    if len(labels) != k:
        raise ValueError("need k labels")
    return ContrastFamily(np.hstack([np.zeros((k, 1)), np.eye(k)]), tuple(labels))


def dunnett_labels(levels: Sequence[str]) -> list[str]:
    return [f"{lv} - {levels[0]}" for lv in levels[1:]]


def mlt_selector(n_basis: int, n_shift: int, shift_labels: Sequence[str] | None = None) -> ContrastFamily:
    """Rows of the identity that pick the shift coefficients after the basis block."""
    if shift_labels is None:
        shift_labels = [f"beta{j}" for j in range(1, n_shift + 1)]
    full = np.eye(n_basis + n_shift)
    return ContrastFamily(full[n_basis:], tuple(shift_labels))


def block_diagonal(*families: ContrastFamily, prefixes: Sequence[str] | None = None) -> ContrastFamily:
    """Stack families acting on concatenated coefficient vectors."""
    rows = sum(f.n_contrasts for f in families)
    cols = sum(f.matrix.shape[1] for f in families)
    m = np.zeros((rows, cols))
    labels: list[str] = []
    r = c = 0
    for i, f in enumerate(families):
        q, p = f.matrix.shape
        m[r:r + q, c:c + p] = f.matrix
        pre = f"{prefixes[i]}: " if prefixes else ""
        labels.extend(pre + lab for lab in f.labels)
        r += q
        c += p
    return ContrastFamily(m, tuple(labels))
