"""Grouped one-way data with a designated control level.

The control is always level 0.  Observations are stored as integer
level codes plus a float response vector, which is all the fitting
code downstream needs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed input data (bad CSV, too-small groups, ...)."""


@dataclass(frozen=True)
class Dataset:
    """Univariate responses in ``len(levels)`` groups, control first.

    Parameters
    ----------
    levels : tuple of str
        Group labels; ``levels[0]`` is the control.
    codes : ndarray of int
        Level index of every observation.
    response : ndarray of float
        Response of every observation.
    name : str
    """

    levels: tuple[str, ...]
    codes: np.ndarray
    response: np.ndarray
    name: str = "data"
    _sizes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        codes = np.asarray(self.codes, dtype=np.intp)
        y = np.asarray(self.response, dtype=float)
        levels = tuple(str(lv) for lv in self.levels)
        if codes.ndim != 1 or y.shape != codes.shape:
            raise DataError("codes and response must be 1-d of equal length")
        if len(levels) < 2:
            raise DataError("need at least two group levels")
        if len(set(levels)) != len(levels):
            raise DataError("group levels must be unique")
        if codes.size and (codes.min() < 0 or codes.max() >= len(levels)):
            raise DataError("level code out of range")
        if not np.all(np.isfinite(y)):
            raise DataError("responses must be finite")
        sizes = np.bincount(codes, minlength=len(levels))
        small = [levels[i] for i in np.flatnonzero(sizes < 2)]
        if small:
            raise DataError(f"group too small (< 2 observations): {', '.join(small)}")
        codes.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "_sizes", sizes)

    @classmethod
    def from_labels(
        cls,
        groups: Sequence[str],
        response: Sequence[float],
        control: str,
        name: str = "data",
        levels: Sequence[str] | None = None,
    ) -> "Dataset":
        """Build from per-observation labels.

        Without explicit ``levels`` the non-control levels keep their
        order of first appearance.
        """
        groups = [str(g) for g in groups]
        control = str(control)
        if control not in groups:
            raise DataError(f"control level {control!r} not found among groups")
        if levels is None:
            seen = dict.fromkeys(groups)
            seen.pop(control)
            levels = [control, *seen]
        else:
            levels = [str(lv) for lv in levels]
            if levels[0] != control:
                levels.remove(control)
                levels.insert(0, control)
        index = {lv: i for i, lv in enumerate(levels)}
        try:
            codes = np.array([index[g] for g in groups], dtype=np.intp)
        except KeyError as exc:
            raise DataError(f"group {exc.args[0]!r} not among levels") from None
        return cls(tuple(levels), codes, np.asarray(response, dtype=float), name)

    @property
    def n_obs(self) -> int:
        return int(self.codes.size)

    @property
    def n_groups(self) -> int:
        return len(self.levels)

    @property
    def control(self) -> str:
        return self.levels[0]

    @property
    def group_sizes(self) -> np.ndarray:
        return self._sizes.copy()

    @property
    def groups(self) -> np.ndarray:
        """Label of every observation."""
        return np.asarray(self.levels, dtype=object)[self.codes]

    def group(self, level: str | int) -> np.ndarray:
        i = level if isinstance(level, int) else self.levels.index(level)
        return self.response[self.codes == i]

    def with_response(self, response: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(self.levels, self.codes, response, name or self.name)

    def to_csv(self, path: str | Path, group_col: str = "group", response_col: str = "response") -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([group_col, response_col])
            for g, y in zip(self.groups, self.response):
                w.writerow([g, repr(float(y))])


def load_csv(path: str | Path, group_col: str, response_col: str, control_level: str) -> Dataset:
    """Read a comma-separated file with a header row into a :class:`Dataset`."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (group_col, response_col):
            if col not in header:
                raise DataError(f"missing column {col!r} in {path} (have {header})")
        groups, ys = [], []
        for row in reader:
            cell = (row[response_col] or "").strip()
            try:
                y = float(cell)
            except ValueError:
                # header is line 1
                raise DataError(
                    f"row {reader.line_num}: cannot parse {response_col}={cell!r} as a number"
                ) from None
            if not np.isfinite(y):
                raise DataError(f"row {reader.line_num}: non-finite {response_col}={cell!r}")
            groups.append((row[group_col] or "").strip())
            ys.append(y)
    return Dataset.from_labels(groups, ys, control_level, name=path.stem)


_BUILTIN = {
    # file, group column, response column, control, explicit level order
    "F4": ("F4.csv", "Group", "Number", "wt",
           ("wt", "a", "acr", "b", "c", "com", "d", "e", "f", "g", "h")),
    "CHOL": ("CHOL.csv", "Dose", "Cholesterol", "0", None),
}


def builtin_names() -> list[str]:
    return sorted(_BUILTIN)


def builtin_dataset(name: str) -> Dataset:
    """Return one of the embedded example datasets (``"F4"`` or ``"CHOL"``).

    F4 holds seed counts per silique for wild type and ten transgenic
    lines; CHOL holds cholesterol values of a six-arm dose study.
    """
    try:
        fname, gcol, ycol, control, levels = _BUILTIN[name.upper()]
    except KeyError:
        raise DataError(f"unknown dataset {name!r}; choose from {builtin_names()}") from None
    text = resources.files("lsdunnett.data").joinpath(fname).read_text(encoding="utf-8")
    rows = list(csv.DictReader(text.splitlines()))
    groups = [_fmt_level(r[gcol]) for r in rows]
    ys = [float(r[ycol]) for r in rows]
    return Dataset.from_labels(groups, ys, control, name=name.upper(), levels=levels)


def _fmt_level(s: str) -> str:
    # dose levels print like R factor labels: 0, 62.5, 125
    try:
        v = float(s)
    except ValueError:
        return s
    return str(int(v)) if v.is_integer() else str(v)


def levene_transform(ds: Dataset) -> Dataset:
    """Absolute deviations from the group median, groups unchanged."""
    y = ds.response
    med = np.array([np.median(y[ds.codes == i]) for i in range(ds.n_groups)])
    return ds.with_response(np.abs(y - med[ds.codes]), name=f"{ds.name}|levene")
