"""Monte Carlo familywise error rate and any-pairs power.

Replicate ``r`` of a scenario draws its data from
``default_rng([seed, r])`` and derives its permutation seed from the same
pair, so results do not depend on how replicates are split across
workers.
"""

from __future__ import annotations

import configparser
import logging
import math
import os
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import linmod
from .contrasts import dunnett_contrasts
from .datamodel import Dataset, levene_transform
from .lepage import lepage_rejections
from .maxt import rejects
from .mlt import mlt_rejects
from .mmm import mmm_location_rejects, mmm_rejections
from .mvdist import QmcConfig

log = logging.getLogger(__name__)

# published columns, in table order
TESTS = ("MMM", "MMMl", "DUN", "sDUN", "SCA", "MLT", "LEPA", "LEPAl")
# MMMls: location-only mmm fit on its own (MMMl is the sub-read of the joint family)
ALL_TESTS = TESTS + ("MMMls",)
MAX_FAILURE_RATE = 0.01
THREADS_ENV = "LSDUNNETT_THREADS"


class ScenarioError(ValueError):
    pass


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulationScenario:
    n: tuple[int, ...]
    mu: tuple[float, ...]
    sd: tuple[float, ...]
    alpha: float = 0.05
    nsim: int = 5000
    seed: int = 1
    tests: tuple[str, ...] = ALL_TESTS
    lepage_nresample: int = 1000
    name: str = "custom"
    published: dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not (len(self.n) == len(self.mu) == len(self.sd)):
            raise ScenarioError("n, mu and sd must have equal lengths")
        if len(self.n) < 2:
            raise ScenarioError("need a control and at least one treatment")
        if any(s <= 0 for s in self.sd):
            raise ScenarioError("sd must be positive")
        if any(k < 2 for k in self.n):
            raise ScenarioError("every group needs at least two observations")
        if self.nsim < 100:
            raise ScenarioError("nsim must be >= 100")
        if not 0 < self.alpha < 1:
            raise ScenarioError("alpha must lie in (0, 1)")
        if self.lepage_nresample < 1000:
            raise ScenarioError("lepage_nresample must be >= 1000")
        bad = [t for t in self.tests if t not in ALL_TESTS]
        if bad:
            raise ScenarioError(f"unknown tests {bad}; choose from {list(ALL_TESTS)}")
        if not self.tests or len(set(self.tests)) != len(self.tests):
            raise ScenarioError("tests must be a non-empty list without repeats")


@dataclass(frozen=True)
class ScenarioResult:
    scenario: SimulationScenario
    rates: dict[str, float]
    mc_se: dict[str, float]
    n_valid: dict[str, int]
    failures: dict[str, int]

    @property
    def nsim(self) -> int:
        return self.scenario.nsim


def simulate_dataset(sc: SimulationScenario, r: int) -> Dataset:
    rng = np.random.default_rng([sc.seed, r])
    y = np.concatenate([rng.normal(m, s, size=k) for k, m, s in zip(sc.n, sc.mu, sc.sd)])
    codes = np.repeat(np.arange(len(sc.n)), sc.n)
    levels = tuple(str(i) for i in range(1, len(sc.n) + 1))
    return Dataset(levels, codes, y, name=f"{sc.name}#{r}")


def _replicate(sc: SimulationScenario, r: int, qmc: QmcConfig, cache: dict) -> dict[str, bool | None]:
    ds = simulate_dataset(sc, r)
    k = ds.n_groups - 1
    fam = dunnett_contrasts(k)
    want = set(sc.tests)
    out: dict[str, bool | None] = {}

    def attempt(names, fn):
        try:
            res = fn()
        except Exception as exc:  # noqa: BLE001 - counted, not fatal
            log.debug("replicate %d: %s failed: %s", r, names, exc)
            res = (None,) * len(names)
        for name, val in zip(names, res):
            if name in want:
                out[name] = val

    if want & {"MMM", "MMMl"}:
        attempt(("MMM", "MMMl"), lambda: mmm_rejections(ds, sc.alpha, qmc))
    if "MMMls" in want:
        attempt(("MMMls",), lambda: (mmm_location_rejects(ds, sc.alpha, qmc),))
    if want & {"DUN", "sDUN"}:
        m = linmod.fit_ols(ds)
        if "DUN" in want:
            attempt(("DUN",), lambda: (rejects(m.coefficients, m.vcov_classical, fam, m.df_resid,
                                               sc.alpha, qmc, cache),))
        if "sDUN" in want:
            attempt(("sDUN",), lambda: (rejects(m.coefficients, linmod.vcov_sandwich(m), fam,
                                                m.df_resid, sc.alpha, qmc),))
    if "SCA" in want:
        def sca():
            ms = linmod.fit_ols(levene_transform(ds))
            return (rejects(ms.coefficients, ms.vcov_classical, fam, 0, sc.alpha, qmc, cache),)
        attempt(("SCA",), sca)
    if "MLT" in want:
        attempt(("MLT",), lambda: (mlt_rejects(ds, 5, sc.alpha, qmc),))
    if want & {"LEPA", "LEPAl"}:
        pseed = int(np.random.SeedSequence([sc.seed, r, 1]).generate_state(1)[0])
        attempt(("LEPA", "LEPAl"), lambda: lepage_rejections(ds, sc.lepage_nresample, pseed, sc.alpha))
    return out


def _run_block(sc: SimulationScenario, reps: Sequence[int], qmc: QmcConfig) -> dict[str, list[int]]:
    cache: dict = {}
    counts = {t: [0, 0, 0] for t in sc.tests}  # rejections, valid, failures
    for r in reps:
        for name, val in _replicate(sc, r, qmc, cache).items():
            c = counts[name]
            if val is None:
                c[2] += 1
            else:
                c[1] += 1
                c[0] += bool(val)
    return counts


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_scenario(sc: SimulationScenario, n_jobs: int | None = None,
                 qmc: QmcConfig | None = None) -> ScenarioResult:
    """Any-rejection rate of every requested test over ``sc.nsim`` replicates."""
    qmc = qmc or QmcConfig(seed=sc.seed)
    n_jobs = n_jobs or default_workers()
    reps = range(sc.nsim)
    if n_jobs == 1:
        parts = [_run_block(sc, reps, qmc)]
    else:
        from joblib import Parallel, delayed

        blocks = [reps[i::n_jobs] for i in range(n_jobs)]
        parts = Parallel(n_jobs=n_jobs)(delayed(_run_block)(sc, b, qmc) for b in blocks)
    rates, se, valid, fails = {}, {}, {}, {}
    for t in sc.tests:
        rej = sum(p[t][0] for p in parts)
        nv = sum(p[t][1] for p in parts)
        nf = sum(p[t][2] for p in parts)
        if nf > MAX_FAILURE_RATE * sc.nsim:
            raise SimulationError(f"{t}: {nf} of {sc.nsim} replicates failed in scenario {sc.name}")
        rate = rej / nv if nv else math.nan
        rates[t] = rate
        se[t] = math.sqrt(rate * (1 - rate) / nv) if nv else math.nan
        valid[t] = nv
        fails[t] = nf
    return ScenarioResult(sc, rates, se, valid, fails)


# ---------------------------------------------------------------- scenario files

_FIELDS = {"n", "mu", "sd", "alpha", "nsim", "seed", "tests", "lepage_nresample", "name",
           "block", "published"}


def _line_of(text: str, key: str, section: str | None = None) -> int | None:
    in_section = section is None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("["):
            in_section = section is None or s == f"[{section}]"
            continue
        if in_section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return i
    return None


def _parse_section(sec: configparser.SectionProxy, text: str, source: str,
                   defaults: dict | None = None) -> SimulationScenario:
    def fail(key: str, msg: str):
        line = _line_of(text, key, sec.name)
        where = f"{source}:{line}" if line else source
        raise ScenarioError(f"{where}: field '{key}': {msg}")

    unknown = set(sec.keys()) - _FIELDS
    if unknown:
        key = sorted(unknown)[0]
        fail(key, f"unknown field (allowed: {', '.join(sorted(_FIELDS))})")
    kw: dict = dict(defaults or {})

    def floats(key):
        try:
            return tuple(float(v) for v in sec[key].split(","))
        except ValueError:
            fail(key, f"expected comma-separated numbers, got {sec[key]!r}")

    for key in ("n", "mu", "sd"):
        if key not in sec:
            fail(key, "required field missing")
    n = floats("n")
    if any(v != int(v) for v in n):
        fail("n", "group sizes must be integers")
    kw["n"] = tuple(int(v) for v in n)
    kw["mu"] = floats("mu")
    kw["sd"] = floats("sd")
    for key, conv in (("alpha", float), ("nsim", int), ("seed", int), ("lepage_nresample", int)):
        if key in sec:
            try:
                kw[key] = conv(sec[key])
            except ValueError:
                fail(key, f"cannot parse {sec[key]!r}")
    if "tests" in sec:
        kw["tests"] = tuple(t.strip() for t in sec["tests"].split(",") if t.strip())
    if "published" in sec:
        vals = floats("published")
        if len(vals) != len(TESTS):
            fail("published", f"expected {len(TESTS)} values")
        kw["published"] = dict(zip(TESTS, vals))
    kw["name"] = sec.get("name", sec.name)
    try:
        return SimulationScenario(**kw)
    except ScenarioError as exc:
        raise ScenarioError(f"{source} [{sec.name}]: {exc}") from None


def _read(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(str(exc)) from None
    return cp


def load_scenario(path: str | Path) -> SimulationScenario:
    """Read a single-scenario file (section ``[scenario]`` or the only section)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    cp = _read(text, str(path))
    secs = cp.sections()
    if "scenario" in secs:
        name = "scenario"
    elif len(secs) == 1:
        name = secs[0]
    else:
        raise ScenarioError(f"{path}: expected a [scenario] section")
    sc = _parse_section(cp[name], text, str(path))
    if sc.name == "scenario":
        sc = replace(sc, name=path.stem)
    return sc


def table1_rows() -> dict[str, SimulationScenario]:
    text = resources.files("lsdunnett.data").joinpath("table1.ini").read_text(encoding="utf-8")
    cp = _read(text, "table1.ini")
    return {name: _parse_section(cp[name], text, "table1.ini") for name in cp.sections()}


def table1_row(row: str, **overrides) -> SimulationScenario:
    rows = table1_rows()
    if row not in rows:
        raise ScenarioError(f"unknown row {row!r}; choose from {', '.join(rows)}")
    return replace(rows[row], **overrides)


def table1_suite(nsim: int = 5000, seed: int = 1, rows: Iterable[str] | None = None,
                 tests: Sequence[str] | None = None, n_jobs: int | None = None) -> list[ScenarioResult]:
    """Run the encoded grid (all published rows unless ``rows`` is given)."""
    grid = table1_rows()
    names = list(rows) if rows is not None else [r for r, sc in grid.items() if sc.published]
    out = []
    for name in names:
        kw = {"nsim": nsim, "seed": seed}
        if tests is not None:
            kw["tests"] = tuple(tests)
        sc = table1_row(name, **kw)
        log.info("running %s (nsim=%d)", name, nsim)
        out.append(run_scenario(sc, n_jobs))
    return out
