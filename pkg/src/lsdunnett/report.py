"""Analysis reports and their text/CSV renderings."""

from __future__ import annotations

import csv
import io
import math
import platform
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy

from . import __version__, linmod
from .datamodel import Dataset
from .lepage import PermutationResult, lepage_dunnett
from .maxt import MaxTResult, dunnett_classical, dunnett_sandwich, dunnett_scale
from .mlt import mlt_dunnett
from .mmm import mmm_dunnett
from .mvdist import QmcConfig
from .sim import ALL_TESTS, ScenarioResult

PROCEDURES = ("location", "scale", "mmm", "mlt", "sandwich", "lepage", "levene")
COLUMN_TITLES = {
    "location": "Location",
    "scale": "Scale",
    "mmm": "LocationScale",
    "mlt": "MLT",
    "sandwich": "LocSandwich",
    "lepage": "Lepage",
}
P_FLOOR = 1e-4
CSV_FIELDS = ("procedure", "comparison", "estimate", "std_error", "statistic", "adj_p",
              "sci_lower", "sci_upper")


class UnknownProcedure(ValueError):
    pass


def format_p(p: float) -> str:
    """Four decimals, never below the display floor ``0.0001``."""
    if math.isnan(p):
        return "NA"
    return f"{max(p, P_FLOOR):.4f}"


@dataclass(frozen=True)
class ProcedureRow:
    comparison: str
    estimate: float
    std_error: float
    statistic: float
    adj_p: float
    sci_lower: float
    sci_upper: float


@dataclass(frozen=True)
class AnalysisReport:
    dataset: str
    procedures: tuple[str, ...]
    tables: dict[str, tuple[ProcedureRow, ...]]
    levene_p: float | None = None
    levene_f: float | None = None
    seed: int = 0
    qmc: QmcConfig | None = None
    alpha: float = 0.05
    metadata: dict[str, str] = field(default_factory=dict)

    def adj_p(self, procedure: str) -> dict[str, float]:
        return {r.comparison: r.adj_p for r in self.tables[procedure]}


def _rows_from_maxt(res: MaxTResult, prefix: str | None) -> tuple[ProcedureRow, ...]:
    out = []
    for i, lab in enumerate(res.labels):
        name = lab if prefix is None else f"{prefix}: {lab}"
        out.append(ProcedureRow(name, float(res.estimates[i]), float(res.std_errors[i]),
                                float(res.statistics[i]), float(res.adj_p[i]),
                                float(res.sci_lower[i]), float(res.sci_upper[i])))
    return tuple(out)


def _rows_from_perm(res: PermutationResult) -> tuple[ProcedureRow, ...]:
    nan = math.nan
    return tuple(ProcedureRow(lab, nan, nan, float(res.statistics[i]), float(res.adj_p[i]), nan, nan)
                 for i, lab in enumerate(res.labels))


def parse_procedures(text: str | Sequence[str]) -> tuple[str, ...]:
    items = text.split(",") if isinstance(text, str) else list(text)
    procs = []
    for p in (s.strip().lower() for s in items):
        if not p:
            continue
        if p not in PROCEDURES:
            raise UnknownProcedure(f"unknown procedure {p!r}; choose from {', '.join(PROCEDURES)}")
        if p not in procs:
            procs.append(p)
    if not procs:
        raise UnknownProcedure("no procedures requested")
    return tuple(procs)


def run_analysis(ds: Dataset, procedures: Sequence[str], alpha: float = 0.05, seed: int = 0,
                 scale_df: str = "asymptotic", nresample: int = 10000,
                 qmc: QmcConfig | None = None) -> AnalysisReport:
    """Run each requested procedure once on ``ds``.

    ``seed`` drives both the QMC shifts and the permutation resampling.
    """
    procs = parse_procedures(procedures)
    qmc = qmc or QmcConfig(seed=seed)
    tables: dict[str, tuple[ProcedureRow, ...]] = {}
    lev_p = lev_f = None
    for p in procs:
        if p == "location":
            tables[p] = _rows_from_maxt(dunnett_classical(ds, alpha, qmc), "location")
        elif p == "scale":
            tables[p] = _rows_from_maxt(dunnett_scale(ds, alpha, qmc, df=scale_df), "scale")
        elif p == "mmm":
            tables[p] = _rows_from_maxt(mmm_dunnett(ds, alpha, qmc), None)
        elif p == "mlt":
            tables[p] = _rows_from_maxt(mlt_dunnett(ds, alpha=alpha, cfg=qmc), "location")
        elif p == "sandwich":
            tables[p] = _rows_from_maxt(dunnett_sandwich(ds, alpha, qmc), "location")
        elif p == "lepage":
            tables[p] = _rows_from_perm(lepage_dunnett(ds, nresample, seed, alpha))
        elif p == "levene":
            lev_f, lev_p = linmod.levene_global_stat(ds)
    meta = {
        "lsdunnett": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "qmc": f"n_points={qmc.n_points} n_shifts={qmc.n_shifts} seed={qmc.seed}",
        "scale_df": scale_df,
        "nresample": str(nresample),
    }
    return AnalysisReport(ds.name, procs, tables, lev_p, lev_f, seed, qmc, alpha, meta)


def comparison_order(report: AnalysisReport, levels: Sequence[str]) -> list[str]:
    """Location rows then scale rows, treatments in level order."""
    ctrl = levels[0]
    rows = [f"{kind}: {lv} - {ctrl}" for kind in ("location", "scale") for lv in levels[1:]]
    present = {r.comparison for t in report.tables.values() for r in t}
    return [r for r in rows if r in present] + sorted(present - set(rows))


def render_text(report: AnalysisReport, levels: Sequence[str]) -> str:
    out = io.StringIO()
    out.write(f"Dataset: {report.dataset}   alpha = {report.alpha}   seed = {report.seed}\n")
    cols = [p for p in report.procedures if p in report.tables]
    if cols:
        order = comparison_order(report, levels)
        lookup = {p: report.adj_p(p) for p in cols}
        w = max(len("Comparison"), *(len(c) for c in order))
        widths = [max(len(COLUMN_TITLES[p]), 6) for p in cols]
        out.write("\nAdjusted p-values\n")
        head = f"{'No':>3}  {'Comparison':<{w}}" + "".join(f"  {COLUMN_TITLES[p]:>{cw}}"
                                                          for p, cw in zip(cols, widths))
        out.write(head + "\n" + "-" * len(head) + "\n")
        for i, comp in enumerate(order, 1):
            cells = [format_p(lookup[p][comp]) if comp in lookup[p] else "-" for p in cols]
            out.write(f"{i:>3}  {comp:<{w}}" + "".join(f"  {c:>{cw}}" for c, cw in zip(cells, widths))
                      + "\n")
        for p in cols:
            out.write(f"\n{COLUMN_TITLES[p]} ({p})\n")
            out.write(_detail(report.tables[p]))
    if report.levene_p is not None:
        out.write(f"\nGlobal Levene test (mean-centred): F = {report.levene_f:.4f},"
                  f" p = {report.levene_p:.4f}\n")
    out.write("\n" + "  ".join(f"{k}={v}" for k, v in report.metadata.items()) + "\n")
    return out.getvalue()


def _num(x: float, fmt: str = ".4f") -> str:
    return "-" if math.isnan(x) else format(x, fmt)


def _detail(rows: Sequence[ProcedureRow]) -> str:
    w = max(len(r.comparison) for r in rows)
    head = (f"  {'Comparison':<{w}}  {'Estimate':>9}  {'SE':>8}  {'Stat':>8}  {'adj. p':>7}"
            f"  {'SCI':>21}")
    lines = [head]
    for r in rows:
        sci = "-" if math.isnan(r.sci_lower) else f"[{r.sci_lower:.4f}, {r.sci_upper:.4f}]"
        lines.append(f"  {r.comparison:<{w}}  {_num(r.estimate):>9}  {_num(r.std_error):>8}"
                     f"  {_num(r.statistic, '.3f'):>8}  {format_p(r.adj_p):>7}  {sci:>21}")
    return "\n".join(lines) + "\n"


def render_csv(report: AnalysisReport) -> str:
    """Long-format CSV at full precision; global tests use procedure ``levene``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for p in report.procedures:
        for r in report.tables.get(p, ()):
            w.writerow([p, r.comparison, *(repr(float(v)) for v in
                                           (r.estimate, r.std_error, r.statistic, r.adj_p,
                                            r.sci_lower, r.sci_upper))])
    if report.levene_p is not None:
        nan = repr(math.nan)
        w.writerow(["levene", "global", nan, nan, repr(float(report.levene_f)),
                    repr(float(report.levene_p)), nan, nan])
    return buf.getvalue()


def parse_csv(text: str) -> dict[tuple[str, str], ProcedureRow]:
    """Inverse of :func:`render_csv`, keyed by (procedure, comparison)."""
    out = {}
    for row in csv.DictReader(io.StringIO(text)):
        vals = [float(row[k]) for k in CSV_FIELDS[2:]]
        out[(row["procedure"], row["comparison"])] = ProcedureRow(row["comparison"], *vals)
    return out


# ---------------------------------------------------------------- simulations

SIM_FIELDS = ("scenario", "test", "rate", "mc_se", "n_valid", "failures", "published")


def _sim_tests(results: Sequence[ScenarioResult]) -> list[str]:
    present = {t for r in results for t in r.rates}
    return [t for t in ALL_TESTS if t in present]


def render_sim_text(results: Sequence[ScenarioResult]) -> str:
    """Table-shaped rates; each row is followed by its mc_se and any published values."""
    tests = _sim_tests(results)
    w = max(len("Scenario"), *(len(r.scenario.name) for r in results)) + 9
    out = io.StringIO()
    out.write(f"{'Scenario':<{w}}" + "".join(f"{t:>7}" for t in tests) + "\n")
    for r in results:
        sc = r.scenario
        out.write(f"{sc.name:<{w}}" + "".join(
            f"{r.rates[t]:>7.3f}" if t in r.rates else f"{'-':>7}" for t in tests) + "\n")
        out.write(f"{'  mc_se':<{w}}" + "".join(
            f"{r.mc_se[t]:>7.3f}" if t in r.mc_se else f"{'-':>7}" for t in tests) + "\n")
        if sc.published:
            out.write(f"{'  published':<{w}}" + "".join(
                f"{sc.published[t]:>7.2f}" if t in sc.published and t in r.rates else f"{'-':>7}"
                for t in tests) + "\n")
        fails = {t: f for t, f in r.failures.items() if f}
        desc = (f"  n={','.join(map(str, sc.n))} mu={','.join(map(str, sc.mu))} "
                f"sd={','.join(map(str, sc.sd))} nsim={sc.nsim} seed={sc.seed}")
        if fails:
            desc += " failures: " + ", ".join(f"{t}={f}" for t, f in fails.items())
        out.write(desc + "\n")
    return out.getvalue()


def render_sim_csv(results: Sequence[ScenarioResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SIM_FIELDS)
    for r in results:
        for t in _sim_tests([r]):
            published = r.scenario.published.get(t, math.nan)
            w.writerow([r.scenario.name, t, repr(r.rates[t]), repr(r.mc_se[t]), r.n_valid[t],
                        r.failures[t], repr(float(published))])
    return buf.getvalue()
