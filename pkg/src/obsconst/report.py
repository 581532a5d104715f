"""Deterministic serialization of an :class:`ObservabilityReport`.

Three outputs: a long CSV (one row per ``(T, quantity)``), a wide plot-data
CSV and a text summary. Floats go through ``repr`` in the CSVs so reruns
produce identical bytes.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .analysis import ObservabilityReport

CSV_COLUMNS = ("T", "name", "value", "bound_side", "tolerance")
EXACT, UPPER, BRACKET = "exact", "upper", "bracket"


def _num(v) -> str:
    return repr(float(v))


def rows(rep: ObservabilityReport) -> list[tuple]:
    tol = rep.tolerances
    out = [("", "g1", rep.g1, UPPER, tol["mass_quadrature"])]
    for lev in rep.levels:
        out.append(("", f"g1[N={lev.n_modes}]", lev.g1, UPPER, tol["mass_quadrature"]))
    if rep.closed_form is not None:
        cf = rep.closed_form
        out += [
            ("", "g1_closed_form", cf.g1, EXACT, 0.0),
            ("", "limit_closed_form", cf.predicted_limit, EXACT, 0.0),
            ("", "g1_closed_form_as_printed", cf.as_printed, EXACT, 0.0),
        ]
    out.append(("", "gap_min", rep.gap.gamma_min, EXACT, 0.0))
    for i, T in enumerate(rep.times):
        for j, lev in enumerate(rep.levels):
            out.append((T, f"C_T/T[N={lev.n_modes}]", rep.constants[i, j], UPPER, tol["eigensolver"]))
        b = rep.brackets[i]
        out += [
            (T, "g2_interior", b.interior.value, UPPER, tol["g2_stall"]),
            (T, "g2_closure", b.closure.value, UPPER, tol["g2_stall"]),
            (T, "alpha_lo", b.lo, BRACKET, tol["g2_stall"]),
            (T, "alpha_hi", b.hi, BRACKET, tol["g2_stall"]),
        ]
    return out


def to_csv(rep: ObservabilityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for T, name, value, side, tol in rows(rep):
        w.writerow(("" if T == "" else _num(T), name, _num(value), side, _num(tol)))
    return buf.getvalue()


def to_plot_csv(rep: ObservabilityReport) -> str:
    """Wide table: one line per ``(T, N)`` with the comparison curves alongside."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("T", "N", "frequency", "C_T_over_T", "half_g1", "g2_interior", "g2_closure", "alpha_lo", "alpha_hi"))
    for i, T in enumerate(rep.times):
        b = rep.brackets[i]
        for j, lev in enumerate(rep.levels):
            w.writerow(
                (
                    _num(T),
                    lev.n_modes,
                    _num(lev.frequency),
                    _num(rep.constants[i, j]),
                    _num(0.5 * lev.g1),
                    _num(b.interior.value),
                    _num(b.closure.value),
                    _num(b.lo),
                    _num(b.hi),
                )
            )
    return buf.getvalue()


def _g(v) -> str:
    return f"{float(v):.10g}"


def to_text(rep: ObservabilityReport) -> str:
    m = rep.manifold
    lines = ["observability report", ""]
    lines.append(f"manifold      {m.kind}" + (f" periods {', '.join(_g(p) for p in m.periods)}" if m.kind == "torus" else ""))
    lines.append(f"region        {rep.region.topology}, {len(rep.region.primitives)} primitive(s)")
    n = rep.levels[-1].n_modes
    lines.append(f"cutoff        {_g(rep.cutoff)} ({n} modes, {len(rep.levels)} eigenspaces, mass {rep.provenance})")
    lines.append(f"times         {' '.join(_g(t) for t in rep.times)}")
    lines.append(f"seed          {rep.seed}")
    lines.append("")
    lines.append(f"g1 (truncated, upper bound)  {_g(rep.g1)}")
    if rep.closed_form is not None:
        cf = rep.closed_form
        lines.append(f"g1 closed form               {_g(cf.g1)} (limit of C_T/T {_g(cf.predicted_limit)})")
        lines.append(f"g1 closed form as printed    {_g(cf.as_printed)}")
    lines.append(f"minimal frequency gap        {_g(rep.gap.gamma_min)} {rep.gap.verdict}: {rep.gap.note}")
    lines.append("")
    lines.append("C_T^[1,N]/T (upper bounds on C_T/T)")
    head = "T".rjust(12) + "".join(f"N={lev.n_modes}".rjust(14) for lev in rep.levels)
    lines.append(head)
    lines.append("g1/2".rjust(12) + "".join(_g(0.5 * lev.g1).rjust(14) for lev in rep.levels))
    for i, T in enumerate(rep.times):
        lines.append(_g(T).rjust(12) + "".join(_g(v).rjust(14) for v in rep.constants[i]))
    lines.append("")
    lines.append("ray search (upper bounds) and high-frequency bracket")
    lines.append("".join(s.rjust(14) for s in ("T", "g2 interior", "g2 closure", "alpha lo", "alpha hi")))
    for T, b in zip(rep.times, rep.brackets):
        lines.append("".join(_g(v).rjust(14) for v in (T, b.interior.value, b.closure.value, b.lo, b.hi)))
    lo, hi, mono = rep.alpha_limit()
    lines.append(f"alpha at the largest T: [{_g(lo)}, {_g(hi)}], {mono}")
    plo, phi = rep.predicted_limit()
    lines.append(f"predicted limit of C_T/T: [{_g(plo)}, {_g(phi)}]")
    lines.append("")
    lines.append("verdicts")
    for v in rep.verdicts:
        lines.append(f"  {v.status:<5} {v.name}: {v.invariant}")
        lines.append(f"        slack {_g(v.slack)}, tolerance {_g(v.tolerance)}" + (f"; {v.note}" if v.note else ""))
    lines.append("")
    lines.append("tolerances")
    for k, v in rep.tolerances.items():
        lines.append(f"  {k:<18}{_g(v)}")
    return "\n".join(lines) + "\n"


WRITERS = {"csv": ("report.csv", to_csv), "text": ("summary.txt", to_text), "plot": ("plot.csv", to_plot_csv)}


def write(rep: ObservabilityReport, out_dir, formats=("csv", "text", "plot")) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for f in formats:
        name, fn = WRITERS[f]
        p = out / name
        p.write_text(fn(rep), encoding="utf-8")
        paths.append(p)
    return paths
