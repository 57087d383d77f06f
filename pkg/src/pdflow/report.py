"""Deterministic CSV and SVG output for run reports and eta sweeps."""
import csv
import io
import math
import os

FLOAT_FMT = "%.12e"

REPORT_COLUMNS = (
    "scenario",
    "p", "q", "r", "s", "sigma",
    "C1", "C2",
    "K_d", "K_f", "K_n", "K_t", "delta",
    "eta_star", "L_min", "G1", "G2", "G3", "R", "satisfied", "direct_ok", "flag",
    "eta_used", "h_eta_Lr", "h_eta_grad_p", "h_eta_D_p", "k_D_p", "k_Lr", "h_Lq", "div_defect",
    "solve_status", "iterations", "final_residual", "Du_norm_p", "Du_norm_sigma",
    "apriori_status", "apriori_margin", "weak_residual", "divergence_residual", "boundary_mismatch",
    "errors",
)


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) or hasattr(v, "dtype"):
        return FLOAT_FMT % float(v)
    return str(v)


def report_row(r):
    row = dict.fromkeys(REPORT_COLUMNS)
    row["scenario"] = r.scenario
    if r.exponents is not None:
        ex = r.exponents
        row.update(p=ex.p, q=ex.q, r=ex.r, s=ex.s, sigma=ex.sigma)
    if r.model is not None:
        row.update(C1=float(r.model.C1), C2=float(r.model.C2))
    if r.norms is not None:
        n = r.norms
        row.update(K_d=n.K_d, K_f=n.K_f, K_n=n.K_n, K_t=n.K_t, delta=n.delta)
    if r.smallness is not None:
        sm = r.smallness
        row.update(
            eta_star=sm.eta_star, L_min=sm.L_min, G1=float(sm.G1), G2=float(sm.G2), G3=float(sm.G3),
            R=float(sm.R), satisfied=sm.satisfied, direct_ok=sm.direct_ok, flag=sm.flag,
        )
    if r.extension is not None:
        row["eta_used"] = r.eta_used
        for k in ("h_eta_Lr", "h_eta_grad_p", "h_eta_D_p", "k_D_p", "k_Lr", "h_Lq", "div_defect"):
            row[k] = r.extension.get(k)
    if r.solve is not None:
        s = r.solve
        row.update(
            solve_status=s["status"], iterations=int(s["iterations"]), final_residual=s["final_residual"],
            Du_norm_p=s["Du_norm_p"], Du_norm_sigma=s["Du_norm_sigma"],
        )
    if r.verification is not None:
        v = r.verification
        row.update(
            apriori_status=v["apriori_status"], apriori_margin=v["apriori_margin"],
            weak_residual=v["weak_residual"], divergence_residual=v["divergence_residual"],
            boundary_mismatch=v["boundary_mismatch"],
        )
    if r.errors:
        row["errors"] = "; ".join(f"{k}: {v}" for k, v in sorted(r.errors.items()))
    return row


def csv_text(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def sweep_columns(rows):
    cols = list(rows[0].keys()) if rows else ["eta", "L", "G1", "G2", "G3", "R"]
    return cols


def _write(path, text):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def emit_report(r, fmt="csv", out_dir=".", stem=None):
    """Write a run report (``csv``) or an eta sweep (``csv`` or ``svg-plot``).

    ``r`` is a :class:`~pdflow.scenarios.RunReport` or a list of sweep rows.
    Returns the list of written paths.
    """
    if isinstance(r, list):
        stem = stem or "sweep"
        if fmt == "csv":
            return [_write(os.path.join(out_dir, f"{stem}.csv"), csv_text(r, sweep_columns(r)))]
        if fmt == "svg-plot":
            return [_write(os.path.join(out_dir, f"{stem}.svg"), sweep_svg(r))]
        raise ValueError(f"unknown format {fmt!r}")
    if fmt != "csv":
        raise ValueError("run reports are written as csv")
    stem = stem or r.scenario
    return [_write(os.path.join(out_dir, f"{stem}.csv"), csv_text([report_row(r)], REPORT_COLUMNS))]


COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def sweep_svg(rows, width=640, height=420, x_key="eta"):
    """Log-log plot of every positive column against ``eta``, one polyline each."""
    keys = [k for k in sweep_columns(rows) if k != x_key]
    series = []
    for k in keys:
        pts = [(row[x_key], row[k]) for row in rows if row.get(k) is not None and row[k] > 0]
        if len(pts) >= 2:
            series.append((k, pts))
    xs = [math.log10(x) for _, pts in series for x, _ in pts] or [0.0, 1.0]
    ys = [math.log10(y) for _, pts in series for _, y in pts] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ml, mr, mt, mb = 60, 120, 20, 40

    def px(x):
        return ml + (math.log10(x) - x0) / (x1 - x0) * (width - ml - mr)

    def py(y):
        return height - mb - (math.log10(y) - y0) / (y1 - y0) * (height - mt - mb)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{ml}" y="{mt}" width="{width - ml - mr}" height="{height - mt - mb}" '
        'fill="none" stroke="black"/>',
        f'<text x="{(width - mr + ml) / 2:.1f}" y="{height - 8}" text-anchor="middle" '
        f'font-size="12">log10 {x_key} [{x0:.3g}, {x1:.3g}]</text>',
        f'<text x="12" y="{(height - mb + mt) / 2:.1f}" font-size="12" '
        f'transform="rotate(-90 12 {(height - mb + mt) / 2:.1f})" text-anchor="middle">'
        f"log10 value [{y0:.3g}, {y1:.3g}]</text>",
    ]
    for i, (k, pts) in enumerate(series):
        c = COLORS[i % len(COLORS)]
        coords = " ".join(f"{px(x):.3f},{py(y):.3f}" for x, y in pts)
        out.append(f'<polyline class="series" data-name="{k}" fill="none" stroke="{c}" points="{coords}"/>')
        out.append(
            f'<text x="{width - mr + 8}" y="{mt + 16 * (i + 1)}" font-size="12" fill="{c}">{k}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
