"""Figure data (CSV) and minimal SVG charts for a finished run."""

from __future__ import annotations

import csv
from html import escape
from pathlib import Path

import numpy as np

_W, _H, _PAD = 640, 320, 40


def _bar_svg(title: str, labels: list[str], values: list[float]) -> str:
    top = max(values) if values and max(values) > 0 else 1.0
    n = max(len(values), 1)
    bw = (_W - 2 * _PAD) / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
    ]
    for k, (lab, v) in enumerate(zip(labels, values)):
        h = (_H - 2 * _PAD - 10) * v / top
        x = _PAD + k * bw
        parts.append(f'<rect x="{x + 1:.1f}" y="{_H - _PAD - h:.1f}" width="{max(bw - 2, 1):.1f}" '
                     f'height="{h:.1f}" fill="steelblue"/>')
        parts.append(f'<text x="{x + bw / 2:.1f}" y="{_H - _PAD + 14}" text-anchor="middle" '
                     f'font-size="9">{escape(lab)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _line_svg(title: str, series: dict[str, list[tuple[int, int]]], n_x: int, y_max: int) -> str:
    colours = {"train": "blue", "test": "red", "predicted": "green"}
    sx = (_W - 2 * _PAD) / max(n_x - 1, 1)
    sy = (_H - 2 * _PAD) / max(y_max, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for name, pts in series.items():
        colour = colours.get(name, "black")
        for x, y in pts:
            cx, cy = _PAD + x * sx, _PAD + (y - 1) * sy
            if name == "predicted":
                parts.append(f'<text x="{cx:.1f}" y="{cy + 4:.1f}" text-anchor="middle" font-size="10" '
                             f'fill="{colour}">x</text>')
            else:
                parts.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="3" fill="none" stroke="{colour}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def timeline_rows(report, company: str | None = None) -> list[list]:
    """Rows of (company_id, period, method, fold, split, true_index, predicted_index).

    Training rows carry an empty prediction; in k-fold mode every observation
    appears once per method as a test row of the fold that held it out.
    """
    d = report.dataset
    rows = []
    methods = report.methods()
    for fold in report.folds:
        pos = {int(i): k for k, i in enumerate(fold.test_index)}
        for method in methods:
            pred = report.predictions[(method, fold.fold)]
            if report.config.split_mode != "kfold":
                for i in fold.train_index:
                    rows.append((int(i), method, fold.fold, "train", ""))
                for i in fold.validation_index:
                    rows.append((int(i), method, fold.fold, "validation", ""))
            for i, k in pos.items():
                rows.append((i, method, fold.fold, "test", int(pred[k])))
    out = []
    for i, method, f, split, p in sorted(rows, key=lambda r: (d.company_ids[r[0]], d.periods[r[0]], r[1], r[2])):
        if company is not None and d.company_ids[i] != company:
            continue
        out.append([d.company_ids[i], str(d.periods[i]), method, f, split, int(d.y[i]), p])
    return out


def emit_figures(report, out_dir: str | Path, svg: bool = True, companies=None) -> list[Path]:
    """Rating histogram, per-company timelines and notch histograms.

    CSVs are always written; SVG charts only when ``svg`` is true.
    """
    out = Path(out_dir) / "figures"
    out.mkdir(parents=True, exist_ok=True)
    d = report.dataset
    written: list[Path] = []

    counts = np.bincount(d.y, minlength=d.scale.size + 1)[1:]
    present = [k for k in range(d.scale.size) if counts[k] > 0]
    sector = d.sector or "data"
    path = out / f"rating_distribution_{sector}.csv"
    _write_csv(path, ["rating", "index", "count"], [[d.scale.labels[k], k + 1, int(counts[k])] for k in present])
    written.append(path)
    if svg:
        p = out / f"rating_distribution_{sector}.svg"
        p.write_text(_bar_svg(f"Ratings ({sector})", [d.scale.labels[k] for k in present],
                              [float(counts[k]) for k in present]), encoding="utf-8")
        written.append(p)

    rows = timeline_rows(report)
    path = out / "timeline.csv"
    _write_csv(path, ["company_id", "period", "method", "fold", "split", "true_index", "predicted_index"], rows)
    written.append(path)

    if svg:
        wanted = companies or report.config.timeline_companies or sorted(set(d.company_ids))[:1]
        all_periods = sorted(set(d.periods))
        xpos = {str(p): k for k, p in enumerate(all_periods)}
        for company in wanted:
            for method in report.methods():
                series: dict[str, list[tuple[int, int]]] = {"train": [], "test": [], "predicted": []}
                for cid, per, m, _, split, truth, pred in rows:
                    if cid != company or m != method:
                        continue
                    series["test" if split == "test" else "train"].append((xpos[per], truth))
                    if pred != "":
                        series["predicted"].append((xpos[per], pred))
                if not any(series.values()):
                    continue
                p = out / f"timeline_{company}_{method}.svg"
                p.write_text(_line_svg(f"{company} / {method}", series, len(all_periods), d.scale.size),
                             encoding="utf-8")
                written.append(p)

    for method in report.methods():
        hist: dict[int, int] = {}
        for r in report.results:
            if r.method == method:
                for k, v in r.distribution.counts.items():
                    hist[k] = hist.get(k, 0) + v
        n = sum(hist.values())
        keys = sorted(hist)
        path = out / f"notch_hist_{method}.csv"
        _write_csv(path, ["notch", "count", "F"], [[k, hist[k], repr(hist[k] / n)] for k in keys])
        written.append(path)
        if svg:
            p = out / f"notch_hist_{method}.svg"
            p.write_text(_bar_svg(f"Notch distance ({method})", [str(k) for k in keys],
                                  [hist[k] / n for k in keys]), encoding="utf-8")
            written.append(p)
    return written
