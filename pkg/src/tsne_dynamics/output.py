"""Run artifacts: final-embedding CSV, trajectory JSONL, report JSON, SVG scatter.

Floats are written with 17 significant digits so every file parses back to
the exact doubles that produced it.
"""

import csv
import json

import numpy as np

from .engine import EmbeddingState, Stage

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
SVG_SIZE = 480
SVG_MARGIN = 0.05
POINT_RADIUS = 2.5


def fmt(x):
    return "%.17g" % x


def write_embedding_csv(path, state, labels=None):
    Y = np.asarray(getattr(state, "coords", state))
    lab = np.zeros(Y.shape[0], dtype=np.int64) if labels is None else np.asarray(labels)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["x", "y", "label"])
        for (x, y), l in zip(Y, lab):
            w.writerow([fmt(x), fmt(y), int(l)])


def read_embedding_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != ["x", "y", "label"]:
        raise ValueError(f"{path}: expected an x,y,label header")
    body = rows[1:]
    Y = np.array([[float(r[0]), float(r[1])] for r in body]).reshape(-1, 2)
    return Y, np.array([int(r[2]) for r in body], dtype=np.int64)


def snapshot_line(state):
    coords = ",".join("[%s,%s]" % (fmt(x), fmt(y)) for x, y in state.coords)
    return '{"k":%d,"stage":"%s","coords":[%s]}' % (state.k, state.stage.value, coords)


def write_trajectory_jsonl(path, snapshots):
    with open(path, "w") as f:
        for s in snapshots:
            f.write(snapshot_line(s))
            f.write("\n")


def read_trajectory_jsonl(path):
    out = []
    with open(path) as f:
        for line in f:
            if line.strip():
                rec = json.loads(line)
                coords = np.array(rec["coords"], dtype=np.float64).reshape(-1, 2)
                out.append(EmbeddingState(coords, Stage(rec["stage"]), int(rec["k"])))
    return out


def write_report(path, report):
    text = report.to_json() if hasattr(report, "to_json") else json.dumps(report, indent=2, sort_keys=True)
    with open(path, "w") as f:
        f.write(text)
        f.write("\n")


def render_svg(state, labels, path=None, size=SVG_SIZE, title=None):
    """Scatter plot as an SVG 1.1 document; returned as text and written if ``path``.

    One circle per point, coloured by label from a fixed 10-colour palette;
    empty or missing labels draw every point in the first colour.
    """
    Y = np.asarray(getattr(state, "coords", state), dtype=np.float64)
    n = Y.shape[0]
    if labels is None or len(labels) == 0:
        lab = np.zeros(n, dtype=np.int64)
    else:
        lab = np.asarray(labels, dtype=np.int64)
        if lab.size != n:
            raise ValueError("one label per point required")
    if n:
        lo, hi = Y.min(axis=0), Y.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = hi - lo
    span = np.where(span > 0, span, 1.0)
    lo = lo - SVG_MARGIN * span
    span = span * (1 + 2 * SVG_MARGIN)
    px = (Y[:, 0] - lo[0]) / span[0] * size
    py = size - (Y[:, 1] - lo[1]) / span[1] * size

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        'width="%d" height="%d" viewBox="0 0 %d %d">' % (size, size, size, size),
        '<rect x="0" y="0" width="%d" height="%d" fill="white"/>' % (size, size),
    ]
    if title:
        safe = title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        parts.append('<title>%s</title>' % safe)
    for x, y, l in zip(px, py, lab):
        parts.append('<circle cx="%.3f" cy="%.3f" r="%g" fill="%s"/>'
                     % (x, y, POINT_RADIUS, PALETTE[int(l) % len(PALETTE)]))
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text


def render_panels(states, labels, path, captions=None, size=SVG_SIZE):
    """Several scatter plots side by side in one SVG."""
    panels = []
    for i, s in enumerate(states):
        body = render_svg(s, labels, size=size).splitlines()[3:-1]
        cap = captions[i] if captions else ""
        panels.append('<g transform="translate(%d,0)">' % (i * size))
        panels.append('<rect x="0" y="0" width="%d" height="%d" fill="white" stroke="#cccccc"/>'
                      % (size, size))
        panels.extend(body)
        if cap:
            panels.append('<text x="8" y="18" font-family="sans-serif" font-size="14">%s</text>' % cap)
        panels.append("</g>")
    w = size * len(states)
    text = "\n".join([
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        'width="%d" height="%d" viewBox="0 0 %d %d">' % (w, size, w, size),
        *panels,
        "</svg>",
    ]) + "\n"
    with open(path, "w") as f:
        f.write(text)
    return text


def render_series_svg(series, path, width=640, height=360, labels=None):
    """Line plot of one or more y-series against their index (log-free, autoscaled)."""
    series = [np.asarray(s, dtype=np.float64) for s in series]
    finite = np.concatenate([s[np.isfinite(s)] for s in series]) if series else np.zeros(1)
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if hi <= lo:
        hi = lo + 1.0
    pad = SVG_MARGIN * (hi - lo)
    lo, hi = lo - pad, hi + pad
    kmax = max((s.size - 1 for s in series), default=1) or 1
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        'width="%d" height="%d" viewBox="0 0 %d %d">' % (width, height, width, height),
        '<rect x="0" y="0" width="%d" height="%d" fill="white"/>' % (width, height),
    ]
    for i, s in enumerate(series):
        pts = " ".join(
            "%.3f,%.3f" % (k / kmax * width, height - (v - lo) / (hi - lo) * height)
            for k, v in enumerate(s) if np.isfinite(v)
        )
        parts.append('<polyline fill="none" stroke="%s" stroke-width="1.5" points="%s"/>'
                     % (PALETTE[i % len(PALETTE)], pts))
        if labels:
            parts.append('<text x="8" y="%d" font-family="sans-serif" font-size="12" fill="%s">%s</text>'
                         % (16 + 14 * i, PALETTE[i % len(PALETTE)], labels[i]))
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    with open(path, "w") as f:
        f.write(text)
    return text
