import json
import math
import pathlib

import numpy as np
import pytest

from tsne_dynamics.datagen import gmm_preset
from tsne_dynamics.diagnostics import DiagnosticReport
from tsne_dynamics.engine import EmbeddingState, Stage, init_random
from tsne_dynamics.output import (
    PALETTE,
    read_embedding_csv,
    read_trajectory_jsonl,
    render_panels,
    render_series_svg,
    render_svg,
    write_embedding_csv,
    write_report,
    write_trajectory_jsonl,
)

GOLDEN = pathlib.Path(__file__).parent / "golden"


def test_svg_two_points():
    text = render_svg(np.array([[0.0, 0.0], [1.0, 1.0]]), [0, 1])
    assert text.count("<circle") == 2
    assert text.startswith('<?xml version="1.0"')


def test_svg_without_labels_uses_one_colour():
    Y = np.random.default_rng(0).standard_normal((20, 2))
    text = render_svg(Y, [])
    fills = {part.split('"')[0] for part in text.split('fill="')[2:]}
    assert fills == {PALETTE[0]}


def test_svg_points_inside_canvas():
    Y = np.random.default_rng(1).standard_normal((30, 2)) * 1e6
    text = render_svg(Y, np.arange(30) % 4, size=200)
    for part in text.split("<circle")[1:]:
        cx = float(part.split('cx="')[1].split('"')[0])
        cy = float(part.split('cy="')[1].split('"')[0])
        assert 0 <= cx <= 200 and 0 <= cy <= 200


def test_svg_degenerate_map():
    text = render_svg(np.zeros((3, 2)), [0, 1, 2], title="a < b")
    assert text.count("<circle") == 3 and "a &lt; b" in text
    with pytest.raises(ValueError):
        render_svg(np.zeros((3, 2)), [0, 1])


def test_svg_golden(tmp_path):
    d = gmm_preset(n=60, p=10, seed=3)
    path = tmp_path / "out.svg"
    render_svg(init_random(60, 1.0, 3), d.labels, path)
    assert path.read_bytes() == (GOLDEN / "gmm_init.svg").read_bytes()


def test_panels_and_series(tmp_path):
    Y = np.random.default_rng(2).standard_normal((5, 2))
    text = render_panels([Y, 2 * Y], [0, 0, 1, 1, 1], tmp_path / "p.svg", ["a", "b"])
    assert text.count("<circle") == 10 and text.count("<g ") == 2
    text = render_series_svg([[0, 1, 2], [2, np.inf, 0]], tmp_path / "s.svg", labels=["x", "y"])
    assert text.count("<polyline") == 2


def test_embedding_csv_round_trip(tmp_path):
    Y = np.random.default_rng(3).standard_normal((7, 2)) * 1e-7
    lab = np.array([0, 1, 2, 0, 1, 2, 0])
    write_embedding_csv(tmp_path / "e.csv", EmbeddingState(Y), lab)
    back, blab = read_embedding_csv(tmp_path / "e.csv")
    assert back.tobytes() == Y.tobytes()
    np.testing.assert_array_equal(blab, lab)
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "x,y,label"


def test_trajectory_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    snaps = [EmbeddingState(rng.standard_normal((4, 2)), Stage.EARLY_EXAGGERATION, 0),
             EmbeddingState(rng.standard_normal((4, 2)), Stage.EMBEDDING, 9)]
    write_trajectory_jsonl(tmp_path / "t.jsonl", snaps)
    lines = (tmp_path / "t.jsonl").read_text().splitlines()
    assert len(lines) == 2 and json.loads(lines[1])["stage"] == "embedding"
    back = read_trajectory_jsonl(tmp_path / "t.jsonl")
    for a, b in zip(snaps, back):
        assert a.k == b.k and a.stage == b.stage
        assert a.coords.tobytes() == b.coords.tobytes()


def test_write_report(tmp_path):
    write_report(tmp_path / "r.json", DiagnosticReport(scalars={"x": math.inf}))
    assert json.loads((tmp_path / "r.json").read_text())["x"] == "inf"
    write_report(tmp_path / "d.json", {"b": 1, "a": 2})
    assert (tmp_path / "d.json").read_text().index('"a"') < (tmp_path / "d.json").read_text().index('"b"')
