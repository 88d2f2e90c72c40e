import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from tsne_dynamics import cli
from tsne_dynamics.datagen import gmm_preset, write_csv, write_idx
from tsne_dynamics.engine import init_random
from tsne_dynamics.output import read_embedding_csv, read_trajectory_jsonl

SMALL = ["--preset", "gmm", "--n", "80", "--p", "10", "--perplexity", "10"]
ARTIFACTS = ("embedding_final.csv", "trajectory.jsonl", "report.json", "final.svg")


def run_cli(*args):
    return cli.main([str(a) for a in args])


def test_run_writes_artifacts(tmp_path):
    assert run_cli("run", *SMALL, "--k1", "20", "--out", tmp_path) == 0
    for name in ARTIFACTS:
        assert (tmp_path / name).stat().st_size > 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["metadata"]["params"]["K0"] == math.floor(math.log(80) ** 2)
    assert rep["metadata"]["params"]["K1"] == 20
    assert rep["metadata"]["generator"]
    Y, lab = read_embedding_csv(tmp_path / "embedding_final.csv")
    assert Y.shape == (80, 2) and lab.max() < 6


def test_run_without_iterations_returns_init(tmp_path):
    assert run_cli("run", *SMALL, "--k0", "0", "--k1", "0", "--seed", "4", "--out", tmp_path) == 0
    Y, _ = read_embedding_csv(tmp_path / "embedding_final.csv")
    want = init_random(80, math.log(80) ** -2, 4).coords
    assert Y.tobytes() == want.tobytes()
    snaps = read_trajectory_jsonl(tmp_path / "trajectory.jsonl")
    assert [s.k for s in snaps] == [0]


def test_run_is_byte_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert run_cli("run", *SMALL, "--k1", "30", "--seed", "2", "--out", tmp_path / sub) == 0
    for name in ARTIFACTS:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_spheres_and_spectral(tmp_path):
    code = run_cli("run", "--preset", "spheres", "--n", "60", "--p", "5", "--perplexity", "10",
                   "--init", "spectral", "--k1", "5", "--out", tmp_path)
    assert code == 0


def test_run_csv_source(tmp_path):
    d = gmm_preset(n=40, p=5, seed=1)
    write_csv(tmp_path / "d.csv", d)
    code = run_cli("run", "--csv", tmp_path / "d.csv", "--csv-labels", "--perplexity", "8",
                   "--k1", "5", "--out", tmp_path / "o")
    assert code == 0
    _, lab = read_embedding_csv(tmp_path / "o" / "embedding_final.csv")
    assert lab.size == 40


def test_run_idx_source(tmp_path):
    rng = np.random.default_rng(0)
    write_idx(tmp_path / "x.idx", rng.integers(0, 256, (40, 3, 3), dtype=np.uint8))
    write_idx(tmp_path / "y.idx", (np.arange(40) % 4 * 2).astype(np.uint8))
    code = run_cli("run", "--idx", tmp_path / "x.idx", "--idx-labels", tmp_path / "y.idx",
                   "--digits", "2,4", "--per-digit", "8", "--perplexity", "5",
                   "--k1", "3", "--out", tmp_path / "o")
    assert code == 0
    _, lab = read_embedding_csv(tmp_path / "o" / "embedding_final.csv")
    assert lab.tolist() == [0] * 8 + [1] * 8


@pytest.mark.parametrize("args,code", [
    (["run", "--preset", "gmm", "--csv", "x.csv"], 1),
    (["run", *SMALL, "--theory-delta", "1.5"], 1),
    (["run", *SMALL, "--alpha", "0.5"], 1),
    (["run", *SMALL, "--perplexity", "500"], 1),
    (["run", "--bogus"], 1),
    (["early-stop", "--schedule-only"], 1),
    (["run", "--csv", "/nonexistent/data.csv"], 2),
    (["run", *SMALL, "--alpha", "1e6", "--h", "1e12"], 3),
])
def test_exit_codes(tmp_path, args, code):
    assert run_cli(*args, "--out", tmp_path / "o") == code


def test_bad_idx_is_io_error(tmp_path):
    (tmp_path / "bad.idx").write_bytes(b"\x00\x00\x08\x02" + bytes(12))
    assert run_cli("run", "--idx", tmp_path / "bad.idx", "--out", tmp_path / "o") == 2


def test_compare_zero_step(tmp_path):
    assert run_cli("compare", *SMALL, "--h", "0", "--out", tmp_path) == 0
    res = json.loads((tmp_path / "compare.json").read_text())
    assert all(v == 0 for v in res["runs"][0]["deviation"])
    assert (tmp_path / "compare.svg").exists()


def test_compare_no_exaggeration(tmp_path):
    assert run_cli("compare", *SMALL, "--k0", "0", "--out", tmp_path) == 0
    res = json.loads((tmp_path / "compare.json").read_text())
    assert res["runs"][0]["deviation"] == [0.0]


def test_compare_sweep_reports_monotonicity(tmp_path):
    assert run_cli("compare", "--preset", "gmm", "--p", "10", "--perplexity", "10",
                   "--sweep", "40,60", "--out", tmp_path) == 0
    res = json.loads((tmp_path / "compare.json").read_text())
    assert [r["n"] for r in res["runs"]] == [40, 60]
    assert isinstance(res["non_increasing"], bool)


def test_early_stop_schedule_only(tmp_path):
    assert run_cli("early-stop", "--n", "1600", "--schedule-only", "--out", tmp_path) == 0
    assert json.loads((tmp_path / "early_stop.json").read_text())["K0"] == [54, 137, 253]


def test_early_stop_shares_init(tmp_path):
    assert run_cli("early-stop", *SMALL, "--k1", "5", "--out", tmp_path) == 0
    res = json.loads((tmp_path / "early_stop.json").read_text())
    assert [r["K0"] for r in res["runs"]] == list(res["K0"])
    assert len({r["initial_checksum"] for r in res["runs"]}) == 1
    for name in ("early_stop_ee.svg", "early_stop_final.svg"):
        assert (tmp_path / name).read_text().count("<g ") == 3


def _subprocess(env_backend, out):
    env = dict(os.environ, TSNE_DYNAMICS_BACKEND=env_backend)
    return subprocess.run(
        [sys.executable, "-m", "tsne_dynamics", "run", *SMALL, "--k0", "5", "--k1", "5",
         "--out", str(out)],
        env=env, capture_output=True, text=True,
    )


def test_backends_agree_end_to_end(tmp_path):
    a = _subprocess("numba", tmp_path / "numba")
    b = _subprocess("numpy", tmp_path / "numpy")
    assert a.returncode == 0 and b.returncode == 0, a.stderr + b.stderr
    ra = json.loads((tmp_path / "numba" / "report.json").read_text())
    rb = json.loads((tmp_path / "numpy" / "report.json").read_text())
    assert rb["metadata"]["backend"] == "numpy"
    Ya, _ = read_embedding_csv(tmp_path / "numba" / "embedding_final.csv")
    Yb, _ = read_embedding_csv(tmp_path / "numpy" / "embedding_final.csv")
    np.testing.assert_allclose(Ya, Yb, rtol=1e-9, atol=1e-12)


def test_bad_backend_value_fails_import(tmp_path):
    res = _subprocess("cuda", tmp_path / "x")
    assert res.returncode != 0 and "TSNE_DYNAMICS_BACKEND" in res.stderr


def test_cluster_count_and_relative_perplexity(tmp_path):
    args = ["run", "--preset", "gmm", "--clusters", "3", "--p", "20", "--n", "90",
            "--perplexity-per-cluster", "0.5", "--k1", "5", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert sorted(set(read_embedding_csv(tmp_path / "embedding_final.csv")[1])) == [0, 1, 2]
    assert rep["metadata"]["config"]["perplexity_per_cluster"] == 0.5
    cfg = cli.config_from_args(cli.build_parser().parse_args(args))
    assert cli.perplexity_for(cfg, cli.load_data(cfg)) == pytest.approx(15.0)


def test_relative_perplexity_out_of_range(tmp_path):
    args = ["run", "--preset", "gmm", "--clusters", "3", "--n", "30",
            "--perplexity-per-cluster", "5", "--out", str(tmp_path)]
    assert cli.main(args) == cli.EXIT_CONFIG
