import csv
import io
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rocus import artifacts as art
from rocus import svg
from rocus.cli import main
from rocus.config import ConfigError, parse_config
from rocus.env2d import Task2D, rollout, sample_prior_task, straight_policy
from rocus.experiment import run_experiment

from conftest import far_task

NS = "{http://www.w3.org/2000/svg}"


def parse(text):
    root = ET.fromstring(text)
    assert root.tag == NS + "svg"
    assert "href" not in text
    return root


def test_trajectory_svg_structure(prior_tasks, params):
    trajs = [rollout(straight_policy(params), t, params) for t in prior_tasks[:50]]
    root = parse(svg.render_trajectories(trajs, trajs, params))
    paths = root.findall(f"{NS}path")
    assert len(paths) >= 100
    strokes = {p.get("stroke") for p in paths}
    assert strokes == {svg.PRIOR_COLOR, svg.POSTERIOR_COLOR}
    with pytest.raises(ValueError):
        svg.render_trajectories(trajs, [], params)


def test_straight_trajectory_is_one_segment(empty_task, params):
    tr = rollout(straight_policy(params), empty_task, params)
    line = np.array([params.start, params.goal])
    root = parse(svg.render_trajectories([line], [tr], params))
    d = root.findall(f"{NS}path")[0].get("d")
    f = svg.ArenaFrame(params)
    assert d == f"M{svg._fmt(f.x(-1))} {svg._fmt(f.y(-1))} L{svg._fmt(f.x(1))} {svg._fmt(f.y(1))}"
    assert len(svg.simplify_collinear(tr.positions)) == 2


def test_density_diff_properties(params):
    rng = np.random.default_rng(0)
    a = [sample_prior_task(rng) for _ in range(30)]
    assert np.all(svg.density_diff(a, a, params) == 0)
    root = parse(svg.render_density_diff(svg.density_diff(a, a, params), params))
    # only the background and the arena border: no coloured cells
    assert len(root.findall(f"{NS}rect")) == 2
    blob = [Task2D(np.vstack([t.points[:14], [[0.0, 0.0]]])) for t in a]
    base = [far_task((0.6, 0.6)) for _ in a]
    diff = svg.density_diff(base, blob, params)
    assert diff[75, 75] > 0
    b = [sample_prior_task(rng) for _ in range(500)]
    c = [sample_prior_task(rng) for _ in range(500)]
    assert np.abs(svg.density_diff(b, c, params)).max() <= 1


def test_diverging_colors():
    assert svg.diverging_color(1.0, 1.0) == "#ff0000"
    assert svg.diverging_color(-1.0, 1.0) == "#0000ff"
    assert svg.diverging_color(0.0, 1.0) == "#ffffff"


def test_trace_and_density_svgs():
    v = np.random.default_rng(0).normal(size=250)
    root = parse(svg.render_trace(v))
    poly = root.findall(f"{NS}polyline")[0]
    assert int(poly.get("data-n")) == 250 and len(poly.get("points").split()) == 250
    root = parse(svg.render_density({"c": [2.0] * 10}))
    assert len(root.findall(f"{NS}line[@class='spike']")) == 1
    parse(svg.render_trace([1.0] * 5))
    with pytest.raises(ValueError):
        svg.render_trace([])


def test_posterior_median_closer_to_target():
    rng = np.random.default_rng(0)
    prior = rng.uniform(0, 1, 500)
    post = rng.uniform(0, 0.2, 500)
    parse(svg.render_density({"prior": prior, "posterior": post}))
    assert abs(np.median(post)) < abs(np.median(prior))


def test_summary_csv_roundtrip():
    from rocus.sampler import BehaviorSpec

    row = art.summary_row("ds", BehaviorSpec("straight_dev"), [0.1, 0.3], [0.1, 0.3])
    assert row["prior_mean"] == row["posterior_mean"]
    row2 = art.summary_row("rrt", BehaviorSpec("clearance", mode="maximal"), [0.1, 0.2], [1 / 3, 0.7])
    back = art.parse_summary_csv(art.summary_csv([row, row2]))
    assert back == [row, row2]


def test_manifest_detects_tampering(tmp_path):
    art.atomic_write(tmp_path / "a.txt", "hello")
    art.atomic_write(tmp_path / "sub" / "b.txt", "x")
    art.write_manifest(tmp_path, {"k": 1})
    assert art.verify_manifest(tmp_path) == []
    (tmp_path / "a.txt").write_text("changed")
    (tmp_path / "c.txt").write_text("new")
    probs = art.verify_manifest(tmp_path)
    assert "modified: a.txt" in probs and "unlisted: c.txt" in probs


def test_atomic_write_leaves_no_temp(tmp_path):
    art.atomic_write(tmp_path / "f.json", json.dumps({"a": 1}))
    assert [p.name for p in tmp_path.iterdir()] == ["f.json"]


CFG = """
controller: ds
behavior:
  id: straight_dev
  mode: matching
  target: 0.0
  alpha: 0.05
sampler:
  n_samples: 60
  burn_in: 20
  seed: 3
  n_prior: 100
baseline:
  n: 40
  k: 5
render:
  max_trajectories: 10
"""


def test_config_parsing_and_errors(monkeypatch):
    cfg = parse_config(CFG)
    assert cfg.sampler.n_samples == 60 and cfg.behavior.alpha == 0.05
    monkeypatch.setenv("ROCUS_SEED", "99")
    assert parse_config(CFG).sampler.seed == 99
    monkeypatch.delenv("ROCUS_SEED")
    with pytest.raises(ConfigError, match=r"cfg.yaml:4: unknown behavior"):
        parse_config(CFG.replace("straight_dev", "wiggle"), "cfg.yaml")
    with pytest.raises(ConfigError, match=r":11: unknown key 'sampler.bogus'"):
        parse_config(CFG.replace("  seed: 3", "  bogus: 3"), "c")
    with pytest.raises(ConfigError, match="YAML parse error"):
        parse_config("behavior: [unclosed")
    assert parse_config(CFG).to_dict()["behavior"]["id"] == "straight_dev"


def _run(tmp_path, name):
    cfg = parse_config(CFG.replace("ds\n", "ds\noutput_dir: " + str(tmp_path / name) + "\n", 1))
    return run_experiment(cfg)


def test_run_experiment_artifacts_and_determinism(tmp_path):
    d1 = _run(tmp_path, "a")
    d2 = _run(tmp_path, "b")
    files = sorted(p.name for p in d1.iterdir())
    assert "manifest.json" in files and len([f for f in files if f.endswith(".svg")]) == 4
    assert (d1 / "samples.jsonl").read_bytes() == (d2 / "samples.jsonl").read_bytes()
    assert art.verify_manifest(d1) == []
    recs = art.read_jsonl(d1 / "samples.jsonl")
    assert len(recs) == 40 and set(recs[0]) == {"task", "behavior", "log_post", "accepted"}
    man = art.read_manifest(d1)
    assert {"acceptance_rate", "sigma"} <= set(man["stats"])
    rows = list(csv.DictReader(io.StringIO((d1 / "summary.csv").read_text())))
    assert float(rows[0]["posterior_mean"]) < float(rows[0]["prior_mean"])


def test_cli_verbs(tmp_path, capsys):
    cfgp = tmp_path / "c.yaml"
    cfgp.write_text(CFG)
    out = tmp_path / "runs"
    assert main(["sample", "--config", str(cfgp), "--output-dir", str(out), "--controller", "rrt"]) == 0
    run_dir = next(out.iterdir())
    assert main(["verify", str(run_dir)]) == 0
    assert main(["summarize", str(run_dir)]) == 0
    assert "rrt,straight_dev" in capsys.readouterr().out
    assert main(["render", str(run_dir)]) == 0
    assert main(["verify", str(run_dir)]) == 0
    (run_dir / "trace.svg").write_text("<svg/>")
    assert main(["verify", str(run_dir)]) == 1
    assert main(["baseline", "--config", str(cfgp), "--output-dir", str(out)]) == 0
    assert main(["calibrate", "--config", str(cfgp), "--output-dir", str(out)]) == 0


def test_cli_invalid_behavior_leaves_nothing(tmp_path, capsys):
    out = tmp_path / "runs"
    assert main(["run", "--behavior", "nope", "--output-dir", str(out)]) != 0
    assert not out.exists()
    assert "unknown behavior" in capsys.readouterr().err


def test_failed_run_removes_staging(tmp_path, monkeypatch):
    import rocus.experiment as ex

    def boom(*a, **k):
        raise RuntimeError("disk full")

    monkeypatch.setattr(ex, "stage_render", boom)
    with pytest.raises(RuntimeError):
        _run(tmp_path, "x")
    assert list((tmp_path / "x").iterdir()) == []
