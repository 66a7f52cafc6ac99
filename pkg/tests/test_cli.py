import csv
import json

import pytest

from lossyavg import experiments as ex
from lossyavg.cli import main


def run(tmp_path, command, config, *extra, name="cfg.json"):
    cfg = tmp_path / name
    cfg.write_text(json.dumps(config))
    out = tmp_path / f"out-{command}"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_bounds_grid(tmp_path):
    code, out = run(tmp_path, "bounds", {"topology": {"generator": "complete", "m": 50},
                                         "D_grid": {"logspace": [1e-6, 0.05, 7]}})
    assert code == 0
    table = rows(out / "bounds.csv")
    assert len(table) == 7 * 10
    assert list(table[0]) == list(ex.BOUNDS_HEADER)
    assert {r["valid"] for r in table} == {"true", "false"}
    meta = json.loads((out / "bounds.meta.json").read_text())
    assert meta["seed"] == 0 and meta["config"]["topology"]["m"] == 50


def test_bounds_empty_grid(tmp_path):
    code, out = run(tmp_path, "bounds", {"topology": {"generator": "star", "m": 5}, "D_grid": []})
    assert code == 0
    assert (out / "bounds.csv").read_text() == ",".join(ex.BOUNDS_HEADER) + "\n"


def test_bounds_edge_list_topology(tmp_path):
    (tmp_path / "g.txt").write_text("3\n1 2\n2 3\n")
    code, out = run(tmp_path, "bounds", {"topology": {"edge_list": "g.txt"}, "D_grid": [0.01],
                                         "bounds": ["gws_upper"]})
    assert code == 0
    assert float(rows(out / "bounds.csv")[0]["lambda2"]) == pytest.approx(0.75)


def test_simulate_single_run_echoes_result(tmp_path):
    config = {"topology": {"generator": "ring", "m": 5},
              "protocol": {"kind": "fixed", "d": 0.25, "sequence": [[1, 2], [2, 3]]}}
    code, out = run(tmp_path, "simulate", config)
    assert code == 0
    doc = json.loads((out / "simulate.json").read_text())
    assert doc["result"]["per_node_rate"] == [1.0, 2.0, 1.0, 0.0, 0.0]
    assert (out / "rounds.csv").read_text().splitlines()[1:] == ["1,1,2,1.0,1.0,", "2,2,3,1.0,1.0,"]


def test_simulate_many_runs(tmp_path):
    from lossyavg import bounds, protocols, spectral, topology

    cfg = {"topology": {"generator": "complete", "m": 10}, "runs": 100, "seed": 4,
           "protocol": {"kind": "gossip", "T": 200, "d": 0.1}}
    code, out = run(tmp_path, "simulate", cfg)
    assert code == 0
    s = json.loads((out / "simulate.json").read_text())["summary"]
    assert s["runs"] == 100 and s["avg_distortion_se"] > 0
    # independent estimate of the expectation over edge sequences
    t = topology.make_complete(10)
    edges = protocols.gossip_edges(t, spectral.uniform_q(t), 200, 2000, seed=99)
    ref = protocols.run_gossip_batch(10, edges, 0.1).avg_distortion
    se = (s["avg_distortion_se"] ** 2 + ref.var(ddof=1) / ref.size) ** 0.5
    assert abs(s["avg_distortion"] - ref.mean()) < 4 * se
    assert s["avg_distortion"] < bounds.gossip_distortion_upper(10, 200, 0.1, 1 - 1 / 9)


def test_simulate_is_byte_identical_across_threads(tmp_path):
    cfg = {"topology": {"generator": "complete", "m": 6}, "runs": 8,
           "protocol": {"kind": "gossip", "T": 30, "d": 0.1, "wz": True}}
    _, a = run(tmp_path, "simulate", cfg, "--threads", "1", name="a.json")
    text_a = (a / "simulate.json").read_bytes()
    _, b = run(tmp_path, "simulate", cfg, "--threads", "3", name="b.json")
    assert (b / "simulate.json").read_bytes() == text_a


def test_seed_flag_overrides_config(tmp_path):
    cfg = {"topology": {"generator": "complete", "m": 6}, "runs": 3,
           "protocol": {"kind": "gossip", "T": 30, "d": 0.1}}
    _, out = run(tmp_path, "simulate", cfg, "--seed", "123")
    doc = json.loads((out / "simulate.json").read_text())
    assert doc["seed"] == 123 and doc["config"]["seed"] == 123


def test_rd_curve_points(tmp_path):
    m = 8
    cfg = {"topology": {"generator": "complete", "m": m}, "runs": 4, "seed": 2,
           "D_grid": [0.01, (m - 1) / m**2 + 0.01], "T_multipliers": [1.0, 1.5]}
    code, out = run(tmp_path, "rd-curve", cfg, "--threads", "2")
    assert code == 0
    table = ex.read_rd_curve((out / "rd_curve.csv").read_text())
    assert len(table) == 2
    live, flat = table
    assert live["converged"] and not live["zero_rate"]
    assert 0 < live["R_wz"] < live["R_plain"]
    assert flat["zero_rate"] and flat["R_plain"] == 0.0
    meta = json.loads((out / "rd_curve.meta.json").read_text())
    assert meta["bisection"]["max_iter"] == 60


def test_rd_curve_single_point(tmp_path):
    cfg = {"topology": {"generator": "complete", "m": 6}, "runs": 2, "D_grid": [0.02],
           "T_multipliers": [1.2]}
    code, out = run(tmp_path, "rd-curve", cfg)
    assert code == 0
    assert len(rows(out / "rd_curve.csv")) == 1


def test_bisection_reports_failure():
    import numpy as np
    edges = np.zeros((2, 1, 2), dtype=int)
    edges[:, :, 1] = 1
    assert ex.bisect_d(4, edges, 1e-3) is None
    res = ex.bisect_d(2, np.array([[[0, 1]]]), 0.01, max_iter=3)
    assert not res.converged and res.iterations == 3


@pytest.mark.parametrize("generator,m,limit", [("complete", 10, 1 - 1 / 9 + 1e-9),
                                               ("path", 2, 1e-15),
                                               ("star", 20, 1 - 1 / 38 + 1e-12)])
def test_optimize_q(tmp_path, generator, m, limit):
    code, out = run(tmp_path, "optimize-q", {"topology": {"generator": generator, "m": m},
                                             "optimize": {"iterations": 40}})
    assert code == 0
    report = json.loads((out / "optimize_q.json").read_text())
    assert abs(report["lambda2"]) <= limit
    assert report["lambda2"] <= report["lambda2_uniform"] + 1e-12
    assert len((out / "q.csv").read_text().splitlines()) == m


def test_verify_passes(tmp_path):
    code, out = run(tmp_path, "verify", {"topology": {"generator": "complete", "m": 3},
                                         "verify": {"m": [3, 6], "trials": 20000}})
    assert code == 0
    assert json.loads((out / "verify.json").read_text())["passed"]


def test_verify_detects_corrupted_noise_covariance(tmp_path):
    cfg = {"topology": {"generator": "complete", "m": 3}, "fault": "corrupt_sigma_v",
           "verify": {"checks": ["engine_mc"], "m": [3, 6]}}
    code, _ = run(tmp_path, "verify", cfg)
    assert code == 2


def test_verify_empty_selection(tmp_path):
    code, out = run(tmp_path, "verify", {"topology": {"generator": "complete", "m": 3},
                                         "verify": {"checks": []}})
    assert code == 0
    assert json.loads((out / "verify.json").read_text())["checks"] == {}


@pytest.mark.parametrize("config", [
    {"topology": {"generator": "complete", "m": 5}, "extra": 1},
    {"topology": {"generator": "complete", "m": 5, "p": 0.3}},
    {"topology": {"generator": "blob", "m": 5}},
    {"topology": {"generator": "complete", "m": 5}, "protocol": {"kind": "gossip", "d": 2}},
    {"topology": {"generator": "path", "m": 3}, "protocol": {"kind": "fixed", "sequence": [[1, 3]]}},
    {"topology": {"generator": "complete", "m": 5}, "D_grid": [-1]},
    {"topology": {"generator": "complete", "m": 5}, "bounds": ["made_up"]},
    {"topology": {"generator": "complete", "m": 5}, "verify": {"checks": ["vibes"]}},
    {"D_grid": [0.1]},
])
def test_invalid_configs_exit_1(tmp_path, config):
    code, _ = run(tmp_path, "bounds", config)
    assert code == 1


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["bounds", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["launch"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["bounds", "--config", str(bad)]) == 1
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"topology": {"generator": "complete", "m": 4}}))
    assert main(["bounds", "--config", str(good), "--threads", "0"]) == 1
    assert main(["bounds", "--config", str(good), "--seed", "-4"]) == 1
