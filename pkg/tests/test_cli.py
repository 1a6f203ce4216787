import json
import socket
import subprocess
import sys
import time
import urllib.request

import pytest

from regionrank.bundled import fixture_path
from regionrank.cli import EXIT_INPUT_ERROR, EXIT_OK, EXIT_PROBE_FAILURE, main

WORKED_WORKFLOW = str(fixture_path("worked_example.workflow"))
WORKED_ENV = str(fixture_path("worked_example_env.json"))
ADVERSARIAL_ENV = str(fixture_path("adversarial_env.json"))
CATALOG = str(fixture_path("regions.json"))


def rank_args(**overrides):
    args = {
        "--workflow": WORKED_WORKFLOW,
        "--catalog": CATALOG,
        "--mode": "sim",
        "--env": WORKED_ENV,
    }
    args.update(overrides)
    flat = ["rank"]
    for key, value in args.items():
        if value is not None:
            flat += [key, value]
    return flat


def test_rank_worked_example(capsys):
    assert main(rank_args()) == EXIT_OK
    out = capsys.readouterr().out
    assert out.rstrip().endswith("RECOMMENDED: us-east-1")
    assert "EC2 endpoint | final score" in out


def test_rank_json_format(capsys):
    assert main(rank_args(**{"--format": "json"})) == EXIT_OK
    out = capsys.readouterr().out
    body, final = out.rstrip().rsplit("\n", 1)
    doc = json.loads(body)
    assert doc["recommended"] == "us-east-1"
    assert final == "RECOMMENDED: us-east-1"
    assert len(doc["distance_table"]) == 8
    assert len(doc["final_table"]) == doc["prefilter_n"] == 3


def test_rank_top_n_overrides_prefilter(capsys):
    assert main(rank_args(**{"--env": ADVERSARIAL_ENV, "--top-n": "8",
                             "--format": "json"})) == EXIT_OK
    out = capsys.readouterr().out
    body, final = out.rstrip().rsplit("\n", 1)
    assert json.loads(body)["recommended"] == "sa-east-1"
    assert final == "RECOMMENDED: sa-east-1"


def test_rank_deterministic_output(capsys):
    assert main(rank_args()) == EXIT_OK
    first = capsys.readouterr().out
    assert main(rank_args()) == EXIT_OK
    assert capsys.readouterr().out == first


def test_rank_missing_catalog_is_input_error(capsys):
    assert main(rank_args(**{"--catalog": "/nonexistent/catalog.json"})) == EXIT_INPUT_ERROR
    assert "error:" in capsys.readouterr().err


def test_rank_sim_mode_requires_env(capsys):
    assert main(rank_args(**{"--env": None})) == EXIT_INPUT_ERROR
    assert "--env" in capsys.readouterr().err


def test_rank_rejects_bad_top_n(capsys):
    assert main(rank_args(**{"--top-n": "0"})) == EXIT_INPUT_ERROR
    assert "top-n" in capsys.readouterr().err


def test_rank_probe_failures_exit_3(tmp_path, capsys):
    # env locates nobody, so every channel of every pair fails
    env = {"node_locations": {}, "seed": 1}
    env_file = tmp_path / "empty_env.json"
    env_file.write_text(json.dumps(env))
    assert main(rank_args(**{"--env": str(env_file)})) == EXIT_PROBE_FAILURE
    err = capsys.readouterr().err
    assert "channels failed" in err


def test_rank_accepts_dag_workflow(tmp_path, capsys):
    doc = {
        "name": "dagged",
        "sources": ["http://wikimedia.org/images/sample.png"],
        "nodes": [
            {"id": "src", "url": "http://wikimedia.org/images/sample.png"},
            {"id": "princeton", "url": "http://planetlab-03.cs.princeton.edu/"},
        ],
        "hops": [["src", "princeton"]],
    }
    wf = tmp_path / "flow.json"
    wf.write_text(json.dumps(doc))
    assert main(rank_args(**{"--workflow": str(wf)})) == EXIT_OK
    assert "RECOMMENDED: us-east-1" in capsys.readouterr().out


# --- verify ---


@pytest.fixture()
def small_world(tmp_path):
    env = {
        "node_locations": {
            "src.test": {"lat": 0.0, "lon": 0.0},
            "proc.test": {"lat": 1.0, "lon": 1.0},
            "near.probe.test": {"lat": 0.5, "lon": 0.5},
            "far.probe.test": {"lat": 50.0, "lon": 50.0},
        },
        "processing_s": 0.1,
        "seed": 3,
    }
    env_file = tmp_path / "env.json"
    env_file.write_text(json.dumps(env))
    wf = tmp_path / "wf.workflow"
    wf.write_text("http://src.test/\nhttp://proc.test/\n")
    return str(wf), str(env_file)


def test_verify_sim_positive_speedup_for_nearer_vantage(small_world, capsys):
    wf, env_file = small_world
    code = main([
        "verify", "--workflow", wf, "--mode", "sim", "--env", env_file,
        "--vantage-a", "far.probe.test", "--vantage-b", "near.probe.test",
    ])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "vantage-a (far.probe.test):" in out
    assert "runs 5" in out
    speedup_line = [l for l in out.splitlines() if l.startswith("speedup:")][0]
    assert float(speedup_line.split()[1].rstrip("%")) > 0


def test_verify_sim_identical_vantages_zero_speedup(small_world, capsys):
    wf, env_file = small_world
    code = main([
        "verify", "--workflow", wf, "--mode", "sim", "--env", env_file,
        "--vantage-a", "near.probe.test", "--vantage-b", "near.probe.test",
        "--runs", "3",
    ])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "speedup: 0.00%" in out
    assert "delta-sigma: n/a" in out


def test_verify_sim_unknown_vantage_is_input_error(small_world, capsys):
    wf, env_file = small_world
    code = main([
        "verify", "--workflow", wf, "--mode", "sim", "--env", env_file,
        "--vantage-a", "ghost.test", "--vantage-b", "near.probe.test",
    ])
    assert code == EXIT_INPUT_ERROR
    assert "ghost.test" in capsys.readouterr().err


# --- simulate ---


def test_simulate_prints_oracle_order(capsys):
    code = main([
        "simulate", "--workflow", WORKED_WORKFLOW, "--catalog", CATALOG,
        "--env", ADVERSARIAL_ENV,
    ])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "region | predicted seconds"
    assert lines[-1] == "BEST: sa-east-1"
    assert len(lines) == 10  # header + 8 regions + BEST


# --- gen ---


def test_gen_is_deterministic(tmp_path, capsys):
    pool = tmp_path / "pool.txt"
    pool.write_text("# candidate endpoints\nhttp://a.test/\nhttp://b.test/\n")
    args = ["gen", "--pool", str(pool), "--length", "5", "--seed", "9",
            "--source", "http://s.test/"]
    assert main(args) == EXIT_OK
    first = capsys.readouterr().out
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out == first
    lines = first.splitlines()
    assert lines[0] == "# name: random-len5-seed9"
    urls = [l for l in lines if not l.startswith("#")]
    assert len(urls) == 6
    assert urls[0] == "http://s.test/"
    assert set(urls[1:]) <= {"http://a.test/", "http://b.test/"}


def test_gen_missing_pool_is_input_error(capsys):
    code = main(["gen", "--pool", "/nonexistent/pool.txt", "--length", "2",
                 "--seed", "1", "--source", "http://s.test/"])
    assert code == EXIT_INPUT_ERROR
    assert "pool" in capsys.readouterr().err


# --- serve ---


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_serve_subprocess_round_trip():
    port = free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "regionrank", "serve", "--port", str(port), "--mode", "echo"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE,
    )
    try:
        url = f"http://127.0.0.1:{port}/"
        deadline = time.time() + 10
        last_error = None
        while time.time() < deadline:
            try:
                req = urllib.request.Request(url, data=b"ping", method="POST")
                with urllib.request.urlopen(req, timeout=2) as resp:
                    assert resp.read() == b"ping"
                break
            except OSError as exc:
                last_error = exc
                time.sleep(0.1)
        else:
            pytest.fail(f"serve never came up: {last_error}")
    finally:
        proc.terminate()
        proc.wait(timeout=10)
