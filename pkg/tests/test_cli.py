import json

import pytest

from objnav_bench.cli import main
from objnav_bench.harness import SuiteReport


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-scenes", "--seed", "4", "--count", "2", "--out", str(root / "scenes")]) == 0
    rc = main(["run", "--scenes", str(root / "scenes"), "--mode", "nearest,random", "--episodes", "1",
               "--seed", "1", "--out", str(root / "report.jsonl")])
    assert rc == 0
    return root


def test_gen_scenes_writes_versioned_files(workspace):
    files = sorted((workspace / "scenes").glob("*.json"))
    assert [f.name for f in files] == ["scene_00004.json", "scene_00005.json"]
    assert "version" in json.loads(files[0].read_text())


def test_run_and_report(workspace, capsys):
    rep = SuiteReport.load(workspace / "report.jsonl")
    assert len(rep.rows) == 4
    assert main(["report", "--in", str(workspace / "report.jsonl"), "--format", "csv"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "mode,episodes,success_pct,spl_pct,avg_steps" and len(out) == 3
    assert main(["report", "--in", str(workspace / "report.jsonl"), "--format", "md"]) == 0
    assert capsys.readouterr().out.startswith("| Mode |")


def test_render(workspace):
    out = workspace / "traj.svg"
    rc = main(["render", "--episode", "scene_00004/ep0@nearest_frontier_baseline",
               "--in", str(workspace / "report.jsonl"), "--scenes", str(workspace / "scenes"),
               "--out", str(out)])
    assert rc == 0 and out.read_text().startswith("<svg")


def test_failures_exit_nonzero(workspace, tmp_path):
    assert main(["report", "--in", str(tmp_path / "missing.jsonl")]) != 0
    assert main(["run", "--scenes", str(workspace / "scenes"), "--mode", "teleport", "--out",
                 str(tmp_path / "r.jsonl")]) != 0
    assert main(["render", "--episode", "nope@dwfe", "--in", str(workspace / "report.jsonl"),
                 "--scenes", str(workspace / "scenes"), "--out", str(tmp_path / "x.svg")]) != 0
    with pytest.raises(SystemExit) as exc:
        main(["run", "--mode", "dwfe"])
    assert exc.value.code != 0


def test_config_rejects_credentials(workspace, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"llm": {"api_key": "sk-nope"}}))
    rc = main(["run", "--scenes", str(workspace / "scenes"), "--mode", "dwfe", "--config", str(cfg),
               "--out", str(tmp_path / "r.jsonl")])
    assert rc != 0


def test_pgm_dump(workspace, tmp_path):
    rc = main(["run", "--scenes", str(workspace / "scenes"), "--mode", "dwfe", "--episodes", "1",
               "--limit", "1", "--out", str(tmp_path / "r.jsonl"), "--dump-pgm", str(tmp_path / "pgm")])
    assert rc == 0
    belief = (tmp_path / "pgm" / "scene_00004_ep0_dwfe_belief.pgm").read_text().split("\n")
    assert belief[0] == "P2" and belief[2] == "255"
    w, h = map(int, belief[1].split())
    assert len(belief[3:-1]) == h and all(len(row.split()) == w for row in belief[3:-1])
