import json
import subprocess
import sys

import pytest

from isotns_sampler import states
from isotns_sampler.cli import main
from isotns_sampler.isotns import replace_site


def test_sample_csv(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    args = ["sample", "--state", "ghz", "--L", "2", "3", "--n-samples", "10", "100", "--trials", "2", "--out", str(out)]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# isotns-sampler v0.1.0"
    assert lines[1] == "state,L,chi,N,trial,KL,sum_row_errors"
    assert len(lines) == 2 + 2 * 2 * 2
    first = out.read_text()
    assert main(args) == 0
    assert out.read_text() == first


def test_sample_json(capsys):
    assert main(["sample", "--state", "w", "--L", "2", "--n-samples", "50", "--trials", "1", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc[0]["rows"][0]["N"] == 50


def test_topk(capsys):
    assert main(["topk", "--state", "random", "--L", "3", "--chi", "1", "8", "--k", "10"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("state,L,chi,K,n_returned,KL")
    assert len(lines) == 4


def test_bench(capsys):
    assert main(["bench", "--state", "ghz", "--L", "2", "3", "--repeats", "1", "--n-samples", "1", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["rows"]) == 2


def test_validate_ok(capsys):
    assert main(["validate", "--state", "w", "--L", "3"]) == 0
    assert "True" in capsys.readouterr().out


def test_validate_failure_exit_code(tmp_path, capsys):
    g = states.ghz_grid(2)
    bad = replace_site(g, 1, 1, g.sites[1][1].scale(2.0))
    path = tmp_path / "grid.json"
    path.write_text(bad.dumps())
    assert main(["validate", "--grid", str(path), "--format", "json"]) == 2
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] is False and doc["worst_site"] == [1, 1]


def test_infeasible_exit_code(capsys):
    assert main(["topk", "--state", "random", "--L", "5"]) == 1
    assert "oracle" in capsys.readouterr().err
    assert main(["sample", "--state", "ghz", "--L", "2", "--trials", "0"]) == 1


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "isotns_sampler", "validate", "--state", "ghz", "--L", "2"], capture_output=True, text=True
    )
    assert res.returncode == 0
    assert res.stdout.startswith("# isotns-sampler")


def test_usage_error():
    with pytest.raises(SystemExit):
        main(["sample", "--state", "nope"])
