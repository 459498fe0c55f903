import os
import re

import pandas as pd
import pytest

from frcheck.cli import main
from frcheck.config import load_run_config
from frcheck.reports import config_digest, load_report

SPACES = """
[spaces]
p = {p}
q = {q}
alpha = 0, 0
beta = 0, 0

[sampling]
seed = 11
"""

CHECK_CONFIG = """[params]
n = 2
a = 0, 0
b = 0, 0
c = 2, 2

[check]
theorem = T1-necessary
""" + SPACES

WITNESS_CONFIG = """[params]
n = 2
a = {a}
b = {b}
c = {c}
""" + SPACES


def _run(write_config, tmp_path, text, *extra):
    path = write_config(text)
    out = tmp_path / "reports"
    return main(["--config", path, "--output-dir", str(out), "--log-level", "WARNING", *extra]), out


def test_check_passes_and_writes_report(write_config, tmp_path, capsys):
    text = CHECK_CONFIG.format(p="2, 2", q="2, 2")
    code, out = _run(write_config, tmp_path, text, "--action", "check")
    assert code == 0
    assert "T1-necessary: holds" in capsys.readouterr().out
    files = os.listdir(out)
    assert len(files) == 1
    assert re.fullmatch(r"check-[0-9a-f]{12}\.json", files[0])

    report = load_report(os.path.join(out, files[0]))
    assert report["header"]["seed"] == 11
    assert report["header"]["config_digest"] == config_digest(load_run_config(text=text))
    assert report["report"]["verdicts"]["T1-necessary"]["holds"]


def test_check_failing_verdict(write_config, tmp_path, capsys):
    text = CHECK_CONFIG.format(p="2, 2", q="2, 2").replace("c = 2, 2", "c = 2, 5/2")
    code, _ = _run(write_config, tmp_path, text, "--action", "check")
    assert code == 1
    assert "c2 = n + a2 + b2" in capsys.readouterr().out


def test_check_range_gate(write_config, tmp_path, capsys):
    code, out = _run(write_config, tmp_path, CHECK_CONFIG.format(p="2, 2", q="1, 1"), "--action", "check")
    assert code == 2
    assert "range gate" in capsys.readouterr().out
    assert not out.exists()


def test_float_parameter_is_a_parse_error(write_config, tmp_path):
    text = CHECK_CONFIG.format(p="2, 2", q="2, 2").replace("a = 0, 0", "a = 1.5, 0")
    code, _ = _run(write_config, tmp_path, text, "--action", "check")
    assert code == 3


def test_witness_feasible(write_config, tmp_path, capsys):
    text = WITNESS_CONFIG.format(a="1, 1", b="1, 1", c="4, 4", p="2, 2", q="2, 2")
    code, out = _run(write_config, tmp_path, text, "--action", "witness")
    assert code == 0
    assert capsys.readouterr().out.startswith("L22: r = (-1/4, -1/4)")
    (name,) = os.listdir(out)
    report = load_report(os.path.join(out, name))
    assert report["report"]["witness"]["s"] == ["-1/4", "-1/4"]
    assert all(item["holds"] for item in report["report"]["identities"])


def test_witness_infeasible(write_config, tmp_path, capsys):
    text = WITNESS_CONFIG.format(a="1, 1", b="-1/2, 1", c="5/2, 4", p="2, 2", q="2, 2")
    code, _ = _run(write_config, tmp_path, text, "--action", "witness")
    assert code == 1
    assert "infeasible" in capsys.readouterr().out


def test_csv_format(write_config, tmp_path):
    text = CHECK_CONFIG.format(p="2, 2", q="2, 2")
    code, out = _run(write_config, tmp_path, text, "--action", "check", "--format", "csv")
    assert code == 0
    (csv_name,) = [name for name in os.listdir(out) if name.endswith(".csv")]
    frame = pd.read_csv(os.path.join(out, csv_name))
    assert frame.loc[0, "queried"] == "T1-necessary"


def test_verify_needs_target(write_config, tmp_path):
    code, _ = _run(write_config, tmp_path, CHECK_CONFIG.format(p="2, 2", q="2, 2"), "--action", "verify")
    assert code == 3


def test_unknown_action_exits(write_config, tmp_path):
    with pytest.raises(SystemExit):
        _run(write_config, tmp_path, CHECK_CONFIG.format(p="2, 2", q="2, 2"), "--action", "plot")


def test_print_report(write_config, tmp_path, capsys):
    text = CHECK_CONFIG.format(p="2, 2", q="2, 2")
    _run(write_config, tmp_path, text, "--action", "check", "--print")
    assert '"queried": "T1-necessary"' in capsys.readouterr().out


CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")

# Small, lenient sampling so the command plumbing runs in seconds
QUICK_SAMPLING = """
[sampling]
seed = 7
base_samples = 4096
batch_size = 1024
doublings = 1
workers = 2
inner_samples = 256
cauchy_tolerance = 10
tail_index_threshold = none
"""


def _shipped(name):
    """A config from configs/ with its [sampling] block and everything after it swapped for QUICK_SAMPLING"""
    with open(os.path.join(CONFIG_DIR, name)) as f:
        text = f.read()
    return text.split("[sampling]")[0] + QUICK_SAMPLING


def _single_report(out, prefix):
    names = [name for name in os.listdir(out) if name.startswith(prefix) and name.endswith(".json")]
    assert len(names) == 1
    return load_report(os.path.join(out, names[0]))


@pytest.mark.parametrize("target,config_name,keys", [
    ("lemma21", "verify-lemma21.ini", {"prediction", "estimates", "ratios", "passed"}),
    ("remark21", "verify-remark21.ini", {"heights", "expected", "ratios", "passed"}),
    ("duality", "verify-duality.ini", {"testfn", "pairing", "lhs", "rhs", "agree"}),
])
def test_verify_targets_write_reports(write_config, tmp_path, capsys, target, config_name, keys):
    code, out = _run(write_config, tmp_path, _shipped(config_name), "--action", "verify", "--target", target)
    assert code in (0, 1)
    assert capsys.readouterr().out.startswith(target)
    report = _single_report(out, f"verify-{target}-")
    assert report["header"]["command"] == f"verify-{target}"
    assert report["header"]["seed"] == 7
    assert keys <= set(report["report"])


def test_verify_schur(write_config, tmp_path):
    code, out = _run(write_config, tmp_path, _shipped("verify-schur.ini"), "--action", "verify", "--target", "schur")
    assert code in (0, 1, 4)
    if code == 4:
        assert not out.exists()
    else:
        report = _single_report(out, "verify-schur-")
        assert {"witness", "sides"} <= set(report["report"])
        assert len(report["report"]["sides"]) == 2


def test_duality_pairing_section(write_config, tmp_path):
    code, out = _run(write_config, tmp_path, _shipped("verify-duality.ini"), "--action", "verify", "--target", "duality")
    assert code in (0, 1)
    report = _single_report(out, "verify-duality-")["report"]
    assert report["testfn"]["R"] == 1.0
    assert report["pairing"]["R"] == 2.0

    without = _shipped("verify-duality.ini").replace("[pairing]\nl = 1, 1\ns = 3, 3\nR = 2\n", "")
    code, out = _run(write_config, tmp_path / "fallback", without, "--action", "verify", "--target", "duality")
    assert code in (0, 1)
    report = _single_report(out, "verify-duality-")["report"]
    assert report["pairing"] == report["testfn"]


def test_scaling_writes_report_and_table(write_config, tmp_path):
    code, out = _run(write_config, tmp_path, _shipped("scaling.ini"), "--action", "scaling")
    assert code in (0, 1, 4)
    report = _single_report(out, "scaling-")
    labels = [item["label"] for item in report["report"]["reports"]]
    assert labels == ["source", "image", "ratio"]
    assert all("doubling_slopes" in item for item in report["report"]["reports"])
    (csv_name,) = [name for name in os.listdir(out) if name.endswith(".csv")]
    frame = pd.read_csv(os.path.join(out, csv_name))
    assert set(frame["label"]) == {"source", "image", "ratio"}


def test_replay_is_bit_exact(write_config, tmp_path):
    path = write_config(_shipped("verify-remark21.ini"))
    outputs = []
    for run in ("first", "second"):
        out = tmp_path / run
        code = main(["--config", path, "--output-dir", str(out), "--log-level", "WARNING",
                     "--action", "verify", "--target", "remark21"])
        assert code in (0, 1)
        (name,) = os.listdir(out)
        outputs.append((name, (out / name).read_bytes()))
    assert outputs[0] == outputs[1]
