import csv
import os

import numpy as np
import pytest

from forta.cli import main
from forta.config import parse_config
from forta.errors import InvalidConfiguration

SMALL_CONFIG = """\
[protocol]
n_users = 8
collusion = 2
byzantine = 2
select_m = 3
rounds = 2
rules = fedavg,modified_krum
seed = 7

[task]
features = 4
classes = 3
samples_per_user = 40
test_samples = 100

[output]
directory = {outdir}
plots = {plots}
"""


def _write_config(tmp_path, **kw):
    kw.setdefault("outdir", str(tmp_path / "out"))
    kw.setdefault("plots", "true")
    path = tmp_path / "run.ini"
    path.write_text(SMALL_CONFIG.format(**kw))
    return str(path)


# --- parsing ----------------------------------------------------------------

def test_parse_defaults_and_overrides(tmp_path):
    run = parse_config(_write_config(tmp_path))
    assert run.training.n_users == 8
    assert run.training.rounds == 2
    assert run.training.learning_rate == 0.5  # default
    assert run.rules == ("fedavg", "modified_krum")


def test_parse_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[protocol]\nNusers = 30\n")
    with pytest.raises(InvalidConfiguration, match="protocol.nusers"):
        parse_config(str(path))


def test_parse_rejects_unknown_section(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[protcol]\nn_users = 30\n")
    with pytest.raises(InvalidConfiguration, match="protcol"):
        parse_config(str(path))


def test_parse_rejects_hypothesis_violation(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[protocol]\nn_users = 20\nbyzantine = 10\n")
    with pytest.raises(InvalidConfiguration, match="2A \\+ 2 < N"):
        parse_config(str(path))


def test_parse_rejects_bad_value(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[protocol]\nrounds = fifty\n")
    with pytest.raises(InvalidConfiguration, match="protocol.rounds"):
        parse_config(str(path))


def test_parse_weight_decay(tmp_path):
    path = tmp_path / "wd.ini"
    path.write_text("[protocol]\nweight_decay = 0.3\n")
    assert parse_config(str(path)).training.weight_decay == 0.3
    assert parse_config(_write_config(tmp_path)).training.weight_decay == 1.2
    path.write_text("[protocol]\nweight_decay = -1\n")
    with pytest.raises(InvalidConfiguration, match="weight_decay"):
        parse_config(str(path))


def test_seed_env_override(tmp_path, monkeypatch):
    path = _write_config(tmp_path)
    monkeypatch.setenv("FORTA_SEED", "12345")
    assert parse_config(path).training.seed == 12345
    monkeypatch.delenv("FORTA_SEED")
    assert parse_config(path).training.seed == 7


def test_attack_auto_byzantine(tmp_path):
    path = tmp_path / "atk.ini"
    path.write_text("[protocol]\nn_users = 8\ncollusion = 2\nbyzantine = 2\n"
                    "select_m = 3\n[task]\nfeatures = 4\nclasses = 3\n"
                    "[attack]\nkind = scale\nmagnitude = 10\n")
    run = parse_config(str(path))
    assert run.training.attack.byzantine_set == (1, 2)


# --- run subcommand ---------------------------------------------------------

def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_cmd_run_produces_outputs(tmp_path, capsys):
    config = _write_config(tmp_path)
    outdir = tmp_path / "out"
    assert main(["run", "--config", config]) == 0
    for name in ("config.ini", "runlog.csv", "scores.csv", "profile.csv",
                 "accuracy.svg", "flags.svg"):
        assert (outdir / name).exists(), name
    assert not (tmp_path / "out.incomplete").exists()
    rows = _read_csv(outdir / "runlog.csv")
    assert rows[0] == ["round", "rule", "accuracy", "loss",
                       "decode_failures", "selected"]
    assert len(rows) == 1 + 2 * 2  # two rules, two rounds
    rules = {r[1] for r in rows[1:]}
    assert rules == {"fedavg", "modified_krum"}


def test_cmd_run_deterministic_outputs(tmp_path):
    config = _write_config(tmp_path)
    outdir = tmp_path / "out"
    assert main(["run", "--config", config, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", config, "--out", str(tmp_path / "b")]) == 0
    for name in ("runlog.csv", "scores.csv", "profile.csv", "config.ini"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, name


def test_cmd_run_bad_config_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[protocol]\nn_users = 20\nbyzantine = 10\n")
    assert main(["run", "--config", str(path)]) == 1
    assert "error:" in capsys.readouterr().err


def test_cmd_run_missing_config(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.ini")]) == 1
    assert "error:" in capsys.readouterr().err


def test_cmd_run_no_plots(tmp_path):
    config = _write_config(tmp_path, plots="false")
    assert main(["run", "--config", config]) == 0
    assert not (tmp_path / "out" / "accuracy.svg").exists()
    assert (tmp_path / "out" / "runlog.csv").exists()


# --- codec-fuzz subcommand --------------------------------------------------

def test_codec_fuzz_small(tmp_path, capsys):
    out = tmp_path / "fuzz.csv"
    assert main(["codec-fuzz", "--n", "15", "--k", "5", "--trials", "30",
                 "--errors", "0,3", "--seed", "1", "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert rows[0] == ["error_count", "magnitude", "success_rate", "mean_residual"]
    assert len(rows) == 3
    by_count = {int(r[0]): float(r[2]) for r in rows[1:]}
    assert by_count[0] == 1.0
    assert by_count[3] >= 0.9


def test_codec_fuzz_rejects_over_capacity(tmp_path, capsys):
    assert main(["codec-fuzz", "--n", "15", "--k", "5", "--trials", "5",
                 "--errors", "6", "--out", str(tmp_path / "f.csv")]) == 1


def test_codec_fuzz_deterministic(tmp_path):
    args = ["codec-fuzz", "--n", "15", "--k", "5", "--trials", "20",
            "--errors", "2", "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


# --- bounds subcommand ------------------------------------------------------

def test_bounds_report(tmp_path, capsys):
    path = tmp_path / "theory.ini"
    path.write_text("[theory]\nsigma_g = 0.01\nsigma_eps = 0.01\ng_norm = 1.0\n"
                    "mu_t = 1.5\nsigma_t = 0.2\nmu_q = 0.3\nsigma_q = 0.1\nc1 = 1.1\n")
    out = tmp_path / "bounds.txt"
    assert main(["bounds", "--config", str(path), "--out", str(out)]) == 0
    report = out.read_text()
    assert "16.7332" in report
    assert "sin_alpha" in report
    assert "sigma_prime" in report


def test_bounds_estimated_stats(tmp_path, capsys):
    path = tmp_path / "theory.ini"
    path.write_text("[theory]\nsigma_g = 0.01\n")
    assert main(["bounds", "--config", str(path)]) == 0
    outtxt = capsys.readouterr().out
    assert "mu_t = 1.0" in outtxt


def test_bounds_rejects_hypothesis_violation(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[protocol]\nn_users = 23\nbyzantine = 11\ncollusion = 1\n"
                    "select_m = 1\n")
    assert main(["bounds", "--config", str(path)]) == 1
