import math

import pytest

from aircomp_ia.cli import main
from aircomp_ia.config import parse_config
from aircomp_ia.errors import ParseError, ValidationError
from aircomp_ia.channel import ScalarMode

EXAMPLE = "K=3\nr=2\noverlaps=1,1\nn=1\np=5\nseed=7\n"


def test_parse_example():
    cfg = parse_config(EXAMPLE)
    assert (cfg.K, cfg.r, cfg.overlaps, cfg.n, cfg.p, cfg.seed) == (3, 2, [1, 1], 1, 5, 7)
    assert cfg.mode is ScalarMode.COMPLEX and cfg.snr == [math.inf]


@pytest.mark.parametrize("text,exc", [
    ("K=3\nr=2\noverlaps=1\n", ValidationError),
    ("K=3\nr=2\noverlaps=1,1\nn=0\n", ValidationError),
    ("K=3\nr=2\noverlaps=1,1\np=6\n", ValidationError),
    ("K=3\nr=2\noverlaps=1,1\nscheme=single_v\nscheme=two_v\n", ParseError),
    ("K=3\nr=2\nbogus=1\n", ParseError),
    ("K=3\nr 2\n", ParseError),
    ("K=x\nr=2\n", ParseError),
    ("r=2\n", ValidationError),
    ("K=2\nr=3\noverlaps=2\nscheme=single_v\n", ValidationError),
    ("K=3\nr=2\noverlaps=1,1\nh_min=3\n", ValidationError),
])
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_config(text)


def test_parse_error_line_number():
    with pytest.raises(ParseError) as info:
        parse_config("# comment\nK=3\n\nwhat=1\n")
    assert info.value.line == 4 and "line 4" in str(info.value)


def _run(tmp_path, text, command, *extra):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(text)
    return main([command, "--config", str(cfg), "--out", str(tmp_path / "out"), *extra])


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_sha256=") and "seed=" in lines[0]
    return [l.split(",") for l in lines[1:]]


def test_dof_table(tmp_path):
    assert _run(tmp_path, EXAMPLE + "n_list=1,2,3\n", "dof-table") == 0
    rows = _rows(tmp_path / "out" / "dof_table.csv")
    assert rows[0] == ["n", "block", "useful_cols", "T", "dof_fraction", "limit_per_rx", "sum_dof", "limit_sum"]
    assert [(r[0], r[4]) for r in rows[1:]] == [("1", "1/65"), ("2", "64/793"), ("3", "729/4825")]
    assert {r[5] for r in rows[1:]} == {"1/2"} and {r[7] for r in rows[1:]} == {"3/2"}


def test_verify_alignment(tmp_path):
    assert _run(tmp_path, EXAMPLE + "dump=true\n", "verify-alignment", "--mode", "exact") == 0
    rows = _rows(tmp_path / "out" / "alignment_report.csv")
    assert len(rows) == 4 and all(r[7] == "FullRank" for r in rows[1:])
    assert _rows(tmp_path / "out" / "channel.csv")[0] == ["ell", "q", "t", "num", "den"]
    assert _rows(tmp_path / "out" / "precoders.csv")[0][:4] == ["kind", "cluster", "q", "t"]
    assert _rows(tmp_path / "out" / "exponents.csv")[0] == ["matrix", "column"] + [f"e{i}" for i in range(1, 7)]


def test_simulate_noise_free(tmp_path):
    assert _run(tmp_path, EXAMPLE + "trials=5\n", "simulate") == 0
    rows = _rows(tmp_path / "out" / "campaign.csv")
    assert rows[1][:3] == ["inf", "5", "0.0"]
    assert len(_rows(tmp_path / "out" / "trials.csv")) == 1 + 5 * 3


def test_simulate_exact_noisy_is_config_error(tmp_path):
    assert _run(tmp_path, EXAMPLE + "mode=exact\nsnr=10\n", "simulate") == 2


def test_rank_oracle_and_baseline(tmp_path):
    assert _run(tmp_path, EXAMPLE + "lemma_L=2,3\nlemma_trials=10\nlemma_seeds=0\n", "rank-oracle") == 0
    assert len(_rows(tmp_path / "out" / "lemma.csv")) == 3
    assert _run(tmp_path, EXAMPLE + "baseline_trials=2\n", "baseline") == 0
    rows = _rows(tmp_path / "out" / "baseline.csv")
    assert rows[1] == ["TDMA_AirComp", "3", "2", "1", "3/2"] and rows[2] == ["IA_only", "3", "2", "3/4", "2"]


def test_exit_codes(tmp_path):
    assert _run(tmp_path, "K=3\nr=2\noverlaps=1\n", "dof-table") == 2
    assert main(["dof-table", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["nope", "--config", "x"]) == 2
    # the full blocklength of this fixture exceeds the column cap
    assert _run(tmp_path, "K=4\nr=3\noverlaps=1,0,1\n", "verify-alignment") == 2
    assert _run(tmp_path, "K=4\nr=3\noverlaps=1,0,1\nsample_rows=4\ncolumn_sample=4\n", "verify-alignment") == 0


def test_invariant_failure_exit(tmp_path, monkeypatch):
    import aircomp_ia.cli as cli
    from aircomp_ia.oracles import LemmaCampaign
    monkeypatch.setattr(cli, "lemma_trial_campaign", lambda L, t, s: LemmaCampaign(L, t, t - 1, s))
    assert _run(tmp_path, EXAMPLE + "lemma_L=2\nlemma_trials=3\nlemma_seeds=0\n", "rank-oracle") == 1


def test_byte_reproducible(tmp_path):
    text = EXAMPLE + "trials=3\nsnr=10,inf\n"
    for sub in ("a", "b"):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(text)
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / sub)]) == 0
    for name in ("trials.csv", "campaign.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
