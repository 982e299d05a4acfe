import math

import numpy as np
import pytest

from radnerf import cli, formats
from radnerf.errors import ConfigError, DivergedError
from radnerf.geometry import ImageGrid
from radnerf.sampling import SCHEMES

TINY = "n = 16\nphantom = simple\nsteps = 3\nwidth = 8\npe_l = 2\n"


@pytest.fixture
def tiny_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(TINY)
    return p


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_simulate_files(tmp_path, capsys):
    out = tmp_path / "sim"
    assert run("simulate", "--phantom", "simple", "--n", 64, "--scheme", "golden", "--r-factor", 8, "--out", out) == 0
    assert "N_phi=12 N_omega=90 R=8" in capsys.readouterr().out
    for name in ("kspace.nrfksp", "sinogram.nrfsin", "schedule.csv", "reference.nrfimg"):
        assert (out / name).is_file()
    k = formats.read_kspace(out / "kspace.nrfksp")
    assert k.samples.shape == (12, 90)
    assert formats.read_schedule_csv(out / "schedule.csv").n_phi == 12
    assert formats.read_image(out / "reference.nrfimg").n == 64


def test_simulate_full_sampling(tmp_path, capsys):
    assert run("simulate", "--phantom", "simple", "--n", 64, "--r-factor", 1, "--out", tmp_path) == 0
    assert "N_phi=100" in capsys.readouterr().out


def test_config_errors(tmp_path, tiny_config, capsys):
    assert run("simulate", "--phantom", tmp_path / "missing.txt", "--out", tmp_path) == 1
    assert run("reconstruct", "--config", tiny_config, "--steps", 0, "--out", tmp_path) == 1
    assert run("simulate", "--n", 15, "--out", tmp_path) == 1
    assert run("simulate", "--r-factor", 0.5, "--out", tmp_path) == 1
    assert run("simulate", "--psnr-mode", "sum", "--out", tmp_path) == 1
    assert run("simulate", "--config", tmp_path / "nope.cfg") == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert run("simulate", "--config", bad) == 1
    assert "error:" in capsys.readouterr().err


def test_io_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("simulate", "--phantom", "simple", "--n", 16, "--out", blocker / "sub") == 2


def test_divergence_exit_code(tmp_path, tiny_config, monkeypatch, capsys):
    def boom(cfg, callback=None):
        raise DivergedError(7, math.nan)

    monkeypatch.setattr(cli, "run_case", boom)
    assert run("reconstruct", "--config", tiny_config, "--out", tmp_path) == 3
    assert "step 7" in capsys.readouterr().err


def test_reconstruct_outputs_and_determinism(tmp_path, tiny_config):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("reconstruct", "--config", tiny_config, "--out", a) == 0
    assert run("reconstruct", "--config", tiny_config, "--out", b) == 0
    rows = formats.read_metrics_csv(a / "metrics.csv")
    assert [r[0] for r in rows] == ["ours", "ifft"]
    _, loss_rows = formats.read_csv(a / "loss.csv", formats.LOSS_HEADER)
    assert len(loss_rows) == 3
    for name in ("ours.nrfimg", "ifft.nrfimg", "params.nrfmlp", "ours.pgm"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    formats.read_params(a / "params.nrfmlp")


def test_reconstruct_with_ink(tmp_path, tiny_config):
    assert run("reconstruct", "--config", tiny_config, "--baseline", "ifft,ink", "--out", tmp_path) == 0
    assert [r[0] for r in formats.read_metrics_csv(tmp_path / "metrics.csv")] == ["ours", "ifft", "ink"]


def test_flags_override_config(tiny_config):
    args = cli.make_parser().parse_args(["reconstruct", "--config", str(tiny_config), "--steps", "5", "--seed", "4"])
    cfg = cli.config_from_args(args)
    assert cfg.train.steps == 5 and cfg.n == 16 and cfg.seed == 4 and cfg.train.seed == 4
    assert cfg.train.width == 8 and cfg.pe_L == 2


def test_parse_config_text():
    assert cli.parse_config_text("# note\nN = 32  # trailing\nr-factor=4\n") == {"n": "32", "r_factor": "4"}
    with pytest.raises(ConfigError):
        cli.parse_config_text("just words\n")
    with pytest.raises(ConfigError):
        cli.build_config({"n": "sixteen"})


def test_sweep(tmp_path, tiny_config, capsys):
    assert run("sweep-r", "--config", tiny_config, "--r-list", "4,8", "--out", tmp_path) == 0
    header, rows = formats.read_csv(tmp_path / "sweep.csv", formats.SWEEP_HEADER)
    assert [float(r[0]) for r in rows] == [4.0, 8.0]
    assert [int(r[1]) for r in rows] == [6, 3]
    assert (tmp_path / "R4" / "ours.nrfimg").is_file()


def test_sampling_study(tmp_path, tiny_config):
    assert run("sampling-study", "--config", tiny_config, "--r-factor", 4, "--seeds", "0,1", "--out", tmp_path) == 0
    _, rows = formats.read_csv(tmp_path / "sampling.csv", formats.SAMPLING_HEADER)
    assert len(rows) == 5 * 2
    assert [r[0] for r in rows[::2]] == list(SCHEMES)
    covering = {r[0]: float(r[6]) for r in rows}
    assert max(covering, key=covering.get) == "limited"


def test_metrics_command(tmp_path, capsys):
    ref = np.zeros((4, 4))
    ref[0, 0] = 1
    formats.write_image(tmp_path / "y.nrfimg", ImageGrid(ref, 4.0))
    formats.write_image(tmp_path / "x.nrfimg", ImageGrid(ref + 0.1, 4.0))
    assert run("metrics", tmp_path / "x.nrfimg", tmp_path / "y.nrfimg", "--case", "t") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "case,ssim,psnr_db,psnr_mode"
    assert float(lines[1].split(",")[2]) == pytest.approx(20.0)
    assert run("metrics", tmp_path / "x.nrfimg", tmp_path / "y.nrfimg", "--psnr-mode", "literal",
               "--out", tmp_path / "m.csv") == 0
    assert formats.read_metrics_csv(tmp_path / "m.csv")[0][3] == "literal"
    assert run("metrics", tmp_path / "missing.nrfimg", tmp_path / "y.nrfimg") == 1
