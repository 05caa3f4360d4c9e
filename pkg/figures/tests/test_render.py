import shutil
from pathlib import Path

import pytest

from emubench_figures import FigureSpec, render
from emubench_figures.cli import main as fig_main
from emubench_figures.render import FigureDataError

DATA = Path(__file__).parent / "data"


def test_iv_sweep_two_techniques(tmp_path):
    out = tmp_path / "iv.png"
    report = render(FigureSpec(
        kind="iv-sweep",
        inputs=[str(DATA / "iv_cnnlstm.csv"), str(DATA / "iv_lps.csv")],
        out=str(out),
    ))
    assert out.exists()
    assert len(report.panels) == 2
    # two mean curves + bands on top; dots, mean line, zero line below
    assert report.panels[0]["lines"] == 2
    assert report.panels[0]["bands"] == 2
    assert report.panels[1]["lines"] >= 2
    assert report.panels[1]["bands"] == 1


def test_iv_sweep_single_technique(tmp_path):
    out = tmp_path / "iv1.png"
    report = render(FigureSpec(
        kind="iv-sweep", inputs=[str(DATA / "iv_lps.csv")], out=str(out),
    ))
    assert out.exists()
    assert len(report.panels) == 1
    assert report.panels[0]["lines"] == 1


def test_biasvar_series_encoding(tmp_path):
    out = tmp_path / "bv.png"
    report = render(FigureSpec(kind="biasvar", inputs=[str(DATA / "biasvar.csv")],
                               out=str(out)))
    assert out.exists()
    # two techniques times (mse, bias2, var)
    assert report.panels[0]["lines"] == 6


def test_spectra_one_line_per_group(tmp_path):
    out = tmp_path / "sp.png"
    report = render(FigureSpec(kind="spectra", inputs=[str(DATA / "spectra.csv")],
                               out=str(out)))
    assert out.exists()
    # (linear1d, fcn) x n in {2, 5, 10}
    assert report.panels[0]["lines"] == 6


def test_maps_three_panels(tmp_path):
    out = tmp_path / "maps.png"
    report = render(FigureSpec(
        kind="maps",
        inputs=[str(DATA / "pred_ged"), str(DATA / "target_ged")],
        out=str(out),
    ))
    assert out.exists()
    assert sum(p["images"] for p in report.panels) == 3


def test_empty_csv_errors_without_writing(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("technique,n,bias2,var,mse\n")
    out = tmp_path / "nothing.png"
    with pytest.raises(FigureDataError):
        render(FigureSpec(kind="biasvar", inputs=[str(empty)], out=str(out)))
    assert not out.exists()


def test_missing_column_gives_descriptive_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("technique,n,value\nlps,1,0.5\n")
    with pytest.raises(FigureDataError, match="lacks columns"):
        render(FigureSpec(kind="biasvar", inputs=[str(bad)], out=str(tmp_path / "x.png")))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(FigureDataError):
        render(FigureSpec(kind="pie", inputs=["x"], out=str(tmp_path / "x.png")))


def test_rendering_is_idempotent_and_nondestructive(tmp_path):
    src = tmp_path / "inputs"
    src.mkdir()
    csv_copy = src / "biasvar.csv"
    shutil.copy(DATA / "biasvar.csv", csv_copy)
    before = csv_copy.read_bytes()
    out = tmp_path / "bv.png"
    render(FigureSpec(kind="biasvar", inputs=[str(csv_copy)], out=str(out)))
    first = out.read_bytes()
    render(FigureSpec(kind="biasvar", inputs=[str(csv_copy)], out=str(out)))
    assert csv_copy.read_bytes() == before
    assert out.read_bytes() == first  # deterministic overwrite


def test_cli_renders_and_reports(tmp_path, capsys):
    out = tmp_path / "cli.png"
    code = fig_main(["biasvar", "--in", str(DATA / "biasvar.csv"), "--out", str(out)])
    assert code == 0
    assert out.exists()
    printed = capsys.readouterr().out
    assert "lines=6" in printed and "wrote" in printed


def test_cli_error_exit_code(tmp_path, capsys):
    code = fig_main(["spectra", "--in", str(tmp_path / "missing.csv"),
                     "--out", str(tmp_path / "x.png")])
    assert code == 1
    assert "error:" in capsys.readouterr().err
