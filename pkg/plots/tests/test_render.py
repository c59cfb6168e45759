import hashlib
import json
from pathlib import Path

import pytest

from fpf_plots import FigureSpec, SchemaError, render
from fpf_plots.cli import main
from fpf_plots.render import fit_loglog

DATA = Path(__file__).resolve().parent / "data"

GOLDEN = {
    "gain-overlay": DATA / "gain" / "gain.csv",
    "poc-rate": DATA / "poc" / "poc.csv",
    "bounds": DATA / "bounds" / "bounds.csv",
    "tracking": DATA / "tracking" / "filter.csv",
}


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@pytest.mark.parametrize("figure", sorted(GOLDEN))
def test_golden_renders_and_leaves_input_unmodified(figure, tmp_path):
    src = GOLDEN[figure]
    before = sha(src)
    out = tmp_path / f"{figure}.png"
    meta = render(FigureSpec(figure=figure, inputs=(src,), output=str(out)))
    assert out.exists() and out.stat().st_size > 0
    assert sha(src) == before
    assert meta["figure"] == figure


def test_poc_annotation_matches_producer_regression(tmp_path):
    # the producer writes its own fitted slope next to the CSV; the figure
    # annotation must agree with it to two decimals
    report = json.loads((DATA / "poc" / "report.json").read_text())
    out = tmp_path / "poc.png"
    meta = render(FigureSpec(figure="poc-rate", inputs=(GOLDEN["poc-rate"],),
                             output=str(out)))
    assert f"{meta['slope']:.2f}" == f"{report['slope']:.2f}"
    assert f"{meta['r2']:.2f}" == f"{report['r2']:.2f}"


def test_poc_synthetic_exact_rate(tmp_path):
    rows = ["N,rep,sup_D,zeta_hat"]
    for n in (25, 50, 100, 200):
        rows.append(f"{n},0,{3.0 / n!r},1.0")
    src = tmp_path / "poc.csv"
    src.write_text("\n".join(rows) + "\n")
    meta = render(FigureSpec(figure="poc-rate", inputs=(src,),
                             output=str(tmp_path / "poc.png")))
    assert f"{meta['slope']:.2f}" == "-1.00"
    assert meta["r2"] == pytest.approx(1.0, abs=1e-12)


def test_fit_loglog_exact():
    slope, intercept, r2 = fit_loglog([10, 20, 40], [5.0 / 10, 5.0 / 20, 5.0 / 40])
    assert slope == pytest.approx(-1.0, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_missing_column_names_the_column(tmp_path):
    src = tmp_path / "poc.csv"
    src.write_text("N,rep,zeta_hat\n10,0,1.0\n")
    with pytest.raises(SchemaError) as exc:
        render(FigureSpec(figure="poc-rate", inputs=(src,),
                          output=str(tmp_path / "x.png")))
    assert "sup_D" in str(exc.value)


def test_unknown_figure_id():
    with pytest.raises(SchemaError):
        FigureSpec(figure="heatmap", inputs=("x.csv",), output="x.png")


def test_cli_renders_all(tmp_path, capsys):
    spec = {"figures": [
        {"figure": fig, "inputs": [str(path)], "output": str(tmp_path / f"{fig}.png")}
        for fig, path in GOLDEN.items()
    ]}
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    assert main(["--spec", str(spec_path)]) == 0
    for fig in GOLDEN:
        assert (tmp_path / f"{fig}.png").stat().st_size > 0


def test_cli_schema_mismatch_exits_2(tmp_path, capsys):
    bad = tmp_path / "gain.csv"
    bad.write_text("x_1,K_dm\n0.0,1.0\n")
    spec = {"figures": [{"figure": "gain-overlay", "inputs": [str(bad)],
                         "output": str(tmp_path / "g.png")}]}
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    assert main(["--spec", str(spec_path)]) == 2
    err = capsys.readouterr().err
    assert "K_exact" in err and "missing" in err
