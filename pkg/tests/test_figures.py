import pytest

from dynmod.figures import FIGURES, FigureError, figure_ids, slice_figure
from dynmod.sim import COLUMNS


def test_figure_ids_are_numeric_order():
    ids = figure_ids()
    assert ids[0] == "fig3" and ids[-1] == "fig25"
    assert "fig23" not in ids and len(ids) == 22


def test_every_figure_reads_existing_columns():
    for fid, spec in FIGURES.items():
        for i in (1, 2, 3):
            assert f"{spec.stem}{i}" in COLUMNS, fid


def test_slice_is_verbatim():
    text = ",".join(COLUMNS) + "\n" + ",".join(f"{i}.125e-3" for i in range(len(COLUMNS))) + "\n"
    out = slice_figure(text, "fig22")
    head, row = out.splitlines()
    assert head == "t,qc_qr1,qc_qr2,qc_qr3"
    i = COLUMNS.index("qc_qr1")
    assert row == f"0.125e-3,{i}.125e-3,{i + 1}.125e-3,{i + 2}.125e-3"


def test_header_only_csv():
    assert slice_figure(",".join(COLUMNS) + "\n", "fig3") == "t,dx1,dx2,dx3\n"


def test_errors():
    with pytest.raises(FigureError, match="valid ids"):
        slice_figure("t\n", "fig23")
    with pytest.raises(FigureError, match="empty"):
        slice_figure("", "fig3")
    with pytest.raises(FigureError, match="lacks"):
        slice_figure("t,q1\n0,0\n", "fig3")
