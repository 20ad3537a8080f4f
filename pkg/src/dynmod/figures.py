"""Re-slice trajectory CSVs into the series each reproduced figure plots.

Values are copied as text, so a simulate/plotdata round trip never alters
a number. No rendering happens here; any plotting tool can read the output.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass


@dataclass(frozen=True)
class FigureSpec:
    stem: str
    labels: tuple
    title: str


def _spec(stem, label, title):
    return FigureSpec(stem, tuple(f"{label}{i}" for i in (1, 2, 3)), title)


def _group(first, space, scheme):
    err = "dx" if space == "task" else "dq"
    kind = "Task-space position errors" if space == "task" else "Joint position tracking errors"
    return {
        f"fig{first}": _spec("err", err, f"{kind} ({scheme})"),
        f"fig{first + 1}": _spec("w", "w", f"Scale parameter estimates ({scheme})"),
        f"fig{first + 2}": _spec("wI", "wI", f"Estimate of w_I ({scheme})"),
    }


FIGURES = {}
FIGURES.update(_group(3, "task", "filter-based regulation"))
FIGURES.update(_group(6, "task", "observer-based regulation"))
FIGURES.update(_group(9, "task", "observer-based tracking"))
FIGURES.update(_group(12, "joint", "direct adaptive"))
FIGURES.update(_group(15, "joint", "composite adaptive"))
FIGURES.update({
    "fig18": _spec("err", "dq", "Joint position tracking errors (flexible joints)"),
    "fig19": _spec("err", "dq", "Joint position tracking errors (reduced stiffness)"),
    "fig20": _spec("err", "dq", "Joint position tracking errors (increased stiffness)"),
    "fig21": _spec("err", "dq", "Joint position tracking errors (PID position servo)"),
    "fig22": _spec("qc_qr", "qc_qr", "q_c - q_r (PID position servo)"),
    "fig24": _spec("err", "dx", "Position tracking errors (adaptive outer loop)"),
    "fig25": _spec("err", "dx", "Position tracking errors (kinematic controller)"),
})


class FigureError(ValueError):
    pass


def figure_ids() -> list[str]:
    return sorted(FIGURES, key=lambda k: int(k[3:]))


def slice_figure(csv_text: str, figure_id: str) -> str:
    """CSV text with ``t`` and the figure's three series, values verbatim."""
    if figure_id not in FIGURES:
        raise FigureError(f"unknown figure id {figure_id!r}; valid ids: {', '.join(figure_ids())}")
    spec = FIGURES[figure_id]
    rows = list(csv.reader(io.StringIO(csv_text)))
    if not rows:
        raise FigureError("trajectory CSV is empty (no header)")
    header = rows[0]
    wanted = ["t"] + [f"{spec.stem}{i}" for i in (1, 2, 3)]
    missing = [c for c in wanted if c not in header]
    if missing:
        raise FigureError(f"trajectory CSV lacks columns {missing}")
    idx = [header.index(c) for c in wanted]
    out = io.StringIO()
    out.write(",".join(["t", *spec.labels]) + "\n")
    for row in rows[1:]:
        if row:
            out.write(",".join(row[i] for i in idx) + "\n")
    return out.getvalue()
