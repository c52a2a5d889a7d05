"""Render nlh CSV series into byte-stable figures.

Three plot kinds cover the documented CSV schemas:

  decay-loglog     one value column against t on log-log axes, with an
                   optional power-law guide line anchored at the first point;
  envelope-overlay a measured column and its envelope column on shared axes,
                   with violation regions (measured above envelope) shaded
                   (expected empty on passing runs) and counted in the sidecar;
  profile          a value column against its abscissa on log-log axes.

No computation happens here beyond axis transforms and the measured>envelope
flag; the science stays in the producing package.  Output is deterministic:
fixed style, fixed SVG hash salt, no timestamps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

KINDS = ("decay-loglog", "envelope-overlay", "profile")

_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "plotkit",
    "path.simplify": False,
}


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    input: Path
    output: Path
    value_column: str
    x_column: str = "t"
    envelope_column: str = "envelope"
    guide_slope: float | None = None
    xlabel: str = "t"
    ylabel: str = "value"
    title: str = ""

    @staticmethod
    def from_dict(doc: dict, base: Path | None = None) -> "PlotSpec":
        kind = doc.get("kind")
        if kind not in KINDS:
            raise RenderError(f"kind must be one of {KINDS}, got {kind!r}")
        for key in ("input", "output", "value_column"):
            if key not in doc:
                raise RenderError(f"plot spec is missing {key!r}")
        base = base or Path(".")
        inp = Path(doc["input"])
        out = Path(doc["output"])
        return PlotSpec(
            kind=kind,
            input=inp if inp.is_absolute() else base / inp,
            output=out if out.is_absolute() else base / out,
            value_column=doc["value_column"],
            x_column=doc.get("x_column", "t"),
            envelope_column=doc.get("envelope_column", "envelope"),
            guide_slope=doc.get("guide_slope"),
            xlabel=doc.get("xlabel", doc.get("x_column", "t")),
            ylabel=doc.get("ylabel", doc["value_column"]),
            title=doc.get("title", ""),
        )


def read_columns(path: Path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0]:
        raise RenderError(f"empty CSV: {path}")
    names = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    if not rows:
        raise RenderError(f"CSV has no data rows: {path}")
    return {k: np.array([float(r[j]) for r in rows]) for j, k in enumerate(names)}


def _need(cols: dict, name: str, path: Path) -> np.ndarray:
    if name not in cols:
        raise RenderError(f"column {name!r} not found in {path} "
                          f"(have {sorted(cols)})")
    return cols[name]


@dataclass(frozen=True)
class RenderResult:
    png: Path
    svg: Path
    sidecar: Path | None
    violation_points: int = 0


def render(spec: PlotSpec) -> RenderResult:
    """Render the figure (PNG and SVG) plus a violation sidecar for overlays."""
    cols = read_columns(spec.input)
    x = _need(cols, spec.x_column, spec.input)
    y = _need(cols, spec.value_column, spec.input)

    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        violations = 0
        sidecar = None
        if spec.kind == "decay-loglog":
            ax.loglog(x, y, marker="o", markersize=3, lw=1.2, label=spec.value_column)
            if spec.guide_slope is not None:
                pos = x > 0
                anchor = int(np.argmax(pos))
                guide = y[anchor] * (x[pos] / x[anchor]) ** spec.guide_slope
                ax.loglog(x[pos], guide, "--", lw=1.0, color="gray",
                          label=f"slope {spec.guide_slope:g}")
            ax.legend(loc="best")
        elif spec.kind == "envelope-overlay":
            env = _need(cols, spec.envelope_column, spec.input)
            ax.plot(x, y, marker="o", markersize=3, lw=1.2, label=spec.value_column)
            ax.plot(x, env, "--", lw=1.2, color="black", label=spec.envelope_column)
            # roundoff guard: envelopes are allowed to touch the measured curve
            bad = y > env * (1.0 + 1e-12)
            violations = int(bad.sum())
            for lo, hi in _spans(x, bad):
                ax.axvspan(lo, hi, color="red", alpha=0.25, lw=0)
            ax.set_yscale("log")
            ax.set_xscale("log" if np.all(x > 0) and x.max() / max(x.min(), 1e-300) > 30
                          else "linear")
            ax.legend(loc="best")
        elif spec.kind == "profile":
            ax.loglog(x, y, marker="s", markersize=3, lw=1.2, label=spec.value_column)
            ax.legend(loc="best")
        ax.set_xlabel(spec.xlabel)
        ax.set_ylabel(spec.ylabel)
        if spec.title:
            ax.set_title(spec.title)

        spec.output.parent.mkdir(parents=True, exist_ok=True)
        stem = spec.output.with_suffix("")
        png = stem.with_suffix(".png")
        svg = stem.with_suffix(".svg")
        fig.savefig(png, metadata={"Software": "plotkit"})
        fig.savefig(svg, metadata={"Date": None})
        plt.close(fig)

    if spec.kind == "envelope-overlay":
        sidecar = stem.parent / (stem.name + ".violations.json")
        sidecar.write_text(json.dumps(
            {"violation_points": violations, "total_points": int(len(x))},
            sort_keys=True) + "\n")
    return RenderResult(png=png, svg=svg, sidecar=sidecar, violation_points=violations)


def _spans(x: np.ndarray, mask: np.ndarray):
    """Contiguous index runs of mask, as (x_lo, x_hi) spans."""
    spans = []
    run = None
    for i, flag in enumerate(mask):
        if flag and run is None:
            run = i
        elif not flag and run is not None:
            spans.append((x[run], x[i - 1]))
            run = None
    if run is not None:
        spans.append((x[run], x[-1]))
    return spans


def render_file(spec_path, base: Path | None = None) -> list[RenderResult]:
    """Render one spec document (a single spec or a list of specs)."""
    spec_path = Path(spec_path)
    doc = json.loads(spec_path.read_text())
    base = base or spec_path.parent
    docs = doc if isinstance(doc, list) else [doc]
    return [render(PlotSpec.from_dict(d, base=base)) for d in docs]
