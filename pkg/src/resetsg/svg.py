"""Minimal deterministic SVG writer for complex-plane figures."""

from __future__ import annotations

from xml.sax.saxutils import quoteattr

import numpy as np


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class SvgCanvas:
    """Canvas whose user coordinates are the complex plane (imaginary axis up)."""

    def __init__(self, window, width: int = 600):
        self.window = window
        self.width = width
        w = window.xmax - window.xmin
        h = window.ymax - window.ymin
        self.height = int(round(width * h / w))
        self._defs: list[str] = []
        self._items: list[str] = []
        self._hatch = False
        self._comments: list[str] = []

    def comment(self, text: str) -> None:
        self._comments.append(text.replace("--", "- -"))

    def _pts(self, z) -> str:
        z = np.asarray(z, dtype=complex)
        # flip y so that positive imaginary parts point up
        return " ".join(f"{_fmt(p.real)},{_fmt(-p.imag)}" for p in z)

    def path(self, loops, fill="none", stroke="black", fill_rule="nonzero", hatch=False, width=0.004):
        if not loops:
            return
        d = " ".join(f"M {self._pts(loop)} Z" for loop in loops if len(loop) > 1)
        if hatch:
            self._add_hatch()
            fill = "url(#hatch)"
        self._items.append(
            f"<path d={quoteattr(d)} fill={quoteattr(fill)} fill-rule={quoteattr(fill_rule)} "
            f"stroke={quoteattr(stroke)} stroke-width=\"{_fmt(width)}\"/>"
        )

    def polyline(self, z, stroke="black", width=0.004):
        self._items.append(
            f"<polyline points={quoteattr(self._pts(z))} fill=\"none\" stroke={quoteattr(stroke)} "
            f"stroke-width=\"{_fmt(width)}\"/>"
        )

    def points(self, z, radius=0.006, fill="black"):
        for p in np.asarray(z, dtype=complex).ravel():
            self._items.append(
                f"<circle cx=\"{_fmt(p.real)}\" cy=\"{_fmt(-p.imag)}\" r=\"{_fmt(radius)}\" fill={quoteattr(fill)}/>"
            )

    def _add_hatch(self):
        if self._hatch:
            return
        self._hatch = True
        s = 0.03 * (self.window.xmax - self.window.xmin)
        self._defs.append(
            f"<pattern id=\"hatch\" patternUnits=\"userSpaceOnUse\" width=\"{_fmt(s)}\" height=\"{_fmt(s)}\" "
            f"patternTransform=\"rotate(45)\"><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"{_fmt(s)}\" "
            f"stroke=\"black\" stroke-width=\"{_fmt(s / 6)}\"/></pattern>"
        )

    def to_string(self) -> str:
        win = self.window
        vb = f"{_fmt(win.xmin)} {_fmt(-win.ymax)} {_fmt(win.xmax - win.xmin)} {_fmt(win.ymax - win.ymin)}"
        parts = [
            f"<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{self.width}\" height=\"{self.height}\" viewBox=\"{vb}\">",
        ]
        parts += [f"<!-- {c} -->" for c in self._comments]
        if self._defs:
            parts.append("<defs>" + "".join(self._defs) + "</defs>")
        parts += self._items
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_string())
