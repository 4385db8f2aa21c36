"""Deterministic SVG rendering of scenes, paths, samples and planner traces.

Only the first two workspace axes are drawn; 3D scenes show their x-y
projection. Every path segment is one ``<line>`` element and nothing else
uses ``<line>``, so segment counts can be read back from the file.
"""
from __future__ import annotations

import numpy as np

PALETTE = {
    "background": "#ffffff",
    "border": "#404040",
    "obstacle": "#9e9e9e",
    "cloud": "#212121",
    "paths": ("#1565c0", "#c62828", "#2e7d32", "#ef6c00", "#6a1b9a"),
    "samples": "#00897b",
    "trace_init": "#1e88e5",
    "trace_goal": "#e53935",
    "start": "#43a047",
    "goal": "#fb8c00",
}


def _f(x: float) -> str:
    s = "%.3f" % x
    return "0.000" if s == "-0.000" else s


def render_svg(scene, paths=(), samples=None, trace=None, size: int = 600, title: str | None = None,
               comment: str | None = None) -> str:
    """Return the SVG document as a string.

    ``paths`` holds ``(L, d)`` configuration arrays (their first two
    coordinates are drawn), ``samples`` an ``(n, d)`` scatter and ``trace``
    the per-iteration dicts written by the bidirectional planner.
    """
    lo = scene.workspace.lo[:2]
    hi = scene.workspace.hi[:2]
    scale = size / float(np.max(hi - lo))
    width = (hi[0] - lo[0]) * scale
    height = (hi[1] - lo[1]) * scale

    def px(p):
        return (p[0] - lo[0]) * scale, (hi[1] - p[1]) * scale

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           '<svg xmlns="http://www.w3.org/2000/svg" width="%s" height="%s" viewBox="0 0 %s %s">'
           % (_f(width), _f(height), _f(width), _f(height))]
    if comment:
        out.append("<!-- %s -->" % comment.replace("--", "- -"))
    if title:
        out.append("<title>%s</title>" % (title.replace("&", "&amp;").replace("<", "&lt;")))
    out.append('<rect x="0" y="0" width="%s" height="%s" fill="%s" stroke="%s"/>'
               % (_f(width), _f(height), PALETTE["background"], PALETTE["border"]))
    for ob in scene.obstacles:
        x0, y0 = px([ob.lo[0], ob.hi[1]])
        out.append('<rect x="%s" y="%s" width="%s" height="%s" fill="%s"/>'
                   % (_f(x0), _f(y0), _f((ob.hi[0] - ob.lo[0]) * scale), _f((ob.hi[1] - ob.lo[1]) * scale),
                      PALETTE["obstacle"]))
    for p in scene.cloud:
        x, y = px(p)
        out.append('<circle cx="%s" cy="%s" r="1" fill="%s"/>' % (_f(x), _f(y), PALETTE["cloud"]))
    if samples is not None:
        for p in np.atleast_2d(samples):
            x, y = px(p)
            out.append('<circle cx="%s" cy="%s" r="2" fill="%s" fill-opacity="0.5"/>'
                       % (_f(x), _f(y), PALETTE["samples"]))
    if trace:
        for rec in trace:
            x, y = px(rec["candidate"])
            color = PALETTE["trace_init"] if rec["side"] == "init" else PALETTE["trace_goal"]
            fill = color if rec["steer"] else "none"
            out.append('<circle cx="%s" cy="%s" r="3" fill="%s" stroke="%s"/>' % (_f(x), _f(y), fill, color))
    for k, path in enumerate(paths):
        path = np.atleast_2d(np.asarray(path, dtype=np.float64))
        color = PALETTE["paths"][k % len(PALETTE["paths"])]
        for i in range(len(path) - 1):
            x1, y1 = px(path[i])
            x2, y2 = px(path[i + 1])
            out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="%s" stroke-width="2"/>'
                       % (_f(x1), _f(y1), _f(x2), _f(y2), color))
        if len(path):
            for p, key in ((path[0], "start"), (path[-1], "goal")):
                x, y = px(p)
                out.append('<circle cx="%s" cy="%s" r="4" fill="%s"/>' % (_f(x), _f(y), PALETTE[key]))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
