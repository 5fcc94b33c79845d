"""Matplotlib renderings written next to the textual reports."""

from __future__ import annotations

import math
import os
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .algebra import KeyReport
from .morse import MorseModel, SolverSettings, _EdgeField, _rk4
from .trees import ContractionPoset, stratum_params


def _save(fig, directory: str, name: str) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def poset_figure(poset: ContractionPoset, directory: str) -> str:
    """Hasse diagram of the contraction order, graded by internal edges."""
    ranks = [stratum_params(t) for t in poset.trees]
    by_rank: dict[int, list[int]] = {}
    for i, r in enumerate(ranks):
        by_rank.setdefault(r, []).append(i)
    pos = {}
    for r, members in by_rank.items():
        for j, i in enumerate(members):
            pos[i] = (j - (len(members) - 1) / 2.0, r)
    fig, ax = plt.subplots(figsize=(8, 1.2 + 1.6 * max(ranks, default=0)))
    for i, j in sorted(poset.covers):
        (x1, y1), (x2, y2) = pos[i], pos[j]
        ax.plot([x1, x2], [y1, y2], color="0.6", lw=0.8, zorder=1)
    for i, t in enumerate(poset.trees):
        x, y = pos[i]
        ax.scatter([x], [y], s=140, color="#2b6cb0", zorder=2)
        ax.annotate(t.canonical(), (x, y), textcoords="offset points",
                    xytext=(0, 9), ha="center", fontsize=7)
    ax.set_yticks(sorted(by_rank))
    ax.set_ylabel("internal edges")
    ax.set_xticks([])
    ax.set_title(f"contraction poset, {poset.trees[0].num_external} external vertices")
    n = poset.trees[0].num_external
    return _save(fig, directory, f"tree_poset_{n}.png")


def morse_figure(model: MorseModel, directory: str,
                 settings: Optional[SolverSettings] = None) -> str:
    """Fundamental domain with the negative gradient field, critical points
    and a few integrated flow lines."""
    settings = settings or SolverSettings()
    fig, ax = plt.subplots(figsize=(6, 6 if model.dim == 2 else 3))
    field = _EdgeField(model, None, settings)
    if model.dim == 2:
        g = np.linspace(0, 2 * math.pi, 18)
        xx, yy = np.meshgrid(g, g)
        pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
        vec = field(pts, np.zeros((len(pts), 1)))
        ax.quiver(pts[:, 0], pts[:, 1], vec[:, 0], vec[:, 1],
                  color="0.75", width=0.003)
        rng = np.random.default_rng(0)
        starts = rng.uniform(0.3, 2 * math.pi - 0.3, size=(14, 2))
        for p0 in starts:
            path = [p0]
            p = p0[None, :]
            for _ in range(40):
                p = _rk4(field, p, 0.0, 0.25, 6)
                path.append(p[0].copy())
            path = np.array(path)
            jumps = np.abs(np.diff(path % (2 * math.pi), axis=0)).max(axis=1) > math.pi
            path = path % (2 * math.pi)
            segments = np.split(path, np.where(jumps)[0] + 1)
            for seg in segments:
                if len(seg) > 1:
                    ax.plot(seg[:, 0], seg[:, 1], color="#2b6cb0", lw=0.8)
        for c in model.criticals:
            x, y = c.coords
            ax.scatter([x % (2 * math.pi)], [y % (2 * math.pi)], s=60,
                       color="#c53030", zorder=3)
            ax.annotate(f"{c.name} (ind {c.index})", (x % (2 * math.pi),
                                                      y % (2 * math.pi)),
                        textcoords="offset points", xytext=(6, 6), fontsize=8)
        ax.set_xlim(0, 2 * math.pi)
        ax.set_ylim(0, 2 * math.pi)
    else:
        thetas = np.linspace(0, 2 * math.pi, 300)
        ax.plot(thetas, np.cos(thetas), color="#2b6cb0")
        for c in model.criticals:
            ax.scatter([c.coords[0] % (2 * math.pi)],
                       [math.cos(c.coords[0])], s=60, color="#c53030", zorder=3)
            ax.annotate(f"{c.name} (ind {c.index})",
                        (c.coords[0] % (2 * math.pi), math.cos(c.coords[0])),
                        textcoords="offset points", xytext=(6, 6), fontsize=8)
        ax.set_xlabel("angle")
        ax.set_ylabel("height")
    ax.set_title(f"{model.name}: negative gradient flow")
    return _save(fig, directory, f"morse_flow_{model.name}.png")


def report_figure(reports: Sequence[KeyReport], directory: str) -> str:
    """Per-relation status strip: ok / defect / skipped."""
    colors = {"ok": "#2f855a", "defect": "#c53030", "skipped": "#b7791f"}
    fig, ax = plt.subplots(figsize=(max(4.0, 0.42 * len(reports)), 2.4))
    for i, r in enumerate(reports):
        ax.bar(i, 1.0, color=colors[r.status], width=0.85)
        ax.annotate(f"k={r.k}\n{r.beta.ident}", (i, 0.5), ha="center",
                    va="center", fontsize=7, color="white")
    ax.set_xticks([])
    ax.set_yticks([])
    counts = {s: sum(1 for r in reports if r.status == s) for s in colors}
    ax.set_title(
        f"relations: {counts['ok']} ok, {counts['defect']} defects, "
        f"{counts['skipped']} skipped"
    )
    return _save(fig, directory, "verify_report.png")
