"""Deterministic SVG figures for curves, benchmark overlays, and single traces.

Every figure renders byte-identically for identical inputs: fixed hash salt,
text kept as SVG text rather than font paths, and no timestamp metadata.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .model import PvCurve, gmpp_oracle, local_maxima
from .simloop import SimTrace

plt.rcParams["svg.hashsalt"] = "pvlab"
plt.rcParams["svg.fonttype"] = "none"

_CONTROLLER_COLORS = {
    "po": "#7f7f7f",
    "flc": "#1f77b4",
    "dzflc": "#2ca02c",
    "pso": "#9467bd",
    "dsa-pso": "#d62728",
    "hybrid": "#ff7f0e",
    "oracle": "#000000",
}

_PHASE_COLORS = {
    "FlcCoarse": "#c6dbef",
    "PsoSearch": "#fdd0a2",
    "FlcFine": "#c7e9c0",
}


def save_svg(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def curve_figure(curve: PvCurve, title: str):
    """I-V and P-V panels with the global peak and every local peak marked."""
    fig, (ax_iv, ax_pv) = plt.subplots(2, 1, figsize=(7.0, 7.0), sharex=True)
    ax_iv.plot(curve.v, curve.i, color="#1f77b4", lw=1.5)
    ax_iv.set_ylabel("current (A)")
    ax_iv.set_title(title)
    ax_iv.grid(True, alpha=0.3)

    ax_pv.plot(curve.v, curve.p, color="#2ca02c", lw=1.5)
    peaks = local_maxima(curve)
    gm = gmpp_oracle(curve)
    for op in peaks:
        ax_pv.plot([op.v], [op.p], "x", color="#d62728", ms=8)
    ax_pv.plot([gm.v], [gm.p], "o", mfc="none", mec="#d62728", ms=12)
    ax_pv.annotate(f"{gm.p:.1f} W", (gm.v, gm.p), textcoords="offset points",
                   xytext=(8, 8), fontsize=9)
    ax_pv.set_xlabel("voltage (V)")
    ax_pv.set_ylabel("power (W)")
    ax_pv.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def bench_figure(scenario: str, runs: list[tuple[str, np.ndarray, np.ndarray]],
                 p_oracle: float | None = None):
    """Power vs time, all controllers overlaid, for one scenario."""
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    for controller, t, p in runs:
        ax.plot(t, p, lw=1.2, label=controller,
                color=_CONTROLLER_COLORS.get(controller))
    if p_oracle is not None:
        ax.axhline(p_oracle, color="#000000", lw=0.8, ls="--", label="global peak")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("PV power (W)")
    ax.set_title(scenario)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return fig


def _phase_bands(t: np.ndarray, phases: list[str]):
    start = 0
    for k in range(1, len(phases) + 1):
        if k == len(phases) or phases[k] != phases[start]:
            yield phases[start], t[start], t[k - 1]
            start = k


def trace_figure(trace: SimTrace):
    """Power and duty vs time; hybrid phases rendered as shaded bands."""
    fig, (ax_p, ax_d) = plt.subplots(2, 1, figsize=(8.0, 6.0), sharex=True)
    if len(set(trace.phase)) > 1:
        for phase, t0, t1 in _phase_bands(trace.t, trace.phase):
            color = _PHASE_COLORS.get(phase)
            if color:
                ax_p.axvspan(t0, t1, color=color, alpha=0.5, lw=0)
    ax_p.plot(trace.t, trace.p_pv, color="#2ca02c", lw=1.2, label="PV power")
    ax_p.plot(trace.t, trace.p_out, color="#9467bd", lw=1.0, label="load power")
    ax_p.plot(trace.t, trace.p_oracle, color="#000000", lw=0.8, ls="--",
              label="global peak")
    ax_p.set_ylabel("power (W)")
    ax_p.set_title(f"{trace.controller} on {trace.scenario}")
    ax_p.grid(True, alpha=0.3)
    ax_p.legend(loc="lower right", fontsize=8)

    ax_d.plot(trace.t, trace.duty, color="#1f77b4", lw=1.2)
    ax_d.set_xlabel("time (s)")
    ax_d.set_ylabel("duty cycle")
    ax_d.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig
