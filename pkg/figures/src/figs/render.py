"""Figure rendering from experiment CSV/codebook files.

Five figure kinds are supported:

- ``scatter``      3-D scatter of a single-antenna codebook (origin-symmetric
                   pairs show the line structure of each codeword).
- ``nmse-bars``    per-codebook estimation error at one SNR, as bars.
- ``iprod-hist``   histograms of detection inner products.
- ``nmse-curves``  estimation error vs SNR; a curve labeled ``training``
                   doubles as the analytic floor reference.
- ``rate-curves``  total slot rate vs SNR with crossing annotations against
                   the curve labeled ``training``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from figs.io import (  # noqa: E402
    FigureInputError,
    read_codebook,
    read_sweep_csv,
    require_same_grid,
)

KINDS = ("scatter", "nmse-bars", "iprod-hist", "nmse-curves", "rate-curves")

_FIGSIZE = (6.4, 4.8)
_DPI = 120


@dataclass(frozen=True)
class FigureSpec:
    """One figure: labeled input files, a kind tag, and an output path."""

    kind: str
    inputs: tuple[tuple[str, Path], ...]
    out: Path
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureInputError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise FigureInputError("a figure needs at least one input file")


def compute_crossing(snr_db: np.ndarray, advantage: np.ndarray) -> float | None:
    """First upward sign change of ``advantage``, linearly interpolated.

    Matches how a reader extracts a crossing SNR from two plotted curves.
    Returns None when the advantage never changes sign upward.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    advantage = np.asarray(advantage, dtype=float)
    for k in range(1, len(snr_db)):
        lo, hi = advantage[k - 1], advantage[k]
        if lo < 0.0 <= hi:
            frac = -lo / (hi - lo)
            return float(snr_db[k - 1] + frac * (snr_db[k] - snr_db[k - 1]))
    return None


def _new_axes(spec: FigureSpec, projection=None):
    fig = plt.figure(figsize=_FIGSIZE, dpi=_DPI)
    ax = fig.add_subplot(111, projection=projection)
    if spec.xlim is not None:
        ax.set_xlim(*spec.xlim)
    if spec.ylim is not None:
        ax.set_ylim(*spec.ylim)
    return fig, ax


def _save(fig, spec: FigureSpec) -> Path:
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format=out.suffix.lstrip(".") or "png",
                metadata={"Software": "dcrs-figures"})
    plt.close(fig)
    return out


def _render_scatter(spec: FigureSpec) -> Path:
    label, path = spec.inputs[0]
    cb = read_codebook(path)
    if int(cb["M"]) != 1 or int(cb["T"]) != 3:
        raise FigureInputError(
            "the 3-D scatter needs a single-antenna codebook with three "
            f"symbol slots, got T={cb['T']} M={cb['M']}"
        )
    pts = cb["points"].reshape(len(cb["points"]), 3)
    # Fix the arbitrary per-codeword phase so the first coordinate is real
    # and non-negative, then embed each line into R^3 as +/- a real triple.
    phase = np.exp(-1j * np.angle(pts[:, 0]))
    pts = pts * phase[:, None]
    emb = np.column_stack([pts[:, 0].real, pts[:, 1].real, pts[:, 1].imag])
    fig, ax = _new_axes(spec, projection="3d")
    for sign, marker in ((1.0, "o"), (-1.0, "^")):
        ax.scatter(sign * emb[:, 0], sign * emb[:, 1], sign * emb[:, 2],
                   s=8, marker=marker, depthshade=False)
    ax.set_title(f"{label}: {len(pts)} codewords (origin-symmetric pairs)")
    return _save(fig, spec)


def _render_nmse_bars(spec: FigureSpec) -> Path:
    snr_db = spec.extra.get("snr_db")
    labels, values = [], []
    floor = None
    for label, path in spec.inputs:
        _, rows = read_sweep_csv(path)
        if snr_db is not None:
            rows = [r for r in rows if float(r["snr_db"]) == float(snr_db)]
            if not rows:
                raise FigureInputError(
                    f"{path} has no row at snr_db={snr_db}"
                )
        if label == "training":
            floor = float(rows[0]["nmse_db"])
            continue
        labels.append(label)
        values.append(float(rows[0]["nmse_db"]))
    fig, ax = _new_axes(spec)
    ax.bar(labels, values)
    if floor is not None:
        ax.axhline(floor, linestyle="--", color="k",
                   label="training (analytic floor)")
        ax.legend()
    ax.set_ylabel("estimation error [dB]")
    title_snr = f" at {snr_db:g} dB" if snr_db is not None else ""
    ax.set_title(f"channel estimation error{title_snr}")
    return _save(fig, spec)


def _render_iprod_hist(spec: FigureSpec) -> Path:
    fig, ax = _new_axes(spec)
    bins = np.linspace(-1.0, 1.0, int(spec.extra.get("bins", 50)) + 1)
    for label, path in spec.inputs:
        _, rows = read_sweep_csv(path)
        vals = np.array([float(r["inner_product"]) for r in rows])
        ax.hist(vals, bins=bins, density=True, histtype="step", label=label)
    ax.set_xlabel("detected/true inner product magnitude")
    ax.set_ylabel("density")
    ax.legend()
    return _save(fig, spec)


def _render_nmse_curves(spec: FigureSpec) -> Path:
    fig, ax = _new_axes(spec)
    for label, path in spec.inputs:
        _, rows = read_sweep_csv(path)
        rows = sorted(rows, key=lambda r: float(r["snr_db"]))
        snr = [float(r["snr_db"]) for r in rows]
        nmse = [float(r["nmse_db"]) for r in rows]
        style = {"linestyle": "--", "color": "k"} if label == "training" \
            else {"marker": "o", "markersize": 3}
        ax.plot(snr, nmse, label=label, **style)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("estimation error [dB]")
    ax.legend()
    return _save(fig, spec)


def _total_series(rows: list[dict]) -> tuple[np.ndarray, np.ndarray]:
    tot = [r for r in rows if r.get("rate_kind") == "total"]
    if not tot:
        raise FigureInputError(
            "rate-curves inputs must be 'total' sweeps (no total rows found)"
        )
    tot = sorted(tot, key=lambda r: float(r["snr_db"]))
    return (np.array([float(r["snr_db"]) for r in tot]),
            np.array([float(r["mean"]) for r in tot]))


def _render_rate_curves(spec: FigureSpec) -> dict:
    series = {}
    labeled_rows = []
    for label, path in spec.inputs:
        _, rows = read_sweep_csv(path)
        tot = [r for r in rows if r.get("rate_kind") == "total"]
        labeled_rows.append((label, tot))
        series[label] = _total_series(rows)
    if "training" not in series:
        raise FigureInputError(
            "rate-curves needs one input labeled 'training' as the baseline"
        )
    require_same_grid(labeled_rows)
    snr, base = series["training"]
    fig, ax = _new_axes(spec)
    crossings: dict[str, float | None] = {}
    for label, (s, vals) in series.items():
        style = {"linestyle": "--", "color": "k"} if label == "training" \
            else {"marker": "o", "markersize": 3}
        ax.plot(s, vals, label=label, **style)
        if label == "training":
            continue
        cross = compute_crossing(snr, vals - base)
        crossings[label] = cross
        if cross is not None:
            ax.axvline(cross, linestyle=":", linewidth=0.8)
            ax.annotate(f"{cross:.1f} dB", (cross, float(np.interp(
                cross, snr, vals))), textcoords="offset points",
                xytext=(4, -10), fontsize=8)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("total rate [bit/frame]")
    ax.legend()
    _save(fig, spec)
    return crossings


def render(spec: FigureSpec):
    """Render one figure; returns the output path (rate-curves additionally
    returns the per-label crossing SNRs)."""
    if spec.kind == "scatter":
        return _render_scatter(spec)
    if spec.kind == "nmse-bars":
        return _render_nmse_bars(spec)
    if spec.kind == "iprod-hist":
        return _render_iprod_hist(spec)
    if spec.kind == "nmse-curves":
        return _render_nmse_curves(spec)
    return _render_rate_curves(spec)
