"""Report figures.  Every function renders to a file and returns its path."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # a fixed creation date keeps repeated renders byte-identical
    fig.savefig(path, metadata={"CreationDate": None} if path.suffix == ".pdf" else {"Software": None})
    plt.close(fig)
    return path


def census_figure(rows, path, title: str = "") -> Path:
    """Observed cumulative count against the heuristic prediction, log-log."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        b = [r.bound for r in rows]
        ax.loglog(b, [max(r.count, 0.5) for r in rows], "o-", ms=3, label="observed")
        ax.loglog(b, [r.predicted for r in rows], "--", label="limit^(1 - sigma)")
        ax.set_xlabel("bound")
        ax.set_ylabel("qualifying n up to bound")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def construction_figure(report, path) -> Path:
    """Block multipliers (Sharp blocks filled, Flat blocks hollow) and the digit profile of n."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 5.2))
        d = np.arange(1, len(report.multipliers))
        mult = np.array(report.multipliers[1:], dtype=float)
        sharp = np.array([s == "Sharp" for s in report.ledger])
        ax1.semilogy(d[sharp], mult[sharp], "o", ms=3, label="Sharp")
        if (~sharp).any():
            ax1.plot(d[~sharp], np.ones((~sharp).sum()), "o", mfc="none", ms=4, label="Flat")
        ax1.set_xlabel("block d")
        ax1.set_ylabel("multiplier n_d")
        ax1.legend()
        for p in report.primes:
            n, digits = report.n, []
            while n:
                n, r = divmod(n, p)
                digits.append(r / p)
            ax2.plot(digits, ".", ms=3, label=f"base {p}")
        ax2.axhline(1 / 3, color="k", lw=0.8, ls=":")
        ax2.set_xlabel("digit position")
        ax2.set_ylabel("digit / p")
        ax2.legend()
        return _save(fig, path)


def orbit_figure(sample, path, weyl: Sequence[tuple[str, float]] = ()) -> Path:
    """Scatter of the first two orbit coordinates (or a histogram for r = 1), plus Weyl magnitudes."""
    with plt.rc_context(STYLE):
        ncols = 2 if weyl else 1
        fig, axes = plt.subplots(1, ncols, figsize=(6.4 if ncols == 1 else 9.6, 4.0))
        axes = np.atleast_1d(axes)
        v = sample.vectors
        if v.shape[1] >= 2:
            axes[0].plot(v[:, 0], v[:, 1], ",", alpha=0.5)
            axes[0].set_xlabel("coordinate 1")
            axes[0].set_ylabel("coordinate 2")
        else:
            axes[0].hist(v[:, 0], bins=50)
            axes[0].set_xlabel("fractional part")
        if weyl:
            labels, mags = zip(*weyl)
            axes[1].bar(range(len(mags)), mags)
            axes[1].set_xticks(range(len(mags)), labels, rotation=60, fontsize=7)
            axes[1].set_ylabel("|Weyl sum| / N")
        return _save(fig, path)


def fourier_figure(inst, path, exceptional=None) -> Path:
    """Transform magnitudes per coordinate and the discretised curve with exceptional cells marked."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 4.0))
        s = np.arange(inst.P)
        for j, t in enumerate(inst.transforms):
            ax1.semilogy(s, np.maximum(np.abs(t), 1e-3), lw=0.6, label=f"A_{j + 1}")
        ax1.axhline(inst.q_threshold ** (1 / inst.r), color="k", ls=":", lw=0.8)
        ax1.set_xlabel("frequency s")
        ax1.set_ylabel("|transform|")
        ax1.legend()
        F = inst.F
        if inst.r >= 2:
            ax2.plot(F[:, 0], F[:, 1], ".", ms=2, label="F")
            if exceptional is not None and exceptional.any():
                ax2.plot(F[exceptional, 0], F[exceptional, 1], "x", ms=5, label="E")
            ax2.set_xlabel("x_1")
            ax2.set_ylabel("x_2")
        else:
            ax2.plot(F[:, 0], np.zeros(len(F)), "|", ms=8, label="F")
            if exceptional is not None and exceptional.any():
                ax2.plot(F[exceptional, 0], np.zeros(exceptional.sum()), "x", label="E")
            ax2.set_xlabel("x_1")
        ax2.legend()
        return _save(fig, path)


def tightness_figure(rows, path) -> Path:
    """max |H(v_j)| / Delta**(r-1) against Delta; rows are (r, delta, ratio)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for r in sorted({row[0] for row in rows}):
            pts = sorted((d, q) for rr, d, q in rows if rr == r)
            ax.semilogx([p[0] for p in pts], [p[1] for p in pts], "o-", ms=3, label=f"r = {r}")
            ax.axhline(2 ** (r * (r - 1)), ls=":", lw=0.8)
        ax.set_xlabel("Delta")
        ax.set_ylabel("max |H(v_j)| / Delta^(r-1)")
        ax.legend()
        return _save(fig, path)
