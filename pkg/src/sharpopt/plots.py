"""Matplotlib rendering of convergence traces.

Figures are written next to the delimited trace output by the experiment
runner; rendering is headless (Agg) so runs work without a display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

plt.rcParams.update({
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
})


def _series(trace, attr):
    xs, ys = [], []
    for rec in trace:
        val = getattr(rec, attr)
        if val is not None and val > 0:
            xs.append(rec.iteration)
            ys.append(val)
    return xs, ys


def convergence_figure(trace, solver: str, title: str = ""):
    """Semilog convergence plot for a solver trace.

    Triangle-method traces show the a-posteriori gap bound and, when the
    optimum is declared, the observed gap; subgradient traces show the
    squared distance to the solution set against its rate bound.
    """
    fig, ax = plt.subplots()
    if solver == "ast":
        ax.plot(*_series(trace, "bound"), label="gap bound", color="tab:blue")
        gaps_x, gaps_y = [], []
        for rec in trace:
            if rec.bound is not None and rec.certificate_residual is not None:
                gap = rec.bound - rec.certificate_residual
                if gap > 0:
                    gaps_x.append(rec.iteration)
                    gaps_y.append(gap)
        if gaps_x:
            ax.plot(gaps_x, gaps_y, label="observed gap", color="tab:orange")
        ax.set_ylabel("objective gap")
    else:
        ax.plot(*_series(trace, "distance_sq"), label="squared distance",
                color="tab:orange")
        for attr, label in (("product_bound", "product bound"),
                            ("geometric_bound", "geometric bound"),
                            ("inexact_bound", "inexact bound")):
            xs, ys = _series(trace, attr)
            if xs:
                ax.plot(xs, ys, label=label, linestyle="--")
        ax.set_ylabel("squared distance to solutions")
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    return fig


def save_figure(fig, path) -> None:
    fig.savefig(path)
    plt.close(fig)
