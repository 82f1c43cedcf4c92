"""Figure rendering for the power-report path."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .permutation import PowerTable

__all__ = ["render_power_curves"]


def render_power_curves(
    table: PowerTable,
    path,
    alpha: float | None = None,
    title: str | None = None,
) -> None:
    """Render rejection-rate curves to an image file next to the CSV.

    If the kappa grid has more than one value, one curve per sample size is
    drawn against kappa; otherwise the single curve runs over n.
    """
    kappas = sorted({c.kappa for c in table.cells})
    ns = sorted({c.n for c in table.cells})
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if len(kappas) > 1:
        for n in ns:
            pts = [(c.kappa, c.rate) for c in table.cells if c.n == n]
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"n={n}")
        ax.set_xlabel(r"$\kappa$")
    else:
        for kappa in kappas:
            pts = [(c.n, c.rate) for c in table.cells if c.kappa == kappa]
            pts.sort()
            ax.plot(
                [p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"kappa={kappa:g}"
            )
        ax.set_xlabel("n")
    if alpha is not None:
        ax.axhline(alpha, color="black", linestyle="--", linewidth=0.8, label=f"alpha={alpha:g}")
    ax.set_ylabel("rejection rate")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
