"""Artifact writers: CSV tables, two-column .dat files, manifests and figures."""

from __future__ import annotations

import json
import os
import platform
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, complex):
        return format(x.real, ".17g")
    s = str(x)
    return '"' + s.replace('"', '""') + '"' if ("," in s or '"' in s) else s


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence], config_hash: str = "") -> str:
    """Deterministic CSV: a '# config <hash>' line, the header, then %.17g numbers."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config {config_hash}\n")
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(x) for x in r) + "\n")
    return path


def read_csv(path: str) -> tuple:
    """(header, rows as float arrays) of a file written by write_csv."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header = lines[0].split(",")
    rows = [[float(x) for x in ln.split(",")] for ln in lines[1:] if ln]
    return header, np.array(rows)


def write_dat(path: str, x: Sequence[float], y: Sequence[float], comment: str = "",
              config_hash: str = "") -> str:
    """Two whitespace-separated columns, gnuplot-ready."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config {config_hash}\n")
        if comment:
            fh.write(f"# {comment}\n")
        for a, b in zip(x, y):
            fh.write(f"{float(a):.17g} {float(b):.17g}\n")
    return path


def versions() -> Dict[str, str]:
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "inflow_euler": __version__}


def write_manifest(out_dir: str, command: str, config_hash: str, seed: int,
                   artifacts: List[str], extra: Optional[dict] = None) -> str:
    path = os.path.join(out_dir, "manifest.json")
    data = {
        "command": command,
        "config_hash": config_hash,
        "seed": seed,
        "versions": versions(),
        "artifacts": [{"path": os.path.relpath(a, out_dir), "config_hash": config_hash}
                      for a in sorted(set(artifacts))],
    }
    if extra:
        data["summary"] = extra
    os.makedirs(out_dir, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# figures


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_norm_series(path: str, t: Sequence[float], series: Dict[str, Sequence[float]],
                     title: str = "") -> str:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, y in series.items():
        y = np.asarray(y, dtype=float)
        if np.any(y > 0):
            ax.semilogy(t, np.where(y > 0, y, np.nan), label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("norm at tau(t)")
    if title:
        ax.set_title(title)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best", fontsize=8)
    else:
        ax.text(0.5, 0.5, "all norms zero", ha="center", va="center", transform=ax.transAxes)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_decay(path: str, x: Sequence[float], y: Sequence[float], xlabel: str, ylabel: str,
               title: str = "") -> str:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    y = np.asarray(y, dtype=float)
    ax.semilogy(x, np.maximum(y, 1e-300), "o-")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
