import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from fgts.errors import InvalidInputError  # noqa: E402
from fgts.services.runner import ExperimentResult  # noqa: E402
from fgts.storage import AGGREGATE_COLUMNS, RAW_COLUMNS, write_csv  # noqa: E402

logger = logging.getLogger(__name__)

# fixed ids and no timestamp so identical inputs give identical SVG bytes
plt.rcParams["svg.hashsalt"] = "fgts"


def curve_label(lam: float) -> str:
    return f"FG-TS λ={lam:g}"


def plot_regret(
    result: ExperimentResult,
    path: Path,
    reference: Optional[Tuple[str, np.ndarray]] = None,
) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for lam, curve in result.aggregate.groupby("lambda", sort=True):
        t = curve["t"].to_numpy()
        mean = curve["mean_cum_regret"].to_numpy()
        se = curve["se"].to_numpy()
        ax.plot(t, mean, label=curve_label(lam))
        ax.fill_between(t, mean - se, mean + se, alpha=0.2)
    if reference is not None:
        label, values = reference
        ax.plot(np.arange(1, len(values) + 1), values, "k--", label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("cumulative regret")
    ax.set_title(result.config.name)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("✅ wrote %s", path)
    return path


def emit_plot_data(
    result: ExperimentResult,
    directory: Path,
    reference: Optional[Tuple[str, np.ndarray]] = None,
) -> Dict[str, Path]:
    """Raw CSV, aggregate CSV and an SVG regret plot under ``directory``."""
    if result.aggregate.empty:
        raise InvalidInputError("no curves to emit")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = result.config.name
    return {
        "raw": write_csv(result.raw, directory / f"{stem}_raw.csv", RAW_COLUMNS),
        "aggregate": write_csv(result.aggregate, directory / f"{stem}_aggregate.csv", AGGREGATE_COLUMNS),
        "plot": plot_regret(result, directory / f"{stem}_regret.svg", reference),
    }
