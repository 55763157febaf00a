"""Shannon entropy of image intensity histograms and grouped reporting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Group
from .raster import RasterInput

N_BINS = 256


class MultiChannelInput(Exception):
    pass


@dataclass(frozen=True)
class EntropyResult:
    value_bits: float
    n_bins: int
    image_ref: str = ""


def image_entropy(raster: RasterInput | np.ndarray, image_ref: str = "") -> EntropyResult:
    """Histogram entropy in bits over 256 intensity levels.

    Values in [0, 1] are quantized to 8-bit levels (matching the PNG
    emission depth); empty bins contribute nothing (0 log 0 := 0).
    """
    if isinstance(raster, RasterInput):
        if raster.pixels.shape[0] != 1:
            raise MultiChannelInput(
                f"entropy needs a single-channel raster, got {raster.pixels.shape[0]} channels"
            )
        values = raster.pixels[0]
    else:
        values = np.asarray(raster)
        if values.ndim != 2:
            raise MultiChannelInput(f"expected a 2-D array, got shape {values.shape}")
    levels = np.minimum((values * N_BINS).astype(np.int64), N_BINS - 1)
    counts = np.bincount(levels.ravel(), minlength=N_BINS)
    p = counts[counts > 0] / levels.size
    h = float(-(p * np.log2(p)).sum())
    return EntropyResult(value_bits=h, n_bins=N_BINS, image_ref=image_ref)


@dataclass(frozen=True)
class EntropyObservation:
    encoding: str
    group: Group
    trial_correct: bool
    value_bits: float


@dataclass(frozen=True)
class EntropyCell:
    mean: float
    std: float
    n: int


def _cell(values: list[float]) -> EntropyCell:
    if not values:
        return EntropyCell(float("nan"), float("nan"), 0)
    arr = np.asarray(values)
    return EntropyCell(float(arr.mean()), float(arr.std()), len(values))


GROUP_ROWS = ("HC", "MCI", "Total")
CORRECTNESS_COLS = ("Correct", "Wrong", "Total")


def entropy_report(
    observations: list[EntropyObservation],
) -> dict[str, dict[tuple[str, str], EntropyCell]]:
    """Mean +/- std entropy per (group x correctness) cell, per encoding.

    Returns ``{encoding: {(group, correctness): cell}}`` with HC/MCI/Total
    rows and Correct/Wrong/Total columns.
    """
    report: dict[str, dict[tuple[str, str], EntropyCell]] = {}
    encodings = sorted({o.encoding for o in observations})
    for enc in encodings:
        subset = [o for o in observations if o.encoding == enc]
        table: dict[tuple[str, str], EntropyCell] = {}
        for grp in GROUP_ROWS:
            for corr in CORRECTNESS_COLS:
                values = [
                    o.value_bits
                    for o in subset
                    if (grp == "Total" or o.group.value == grp)
                    and (
                        corr == "Total"
                        or (corr == "Correct") == o.trial_correct
                    )
                ]
                table[(grp, corr)] = _cell(values)
        report[enc] = table
    return report


def entropy_report_csv(report: dict[str, dict[tuple[str, str], EntropyCell]]) -> str:
    lines = ["encoding,group,correctness,mean,std,n"]
    for enc in sorted(report):
        for grp in GROUP_ROWS:
            for corr in CORRECTNESS_COLS:
                cell = report[enc][(grp, corr)]
                mean = "" if cell.n == 0 else f"{cell.mean:.6f}"
                std = "" if cell.n == 0 else f"{cell.std:.6f}"
                lines.append(f"{enc},{grp},{corr},{mean},{std},{cell.n}")
    return "\n".join(lines) + "\n"
