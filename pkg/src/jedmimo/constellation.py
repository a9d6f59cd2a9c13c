"""Square-QAM constellations with Gray labels and hard-decision demapping."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

SUPPORTED_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class Constellation:
    """Unit-average-power square M-QAM point set.

    ``points[k]`` carries Gray bit label ``gray_labels[k]``; points are
    enumerated over the (I, Q) grid. Mean squared magnitude is 1.
    """

    order: int
    points: np.ndarray       # (M,) complex128
    gray_labels: np.ndarray  # (M,) int64

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    def points_in_gray_order(self) -> np.ndarray:
        """Points sorted by ascending Gray label (tie-break order for slicing)."""
        return self.points[np.argsort(self.gray_labels)]


def make_constellation(order: int) -> Constellation:
    """Build the Gray-labeled M-QAM grid, scaled to unit average power.

    Supported orders are the square powers of four (4, 16, 64). Per-axis
    amplitude levels are the odd integers scaled by sqrt(2(M-1)/3), which
    makes (1/M) sum |x_k|^2 = 1.
    """
    if order not in SUPPORTED_ORDERS:
        raise ConfigurationError(
            f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}"
        )
    m = int(round(math.sqrt(order)))
    idx = np.arange(m)
    levels = (2 * idx - (m - 1)) / math.sqrt(2.0 * (order - 1) / 3.0)
    gray = idx ^ (idx >> 1)
    bits_axis = m.bit_length() - 1

    points = (levels[:, None] + 1j * levels[None, :]).ravel()
    labels = ((gray[:, None] << bits_axis) | gray[None, :]).ravel()
    return Constellation(order=order, points=points, gray_labels=labels.astype(np.int64))


def hard_decision(x: np.ndarray, c: Constellation) -> np.ndarray:
    """Map each entry to the nearest constellation point.

    Exact distance ties resolve to the point with the smaller Gray label.
    """
    x = np.asarray(x)
    pts = c.points_in_gray_order()
    d2 = np.abs(x[..., None] - pts) ** 2
    # argmin returns the first minimum; pts are in ascending Gray order
    return pts[d2.argmin(axis=-1)]
