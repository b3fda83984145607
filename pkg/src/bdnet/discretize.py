"""Three-level discretization of continuous columns.

Methods are tried in a fixed preference cascade: k-means, frequency,
quantile, uniform. A method fails when any bin ends up empty or when two cut
points coincide; the cascade then advances to the next method. The 1-D
k-means step is solved exactly by dynamic programming over the sorted
values, so it needs no seed and is invariant to input order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

METHODS = ("kmeans", "frequency", "quantile", "uniform")


class ConstantColumnError(ValueError):
    """Fewer than two distinct values: nothing to discretize."""


class CascadeExhaustedError(ValueError):
    """No method produced the requested number of non-empty bins."""


class MethodFailure(Exception):
    """Internal signal: the current method cannot produce k valid bins."""


@dataclass(frozen=True)
class DiscretizationSpec:
    """Cut points and interval labels for one discretized column.

    Bins are half-open ``[lo, hi)`` except the last, which is closed; a value
    exactly at a cut point falls in the upper bin. ``apply`` clamps
    out-of-range values to the terminal bins so the mapping is total.
    """

    column: str
    method: str
    cut_points: tuple[float, ...]
    bin_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "cut_points", tuple(float(c) for c in self.cut_points))
        object.__setattr__(self, "bin_labels", tuple(self.bin_labels))
        if list(self.cut_points) != sorted(set(self.cut_points)):
            raise ValueError(f"cut points for {self.column!r} must be strictly ascending")
        if len(self.bin_labels) != len(self.cut_points) + 1:
            raise ValueError(
                f"{self.column!r}: {len(self.cut_points)} cuts need "
                f"{len(self.cut_points) + 1} labels, got {len(self.bin_labels)}"
            )

    @property
    def n_bins(self) -> int:
        return len(self.bin_labels)

    def bin_index(self, value: float) -> int:
        return int(np.searchsorted(self.cut_points, value, side="right"))

    def apply(self, values: Sequence[float]) -> list[str]:
        arr = np.asarray(values, dtype=float)
        idx = np.searchsorted(self.cut_points, arr, side="right")
        return [self.bin_labels[i] for i in idx]

    def to_dict(self) -> dict:
        return {
            "column": self.column,
            "method": self.method,
            "cut_points": list(self.cut_points),
            "bin_labels": list(self.bin_labels),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscretizationSpec":
        return cls(
            column=doc["column"],
            method=doc["method"],
            cut_points=tuple(doc["cut_points"]),
            bin_labels=tuple(doc["bin_labels"]),
        )


def apply_spec(spec: DiscretizationSpec, values: Sequence[float]) -> list[str]:
    """Bin values using a previously learned spec (total, clamping mapping)."""
    return spec.apply(values)


def kmeans_1d(values: Sequence[float], k: int, seed: int | None = None) -> tuple[float, ...]:
    """Optimal 1-D k-means cluster boundaries via dynamic programming.

    Returns the k-1 boundaries, each the midpoint between the maximum of one
    cluster and the minimum of the next. ``seed`` is accepted for interface
    parity but unused: the DP solution is exact and deterministic.
    """
    arr = np.sort(np.asarray(values, dtype=float))
    distinct, counts = np.unique(arr, return_counts=True)
    if len(distinct) < k:
        raise MethodFailure(f"k-means needs >= {k} distinct values, got {len(distinct)}")
    splits = _kmeans_dp_splits(distinct, counts.astype(float), k)
    bounds = []
    for s in splits:
        bounds.append((distinct[s - 1] + distinct[s]) / 2.0)
    return tuple(bounds)


def _kmeans_dp_splits(x: np.ndarray, w: np.ndarray, k: int) -> list[int]:
    """Split positions (into the distinct-value array) minimizing weighted SSE."""
    n = len(x)
    # prefix sums for O(1) weighted segment cost: cost = sum w x^2 - (sum w x)^2 / sum w
    cw = np.concatenate([[0.0], np.cumsum(w)])
    cwx = np.concatenate([[0.0], np.cumsum(w * x)])
    cwx2 = np.concatenate([[0.0], np.cumsum(w * x * x)])

    def seg_cost(i: np.ndarray, j: int) -> np.ndarray:
        sw = cw[j] - cw[i]
        sx = cwx[j] - cwx[i]
        sx2 = cwx2[j] - cwx2[i]
        return sx2 - sx * sx / sw

    INF = float("inf")
    cost = np.full((k + 1, n + 1), INF)
    back = np.zeros((k + 1, n + 1), dtype=int)
    cost[0, 0] = 0.0
    for m in range(1, k + 1):
        # cluster m covers x[i:j]; need i >= m-1 so earlier clusters are non-empty
        for j in range(m, n - (k - m) + 1):
            i = np.arange(m - 1, j)
            cand = cost[m - 1, i] + seg_cost(i, j)
            best = int(np.argmin(cand))
            cost[m, j] = cand[best]
            back[m, j] = i[best]
    splits: list[int] = []
    j = n
    for m in range(k, 1, -1):
        j = int(back[m, j])
        splits.append(j)
    splits.reverse()
    return splits


def _frequency_cuts(arr: np.ndarray, k: int) -> tuple[float, ...]:
    """Equal-count bins; cuts midway between the order statistics at the seams."""
    x = np.sort(arr)
    n = len(x)
    cuts = []
    for i in range(1, k):
        r = int(round(n * i / k))
        r = min(max(r, 1), n - 1)
        cuts.append((x[r - 1] + x[r]) / 2.0)
    return tuple(cuts)


def _quantile_cuts(arr: np.ndarray, k: int) -> tuple[float, ...]:
    qs = [i / k for i in range(1, k)]
    return tuple(float(q) for q in np.quantile(arr, qs, method="linear"))


def _uniform_cuts(arr: np.ndarray, k: int) -> tuple[float, ...]:
    lo, hi = float(arr.min()), float(arr.max())
    width = (hi - lo) / k
    return tuple(lo + width * i for i in range(1, k))


def _format_number(x: float, digits: int) -> str:
    s = f"{x:.{digits}g}"
    return "0" if s in ("-0", "-0.0") else s


def _interval_labels(arr: np.ndarray, cuts: Sequence[float]) -> tuple[str, ...]:
    """Interval strings like ``[62.2,70.2)``, last bin closed.

    Precision starts at 4 significant digits and grows until all boundary
    labels are distinct.
    """
    lo, hi = float(arr.min()), float(arr.max())
    points = [lo, *cuts, hi]
    for digits in range(4, 18):
        formatted = [_format_number(p, digits) for p in points]
        if len(set(formatted)) == len(formatted):
            break
    labels = []
    for i in range(len(points) - 1):
        close = "]" if i == len(points) - 2 else ")"
        labels.append(f"[{formatted[i]},{formatted[i + 1]}{close}")
    return tuple(labels)


def _validated_cuts(arr: np.ndarray, cuts: Sequence[float], k: int) -> tuple[float, ...]:
    cuts = tuple(float(c) for c in cuts)
    if len(set(cuts)) != k - 1 or list(cuts) != sorted(cuts):
        raise MethodFailure("duplicate or unordered cut points")
    counts = np.bincount(np.searchsorted(cuts, arr, side="right"), minlength=k)
    if np.any(counts == 0):
        raise MethodFailure("empty bin")
    return cuts


def discretize_column(
    values: Sequence[float],
    column: str = "",
    k: int = 3,
    seed: int | None = None,
    methods: Sequence[str] = METHODS,
) -> tuple[DiscretizationSpec, list[str]]:
    """Discretize one numeric column with the method cascade.

    Returns the learned spec plus the categorical column (interval labels).
    ``methods`` overrides the cascade (e.g. to force a single method).
    Raises ConstantColumnError for < 2 distinct values and
    CascadeExhaustedError when no method yields k non-empty bins.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ValueError(f"column {column!r} must be non-empty and finite (impute first)")
    if len(np.unique(arr)) < 2:
        raise ConstantColumnError(f"column {column!r} is constant")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown discretization methods {unknown}")

    failures = []
    for method in methods:
        try:
            if method == "kmeans":
                cuts = kmeans_1d(arr, k, seed)
            elif method == "frequency":
                cuts = _frequency_cuts(arr, k)
            elif method == "quantile":
                cuts = _quantile_cuts(arr, k)
            else:
                cuts = _uniform_cuts(arr, k)
            cuts = _validated_cuts(arr, cuts, k)
        except MethodFailure as exc:
            failures.append(f"{method}: {exc}")
            continue
        labels = _interval_labels(arr, cuts)
        spec = DiscretizationSpec(column=column, method=method, cut_points=cuts, bin_labels=labels)
        return spec, spec.apply(arr)
    raise CascadeExhaustedError(
        f"column {column!r}: no method produced {k} non-empty bins "
        f"({'; '.join(failures)}); consider a smaller bin count"
    )
