"""Flat-top beam (FTB) synthesis and the multi-level hierarchical codebook.

An FTB is built in three steps: sample a sinc as the ULA weights that a
URA column sum should reproduce, turn on just enough unit-modulus elements
per URA column to reach each sample, then steer the result with a phase
grid. Level 1 of the codebook holds DFT beams; higher levels hold
progressively wider FTBs. Each wider beam "covers" the narrower beams whose
centers fall inside its -3 dB region, which gives the parent->child maps
used by the hierarchical search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .array import (
    AngleDirection,
    ArrayGeometry,
    WeightMatrix,
    array_factor_azimuth,
)

# default azimuth grid used for coverage and flatness evaluation
GRID_STEP_DEG = 0.05


def sinc_linear_weights(n_h: int, n_v: int, a: float) -> np.ndarray:
    """Target linear-equivalent weights of a centered FTB.

    ``n_h * sinc((n - c) / a)`` for ``n = 0..n_h-1`` with ``c = (n_v-1)/2``
    when ``n_v`` is even and ``c = n_v/2`` when odd; ``np.sinc`` is the
    normalized sinc.
    """
    if not a > 0:
        raise ValueError("sinc width parameter a must be positive")
    center = 0.5 * (n_v - 1) if n_v % 2 == 0 else 0.5 * n_v
    n = np.arange(n_h)
    return n_h * np.sinc((n - center) / a)


def _row_order(n_v: int) -> list[int]:
    # center-out, alternating down (+1) then up (-1)
    c = n_v // 2
    order = [c]
    for k in range(1, n_v):
        order += [c + k, c - k]
    return [r for r in order if 0 <= r < n_v][:n_v]


def quantize_to_ura(w_l, n_v: int, tol: float = 1e-9) -> WeightMatrix:
    """Approximate real ULA weights with a {0, +-1} URA of ``n_v`` rows.

    Column ``n`` gets ``ceil(|w_l[n]|)`` elements of sign ``sign(w_l[n])``,
    placed contiguously around the middle row.
    """
    w_l = np.asarray(w_l, dtype=float)
    if np.any(np.abs(w_l) > n_v + tol):
        raise ValueError(f"|w_L| exceeds the {n_v} elements available per column")
    counts = np.minimum(n_v, np.ceil(np.abs(w_l) - tol)).astype(int)
    counts[np.abs(w_l) <= tol] = 0
    rows = _row_order(n_v)
    grid = np.zeros((len(w_l), n_v), dtype=complex)
    for n, (c, s) in enumerate(zip(counts, np.sign(w_l))):
        grid[n, rows[:c]] = s
    return WeightMatrix(grid)


def steer_beam(w: WeightMatrix, geom: ArrayGeometry, target: AngleDirection) -> WeightMatrix:
    """Multiply ``w`` entrywise by the phase grid of ``target``."""
    if w.shape != geom.shape:
        raise ValueError(f"weights {w.shape} do not match geometry {geom.shape}")
    phases = np.exp(1j * geom.phase_grid(target.theta, target.phi))
    return WeightMatrix(w.entries * phases)


def dft_beam(geom: ArrayGeometry, target: AngleDirection) -> WeightMatrix:
    return steer_beam(WeightMatrix(np.ones(geom.shape)), geom, target)


def ftb_beam(geom: ArrayGeometry, a: float, target: AngleDirection) -> WeightMatrix:
    w_l = sinc_linear_weights(geom.n_h, geom.n_v, a)
    return steer_beam(quantize_to_ura(w_l, geom.n_v), geom, target)


@dataclass(frozen=True)
class LevelSpec:
    """One codebook level: ``count`` beams evenly spread over ``span_deg``.

    ``width`` is the sinc width parameter; ``None`` means DFT beams.
    """

    count: int
    span_deg: tuple[float, float]
    width: float | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("a codebook level needs at least one beam")
        if self.width is not None and not self.width > 0:
            raise ValueError("FTB width parameter must be positive")
        object.__setattr__(self, "span_deg", tuple(float(x) for x in self.span_deg))

    def centers_deg(self) -> np.ndarray:
        lo, hi = self.span_deg
        if self.count == 1:
            return np.array([0.5 * (lo + hi)])
        return np.linspace(lo, hi, self.count)


DEFAULT_LEVELS = (
    LevelSpec(17, (-60.0, 60.0)),
    LevelSpec(4, (-38.0, 52.0), 3.2),
    LevelSpec(2, (-23.0, 37.0), 1.8),
)


@dataclass(frozen=True, eq=False)
class BeamSpec:
    level: int
    index: int
    center_deg: float
    width_param: float | None
    weights: WeightMatrix

    @property
    def center_azimuth(self) -> float:
        """Beam center, radians off broadside."""
        return math.radians(self.center_deg)

    @property
    def direction(self) -> AngleDirection:
        return AngleDirection.from_broadside(self.center_azimuth)

    @property
    def vector(self) -> np.ndarray:
        return self.weights.entries.reshape(-1, order="F")

    def __eq__(self, other):
        return (
            isinstance(other, BeamSpec)
            and (self.level, self.index, self.center_deg, self.width_param)
            == (other.level, other.index, other.center_deg, other.width_param)
            and self.weights == other.weights
        )


@dataclass(frozen=True)
class FlatnessReport:
    ripple_db: float
    flat_width_deg: float
    peak_gain_db: float
    flat_region_deg: tuple[float, float]
    min_gain_db: float


def azimuth_grid_deg(step: float = GRID_STEP_DEG) -> np.ndarray:
    n = int(round(180.0 / step)) + 1
    return np.linspace(-90.0, 90.0, n)


def beam_gain_db(weights: WeightMatrix, geom: ArrayGeometry, psi_deg) -> np.ndarray:
    """Power-normalized array gain ``|AF|^2 / ||w||^2`` in dB at theta = pi/2."""
    af = array_factor_azimuth(geom, weights, np.radians(psi_deg))
    g = np.abs(af) ** 2 / weights.n_active
    return 10 * np.log10(np.maximum(g, 1e-300))


def _flat_region(psi: np.ndarray, gain: np.ndarray, center_deg: float) -> tuple[int, int]:
    peak = gain.max()
    inside = gain >= peak - 3.0
    i0 = int(np.argmin(np.abs(psi - center_deg)))
    if not inside[i0]:
        i0 = int(np.argmax(gain))
    lo = hi = i0
    while lo > 0 and inside[lo - 1]:
        lo -= 1
    while hi < len(psi) - 1 and inside[hi + 1]:
        hi += 1
    return lo, hi


def flatness_report(
    spec: BeamSpec,
    geom: ArrayGeometry,
    step_deg: float = GRID_STEP_DEG,
    window_deg: float | None = None,
) -> FlatnessReport:
    """Flatness of a beam's azimuth cut.

    The flat region is the contiguous stretch around the beam center within
    3 dB of the peak. Ripple is measured over ``center +- window_deg/2`` if
    a window is given, otherwise over the flat region itself.
    """
    psi = azimuth_grid_deg(step_deg)
    gain = beam_gain_db(spec.weights, geom, psi)
    lo, hi = _flat_region(psi, gain, spec.center_deg)
    if window_deg is None:
        band = gain[lo : hi + 1]
    else:
        sel = np.abs(psi - spec.center_deg) <= window_deg / 2 + 1e-9
        band = gain[sel]
    return FlatnessReport(
        ripple_db=float(band.max() - band.min()),
        flat_width_deg=float(psi[hi] - psi[lo]),
        peak_gain_db=float(gain.max()),
        flat_region_deg=(float(psi[lo]), float(psi[hi])),
        min_gain_db=float(band.min()),
    )


@dataclass(frozen=True, eq=False)
class HierarchicalCodebook:
    """Beams per level (level 1 narrowest) plus parent->child coverage maps.

    ``children[(l + 1, k)]`` lists the level-``l`` beam indices covered by
    beam ``k`` of level ``l + 1``. Indices are 1-based and increase with
    the center angle.
    """

    geom: ArrayGeometry
    level_specs: tuple[LevelSpec, ...]
    levels: tuple[tuple[BeamSpec, ...], ...]
    children: dict = field(default_factory=dict)
    # per-codebook memo for traversal orders (see beam_mgmt)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def size(self) -> int:
        return sum(len(lv) for lv in self.levels)

    def count(self, level: int) -> int:
        return len(self.levels[level - 1])

    def beam(self, level: int, index: int) -> BeamSpec:
        return self.levels[level - 1][index - 1]

    def beams(self):
        for lv in self.levels:
            yield from lv

    def angles_deg(self, level: int) -> np.ndarray:
        return np.array([b.center_deg for b in self.levels[level - 1]])

    def angles(self, level: int) -> np.ndarray:
        return np.radians(self.angles_deg(level))

    def beam_matrix(self, level: int) -> np.ndarray:
        """Vectorized beams of one level as columns."""
        return np.stack([b.vector for b in self.levels[level - 1]], axis=1)

    def parents(self, level: int, index: int) -> list[int]:
        """Level-(level+1) beams whose coverage contains beam ``(level, index)``."""
        up = level + 1
        return [k for k in range(1, self.count(up) + 1) if index in self.children[(up, k)]]

    def parent(self, level: int, index: int) -> int:
        """The covering parent whose center is closest to this beam's center."""
        cands = self.parents(level, index)
        here = self.beam(level, index).center_deg
        return min(cands, key=lambda k: (abs(self.beam(level + 1, k).center_deg - here), k))

    def __eq__(self, other):
        if not isinstance(other, HierarchicalCodebook):
            return NotImplemented
        return (
            self.geom == other.geom
            and self.level_specs == other.level_specs
            and self.levels == other.levels
            and self.children == other.children
        )


def _make_beam(geom: ArrayGeometry, level: int, index: int, center_deg: float, width):
    target = AngleDirection.from_broadside(math.radians(center_deg))
    w = dft_beam(geom, target) if width is None else ftb_beam(geom, width, target)
    return BeamSpec(level, index, float(center_deg), width, w)


def coverage_children(geom: ArrayGeometry, levels, step_deg: float = GRID_STEP_DEG) -> dict:
    psi = azimuth_grid_deg(step_deg)
    children = {}
    for up in range(2, len(levels) + 1):
        below = np.array([b.center_deg for b in levels[up - 2]])
        covered = np.zeros(len(below), dtype=bool)
        for beam in levels[up - 1]:
            gain = beam_gain_db(beam.weights, geom, psi)
            lo, hi = _flat_region(psi, gain, beam.center_deg)
            inside = (below >= psi[lo] - 1e-9) & (below <= psi[hi] + 1e-9)
            children[(up, beam.index)] = tuple(int(j) + 1 for j in np.flatnonzero(inside))
            covered |= inside
        if not covered.all():
            missing = [f"{x:g}" for x in below[~covered]]
            raise ValueError(
                f"level-{up - 1} angles {', '.join(missing)} deg are covered by no level-{up} beam"
            )
    return children


def build_codebook(
    geom: ArrayGeometry | None = None,
    level_specs=DEFAULT_LEVELS,
    step_deg: float = GRID_STEP_DEG,
) -> HierarchicalCodebook:
    """Build the L-level codebook; level 1 must be DFT beams."""
    geom = geom or ArrayGeometry.ura(16, 16)
    level_specs = tuple(level_specs)
    if not level_specs:
        raise ValueError("need at least one codebook level")
    if level_specs[0].width is not None:
        raise ValueError("level 1 must consist of DFT beams (width=None)")
    for i, spec in enumerate(level_specs[1:], start=2):
        if spec.width is None:
            raise ValueError(f"level {i} needs an FTB width parameter")
    levels = []
    for lvl, spec in enumerate(level_specs, start=1):
        centers = spec.centers_deg()
        if np.any(np.diff(centers) <= 0):
            raise ValueError(f"level {lvl} centers must be strictly increasing")
        levels.append(
            tuple(_make_beam(geom, lvl, k, c, spec.width) for k, c in enumerate(centers, start=1))
        )
    levels = tuple(levels)
    return HierarchicalCodebook(geom, level_specs, levels, coverage_children(geom, levels, step_deg))


# ---------------------------------------------------------------------------
# export / import


def codebook_to_dict(cb: HierarchicalCodebook) -> dict:
    beams = []
    for b in cb.beams():
        w = b.weights.entries
        rows, cols = np.nonzero(w)
        beams.append(
            {
                "level": b.level,
                "index": b.index,
                "center_azimuth_deg": b.center_deg,
                "width_param": b.width_param,
                "weights": [
                    [int(r), int(c), float(w[r, c].real), float(w[r, c].imag)]
                    for r, c in zip(rows, cols)
                ],
            }
        )
    return {
        "format": "mmwbm-codebook/1",
        "geometry": {"n_h": cb.geom.n_h, "n_v": cb.geom.n_v, "spacing": cb.geom.spacing},
        "levels": [
            {"count": s.count, "span_deg": list(s.span_deg), "width": s.width}
            for s in cb.level_specs
        ],
        "beams": beams,
        "children": [
            {"level": lvl, "index": k, "covers": list(v)} for (lvl, k), v in sorted(cb.children.items())
        ],
    }


def codebook_from_dict(doc: dict) -> HierarchicalCodebook:
    g = doc["geometry"]
    geom = ArrayGeometry(int(g["n_h"]), int(g["n_v"]), float(g["spacing"]))
    specs = tuple(LevelSpec(s["count"], tuple(s["span_deg"]), s["width"]) for s in doc["levels"])
    levels = [[None] * s.count for s in specs]
    for b in doc["beams"]:
        grid = np.zeros(geom.shape, dtype=complex)
        for r, c, re, im in b["weights"]:
            grid[r, c] = complex(re, im)
        spec = BeamSpec(b["level"], b["index"], b["center_azimuth_deg"], b["width_param"], WeightMatrix(grid))
        levels[spec.level - 1][spec.index - 1] = spec
    if any(x is None for lv in levels for x in lv):
        raise ValueError("codebook document is missing beams")
    children = {(c["level"], c["index"]): tuple(c["covers"]) for c in doc["children"]}
    return HierarchicalCodebook(geom, specs, tuple(tuple(lv) for lv in levels), children)


def export_codebook(cb: HierarchicalCodebook, path) -> None:
    Path(path).write_text(json.dumps(codebook_to_dict(cb), indent=1) + "\n")


def import_codebook(path) -> HierarchicalCodebook:
    return codebook_from_dict(json.loads(Path(path).read_text()))
