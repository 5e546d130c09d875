"""Planar/linear array geometry, steering vectors and array factors.

Phase convention
----------------
Element ``(n, m)`` (``n`` horizontal, ``m`` vertical) of an array on the
yz-plane sees a plane wave from ``(theta, phi)`` with phase

    exp(+j * 2*pi*d * (m*cos(theta) + n*sin(theta)*cos(phi)))

where ``d`` is the spacing in wavelengths. A beam with weights ``w`` has the
array factor ``AF = sum(conj(w) * a)`` (i.e. ``w^H a``), which is what an
analog combiner ``u`` applies to an arriving path. For the real-valued
flat-top weights this is identical to summing ``w * a``.

Beam angles in the codebook are given as offsets from broadside
(``psi``); since ``phi`` is measured from the array axis, ``cos(phi) = sin(psi)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

UNIT_TOL = 1e-12


class ArrayKind(Enum):
    URA = "ura"
    ULA = "ula"


@dataclass(frozen=True)
class AngleDirection:
    """Inclination ``theta`` in [0, pi] and azimuth ``phi`` in [-pi, pi] (radians)."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (-1e-12 <= self.theta <= np.pi + 1e-12):
            raise ValueError(f"theta={self.theta} outside [0, pi]")
        if not (-np.pi - 1e-12 <= self.phi <= np.pi + 1e-12):
            raise ValueError(f"phi={self.phi} outside [-pi, pi]")

    @classmethod
    def from_broadside(cls, psi: float, theta: float = np.pi / 2) -> "AngleDirection":
        """Direction ``psi`` radians off broadside in the horizontal plane."""
        return cls(theta, wrap_angle(np.pi / 2 - psi))


def wrap_angle(x):
    """Wrap angle(s) to [-pi, pi)."""
    out = (np.asarray(x, dtype=float) + np.pi) % (2 * np.pi) - np.pi
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform array on the yz-plane (URA) or on the y-axis (ULA).

    ``n_h`` counts horizontal elements (along y), ``n_v`` vertical ones
    (along z); ``spacing`` is in wavelengths.
    """

    n_h: int
    n_v: int = 1
    spacing: float = 0.5

    def __post_init__(self):
        if self.n_h < 1 or self.n_v < 1:
            raise ValueError("array dimensions must be >= 1")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @classmethod
    def ura(cls, n_h: int, n_v: int, spacing: float = 0.5) -> "ArrayGeometry":
        return cls(n_h, n_v, spacing)

    @classmethod
    def ula(cls, n: int, spacing: float = 0.5) -> "ArrayGeometry":
        return cls(n, 1, spacing)

    @property
    def kind(self) -> ArrayKind:
        return ArrayKind.ULA if self.n_v == 1 else ArrayKind.URA

    @property
    def n_elements(self) -> int:
        return self.n_h * self.n_v

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_h, self.n_v)

    def phase_grid(self, theta, phi) -> np.ndarray:
        """Element phases (radians) on the ``n_h x n_v`` grid.

        ``theta``/``phi`` may be arrays of equal shape ``S``; the result then
        has shape ``S + (n_h, n_v)``.
        """
        theta = np.asarray(theta, dtype=float)[..., None, None]
        phi = np.asarray(phi, dtype=float)[..., None, None]
        n = np.arange(self.n_h)[:, None]
        m = np.arange(self.n_v)[None, :]
        k = 2 * np.pi * self.spacing
        return k * (m * np.cos(theta) + n * np.sin(theta) * np.cos(phi))


def steering_vector(geom: ArrayGeometry, direction: AngleDirection) -> np.ndarray:
    """Array response for ``direction``, vectorized column-major (``n`` fastest)."""
    grid = np.exp(1j * geom.phase_grid(direction.theta, direction.phi))
    return grid.reshape(-1, order="F")


def steering_matrix(geom: ArrayGeometry, theta, phi) -> np.ndarray:
    """Stacked array responses, one column per ``(theta[k], phi[k])`` pair."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    grids = np.exp(1j * geom.phase_grid(theta, phi))  # (K, n_h, n_v)
    # column-major vec of each grid == C-order flatten of its transpose
    return grids.transpose(0, 2, 1).reshape(len(theta), -1).T


class WeightMatrix:
    """Analog weights on the ``n_h x n_v`` grid: each entry is 0 or unit-modulus."""

    __slots__ = ("_w",)

    def __init__(self, entries, *, check: bool = True):
        w = np.array(entries, dtype=complex)
        if w.ndim == 1:
            w = w[:, None]
        if w.ndim != 2:
            raise ValueError("weights must be a 2-D grid")
        if check:
            mag = np.abs(w)
            ok = (mag == 0) | (np.abs(mag - 1) <= UNIT_TOL)
            if not ok.all():
                raise ValueError("weights must be 0 or unit-modulus")
            if not (mag > 0).any():
                raise ValueError("weights must have at least one active element")
        w.setflags(write=False)
        self._w = w

    @property
    def entries(self) -> np.ndarray:
        return self._w

    @property
    def shape(self) -> tuple[int, int]:
        return self._w.shape

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self._w))

    def __eq__(self, other):
        return isinstance(other, WeightMatrix) and np.array_equal(self._w, other._w)

    def __hash__(self):
        return hash(self._w.tobytes())

    def __repr__(self):
        return f"WeightMatrix(shape={self.shape}, active={self.n_active})"


def _grid(w) -> np.ndarray:
    return w.entries if isinstance(w, WeightMatrix) else np.asarray(w, dtype=complex)


def vectorize(w) -> np.ndarray:
    """Stack the grid's columns into one vector (``vec``)."""
    g = _grid(w)
    return g.reshape(-1, order="F") if g.ndim == 2 else g.copy()


def unvectorize(vec, shape: tuple[int, int]) -> np.ndarray:
    return np.asarray(vec).reshape(shape, order="F")


def array_factor(geom: ArrayGeometry, w, direction: AngleDirection) -> complex:
    """``w^H a(direction)`` for weights ``w`` (WeightMatrix, grid or ULA vector)."""
    g = _grid(w)
    if g.ndim == 1:
        g = g[:, None]
    if g.shape != geom.shape:
        raise ValueError(f"weights {g.shape} do not match geometry {geom.shape}")
    return complex(np.vdot(vectorize(g), steering_vector(geom, direction)))


def array_factor_azimuth(geom: ArrayGeometry, w, psi, theta: float = np.pi / 2) -> np.ndarray:
    """Vectorized AF over broadside offsets ``psi`` (radians) at fixed ``theta``."""
    g = _grid(w)
    if g.ndim == 1:
        g = g[:, None]
    if g.shape != geom.shape:
        raise ValueError(f"weights {g.shape} do not match geometry {geom.shape}")
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    A = steering_matrix(geom, np.full_like(psi, theta), wrap_angle(np.pi / 2 - psi))
    return vectorize(g).conj() @ A


def linear_equivalent(w) -> np.ndarray:
    """Per-horizontal-index sums over the vertical axis.

    At theta = pi/2 the URA with weights ``w`` and a ULA of ``n_h`` elements
    with these summed weights have identical array factors.
    """
    g = _grid(w)
    if g.ndim != 2:
        raise ValueError("expected a 2-D weight grid")
    return g.sum(axis=1)
