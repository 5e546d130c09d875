"""Clustered mmWave MIMO channel.

``H = sum_{k,l} g_kl a_bs(theta_bs, phi_bs) a_ue(theta_ue, phi_ue)^H`` with
``g_kl = sqrt(P_kl) exp(-j 2 pi tau_kl f_c)``. The BS is ``n_aips`` identical
URAs tiled side by side along the horizontal axis of one co-planar panel;
rows of ``H`` are grouped per AiP, so ``H = [H_1; ...; H_M]``.

The statistics are a small parametric stand-in for measurement-based
tables: uniform cluster centers, Gaussian sub-path spread, exponentially
decaying cluster powers and uniform delays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .array import ArrayGeometry, steering_matrix, wrap_angle


@dataclass(frozen=True)
class ClusterParams:
    n_clusters: int = 4
    n_subpaths: int = 10
    carrier_hz: float = 28e9
    # cluster k (0-based) gets mean power exp(-power_decay * k) before normalization
    power_decay: float = 1.0
    angle_spread_deg: float = 5.0
    inclination_spread_deg: float = 1.0
    delay_spread_s: float = 100e-9
    # BS arrival angles, azimuth as offset from broadside
    azimuth_range_deg: tuple[float, float] = (-60.0, 60.0)
    inclination_range_deg: tuple[float, float] = (88.0, 92.0)
    ue_azimuth_range_deg: tuple[float, float] = (-180.0, 180.0)
    ue_inclination_range_deg: tuple[float, float] = (88.0, 92.0)

    def __post_init__(self):
        if self.n_clusters < 1 or self.n_subpaths < 1:
            raise ValueError("need at least one cluster and one sub-path")
        if self.carrier_hz <= 0 or self.delay_spread_s < 0:
            raise ValueError("carrier must be positive and delay spread non-negative")
        if self.angle_spread_deg < 0 or self.inclination_spread_deg < 0:
            raise ValueError("angle spreads must be non-negative")
        for name in ("azimuth_range_deg", "inclination_range_deg",
                     "ue_azimuth_range_deg", "ue_inclination_range_deg"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound exceeds upper bound")
            object.__setattr__(self, name, (float(lo), float(hi)))

    def path_powers(self) -> np.ndarray:
        """Per-path powers, cluster-major, summing to one."""
        k = np.arange(self.n_clusters)
        cluster = np.exp(-self.power_decay * k)
        cluster /= cluster.sum()
        return np.repeat(cluster / self.n_subpaths, self.n_subpaths)


class PathRecord(NamedTuple):
    cluster: int
    subpath: int
    power: float
    delay_s: float
    bs_theta: float
    bs_phi: float
    ue_theta: float
    ue_phi: float


def bs_response(aip: ArrayGeometry, n_aips: int, theta, phi) -> np.ndarray:
    """Full-BS array responses (``n_aips * n_elements`` x n_paths)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    a = steering_matrix(aip, theta, phi)
    shift = 2 * np.pi * aip.spacing * aip.n_h * np.sin(theta) * np.cos(phi)
    return np.concatenate([a * np.exp(1j * i * shift) for i in range(n_aips)], axis=0)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    carrier_hz: float
    aip: ArrayGeometry
    n_aips: int
    ue: ArrayGeometry
    cluster: np.ndarray
    subpath: np.ndarray
    powers: np.ndarray
    delays: np.ndarray
    bs_theta: np.ndarray
    bs_phi: np.ndarray
    ue_theta: np.ndarray
    ue_phi: np.ndarray
    H: np.ndarray

    @property
    def gains(self) -> np.ndarray:
        return path_gains(self.powers, self.delays, self.carrier_hz)

    @property
    def n_bs(self) -> int:
        return self.n_aips * self.aip.n_elements

    @property
    def n_ue(self) -> int:
        return self.ue.n_elements

    @property
    def blocks(self) -> list[np.ndarray]:
        n = self.aip.n_elements
        return [self.H[i * n:(i + 1) * n] for i in range(self.n_aips)]

    def block(self, i: int) -> np.ndarray:
        n = self.aip.n_elements
        return self.H[i * n:(i + 1) * n]

    @property
    def paths(self) -> list[PathRecord]:
        return [
            PathRecord(int(c), int(s), float(p), float(t), float(a), float(b), float(x), float(y))
            for c, s, p, t, a, b, x, y in zip(
                self.cluster, self.subpath, self.powers, self.delays,
                self.bs_theta, self.bs_phi, self.ue_theta, self.ue_phi,
            )
        ]


def path_gains(powers, delays, carrier_hz) -> np.ndarray:
    return np.sqrt(powers) * np.exp(-2j * np.pi * np.asarray(delays) * carrier_hz)


def assemble_channel(
    carrier_hz, aip, n_aips, ue, cluster, subpath, powers, delays,
    bs_theta, bs_phi, ue_theta, ue_phi,
) -> ChannelRealization:
    """Build ``H`` from per-path parameters."""
    g = path_gains(powers, delays, carrier_hz)
    A_bs = bs_response(aip, n_aips, bs_theta, bs_phi)
    A_ue = steering_matrix(ue, ue_theta, ue_phi)
    H = (A_bs * g) @ A_ue.conj().T
    return ChannelRealization(
        float(carrier_hz), aip, int(n_aips), ue,
        np.asarray(cluster), np.asarray(subpath), np.asarray(powers, dtype=float),
        np.asarray(delays, dtype=float), np.asarray(bs_theta, dtype=float),
        np.asarray(bs_phi, dtype=float), np.asarray(ue_theta, dtype=float),
        np.asarray(ue_phi, dtype=float), H,
    )


def _broadside_to_phi(psi_deg):
    return wrap_angle(np.pi / 2 - np.radians(psi_deg))


def _draw_angles(rng, n_clusters, n_sub, center_range, spread):
    centers = rng.uniform(center_range[0], center_range[1], size=n_clusters)
    return np.repeat(centers, n_sub) + spread * rng.standard_normal(n_clusters * n_sub)


def draw_channel(
    params: ClusterParams,
    aip: ArrayGeometry,
    ue: ArrayGeometry,
    rng: np.random.Generator,
    n_aips: int = 1,
) -> ChannelRealization:
    """Draw one realization; the same ``rng`` state always gives the same channel."""
    if n_aips < 1:
        raise ValueError("need at least one AiP")
    K, L = params.n_clusters, params.n_subpaths
    bs_az = _draw_angles(rng, K, L, params.azimuth_range_deg, params.angle_spread_deg)
    bs_inc = _draw_angles(rng, K, L, params.inclination_range_deg, params.inclination_spread_deg)
    ue_az = _draw_angles(rng, K, L, params.ue_azimuth_range_deg, params.angle_spread_deg)
    ue_inc = _draw_angles(rng, K, L, params.ue_inclination_range_deg, params.inclination_spread_deg)
    delays = rng.uniform(0.0, params.delay_spread_s, size=K * L)
    return assemble_channel(
        params.carrier_hz, aip, n_aips, ue,
        np.repeat(np.arange(K), L), np.tile(np.arange(L), K),
        params.path_powers(), delays,
        np.clip(np.radians(bs_inc), 0.0, np.pi), _broadside_to_phi(bs_az),
        np.clip(np.radians(ue_inc), 0.0, np.pi), _broadside_to_phi(ue_az),
    )


def evolve_channel(
    real: ChannelRealization,
    drift_deg_std: float,
    rng: np.random.Generator,
    delay_spread_s: float = 100e-9,
    redraw_delays: bool = True,
) -> ChannelRealization:
    """One TTI of mobility: Gaussian random walk on all path angles, fresh delays.

    Path powers are kept, so only the phases of the gains change.
    """
    if drift_deg_std < 0:
        raise ValueError("drift_deg_std must be non-negative")
    n = len(real.powers)
    angles = [real.bs_theta, real.bs_phi, real.ue_theta, real.ue_phi]
    if drift_deg_std > 0:
        step = np.radians(drift_deg_std) * rng.standard_normal((4, n))
        angles = [a + s for a, s in zip(angles, step)]
        angles[0] = _reflect_inclination(angles[0])
        angles[2] = _reflect_inclination(angles[2])
        angles[1] = wrap_angle(angles[1])
        angles[3] = wrap_angle(angles[3])
    delays = rng.uniform(0.0, delay_spread_s, size=n) if redraw_delays else real.delays
    if drift_deg_std == 0 and not redraw_delays:
        return replace(real)
    return assemble_channel(
        real.carrier_hz, real.aip, real.n_aips, real.ue, real.cluster, real.subpath,
        real.powers, delays, *angles,
    )


def _reflect_inclination(theta):
    theta = np.abs(theta)
    return np.where(theta > np.pi, 2 * np.pi - theta, theta)


def beamformed_channel(real: ChannelRealization, beams) -> np.ndarray:
    """``H^H U_RF`` for a block-diagonal combiner: column i is ``H_i^H u_i``."""
    beams = [np.asarray(u) for u in beams]
    if len(beams) != real.n_aips:
        raise ValueError(f"need {real.n_aips} beams, got {len(beams)}")
    cols = []
    for i, u in enumerate(beams):
        if u.shape != (real.aip.n_elements,):
            raise ValueError(f"beam {i} has shape {u.shape}, expected ({real.aip.n_elements},)")
        if not np.any(u):
            raise ValueError(f"beam {i} is all zeros")
        cols.append(real.block(i).conj().T @ u)
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# dump / replay

def channel_to_dict(real: ChannelRealization) -> dict:
    return {
        "format": "mmwbm-channel/1",
        "carrier_hz": real.carrier_hz,
        "aip": {"n_h": real.aip.n_h, "n_v": real.aip.n_v, "spacing": real.aip.spacing},
        "n_aips": real.n_aips,
        "ue": {"n_h": real.ue.n_h, "n_v": real.ue.n_v, "spacing": real.ue.spacing},
        # angles in radians so that replay is bit-exact
        "paths": [p._asdict() for p in real.paths],
    }


def channel_from_dict(doc: dict) -> ChannelRealization:
    def geom(g):
        return ArrayGeometry(int(g["n_h"]), int(g["n_v"]), float(g["spacing"]))

    cols = {k: np.array([p[k] for p in doc["paths"]]) for k in PathRecord._fields}
    return assemble_channel(
        doc["carrier_hz"], geom(doc["aip"]), doc["n_aips"], geom(doc["ue"]),
        cols["cluster"], cols["subpath"], cols["power"], cols["delay_s"],
        cols["bs_theta"], cols["bs_phi"], cols["ue_theta"], cols["ue_phi"],
    )


def dump_channel(real: ChannelRealization, path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(real), indent=1) + "\n")


def load_channel(path) -> ChannelRealization:
    return channel_from_dict(json.loads(Path(path).read_text()))
