import numpy as np
import pytest

from mmwbm.array import AngleDirection, ArrayGeometry, steering_vector
from mmwbm.channel import ClusterParams, draw_channel
from mmwbm.codebook import build_codebook


def reference_ftb_matrix() -> np.ndarray:
    """The 16x16 reference FTB matrix as printed: rows vertical, columns horizontal."""
    P = np.zeros((16, 16))
    P[5:12, 0] = -1
    P[5, 1] = 1
    P[6:11, 1] = -1
    P[5:12, 2] = 1
    P[:, 7:11] = -1
    return P


def reference_H(real):
    # explicit sum of rank-one path terms
    big = ArrayGeometry.ura(real.aip.n_h * real.n_aips, real.aip.n_v, real.aip.spacing)
    H = np.zeros((real.n_bs, real.n_ue), dtype=complex)
    for p, g in zip(real.paths, real.gains):
        a_big = steering_vector(big, AngleDirection(p.bs_theta, p.bs_phi)).reshape(real.aip.n_v, -1)
        # split the wide URA into AiPs, each vectorized column-major
        a = np.concatenate([
            a_big[:, i * real.aip.n_h:(i + 1) * real.aip.n_h].reshape(-1) for i in range(real.n_aips)
        ])
        b = steering_vector(real.ue, AngleDirection(p.ue_theta, p.ue_phi))
        H += g * np.outer(a, b.conj())
    return H


@pytest.fixture(scope="session")
def geom():
    return ArrayGeometry.ura(16, 16)


@pytest.fixture(scope="session")
def codebook(geom):
    return build_codebook(geom)


@pytest.fixture(scope="session")
def ue():
    return ArrayGeometry.ula(4)


@pytest.fixture
def channel(geom, ue):
    return draw_channel(ClusterParams(), geom, ue, np.random.default_rng(7), n_aips=2)
