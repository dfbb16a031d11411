import math

import numpy as np
import pytest

from hkc.core import Kind, ModeIndex, WaveVector, locked_phase


def locked_modes(max_m1, max_m3=None, kinds=(Kind.U, Kind.W, Kind.THETA)):
    """All admissible phase-locked mode indices with m1 <= max_m1, m3 <= max_m3."""
    max_m3 = max_m1 if max_m3 is None else max_m3
    out = []
    for m1 in range(0, max_m1 + 1):
        for m3 in range(0, max_m3 + 1):
            m = WaveVector(m1, m3)
            for kind in kinds:
                try:
                    out.append(ModeIndex(kind, m, locked_phase(m)))
                except ValueError:
                    pass
    return out


def gauss_mesh(n1, n_gauss, k1):
    """Quadrature mesh with Gauss-Legendre nodes in x3 (handles odd-sine
    integrands that the trapezoid rule only approximates)."""
    x1 = np.arange(n1) * (2.0 * math.pi / k1 / n1)
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    x3 = 0.5 * math.pi * (gx + 1.0)
    w3 = 0.5 * math.pi * gw
    X1, X3 = np.meshgrid(x1, x3, indexing="ij")
    W = np.outer(np.full(n1, 2.0 * math.pi / k1 / n1), w3)
    return X1, X3, W


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
