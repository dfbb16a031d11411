"""Parameters, mode indices and wave-vector geometry.

Everything downstream works on the rectangular free-slip box
``[0, 2*pi/k1) x [0, pi]`` with periodic horizontal direction.  Fourier
modes are indexed by a wave vector ``(m1, m3)``, a phase ``p1 in {1, 2}``
(cosine/sine in x1) and a component ``c in {1, 2}`` distinguishing the
in-plane velocity family from the transverse (x2) one.  All phase and
component arithmetic is mod 2, mapped back into {1, 2}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


def mod2(v: int) -> int:
    """Map an integer onto {1, 2} with arithmetic mod 2 (0 means 2)."""
    return (v - 1) % 2 + 1


@dataclass(frozen=True)
class Params:
    """Dimensionless parameter vector (Rayleigh, rotation, Prandtl, aspect).

    Admissibility (R >= 0, S >= 0, P > 0, k1 > 0) is enforced at
    construction; no per-call checks happen downstream.
    """

    R: float
    S: float
    P: float
    k1: float

    def __post_init__(self):
        if not (self.R >= 0 and self.S >= 0 and self.P > 0 and self.k1 > 0):
            raise ValueError(
                f"inadmissible parameters: R={self.R}, S={self.S}, "
                f"P={self.P}, k1={self.k1} (need R,S >= 0 and P,k1 > 0)"
            )


@dataclass(frozen=True, order=True)
class WaveVector:
    """Nonnegative integer wave vector (m1, m3)."""

    m1: int
    m3: int

    def __post_init__(self):
        if self.m1 < 0 or self.m3 < 0:
            raise ValueError(f"negative wave numbers: ({self.m1}, {self.m3})")

    @property
    def shell(self) -> int:
        return self.m1 + self.m3

    def as_tuple(self) -> tuple[int, int]:
        return (self.m1, self.m3)


class Kind(Enum):
    """Variable kind: in-plane velocity, transverse velocity, temperature."""

    U = "u"
    W = "w"
    THETA = "theta"

    @property
    def component(self) -> int:
        """Component index c: U and THETA carry c=1, W carries c=2."""
        return 2 if self is Kind.W else 1

    @property
    def is_velocity(self) -> bool:
        return self is not Kind.THETA


def locked_phase(m: WaveVector) -> int:
    """Phase selected by the phase-locking convention, p1 = m1+m3+1 mod 2."""
    return mod2(m.m1 + m.m3 + 1)


def _admissible(kind: Kind, m: WaveVector, p1: int) -> bool:
    """Index admissibility: the sine factors of the basis must not vanish."""
    if p1 not in (1, 2):
        return False
    phases = {1, 2} if m.m1 > 0 else {1}
    if kind is Kind.THETA:
        return m.m3 > 0 and p1 in phases
    if m == WaveVector(0, 0):
        return False
    if m.m3 == 0 and kind is not Kind.W:
        return False
    return mod2(p1 + 1) in phases


@dataclass(frozen=True, order=True)
class ModeIndex:
    """Typed Fourier index n = (kind, m, p1); the component c follows the kind."""

    kind: Kind
    m: WaveVector
    p1: int

    def __post_init__(self):
        if not _admissible(self.kind, self.m, self.p1):
            raise ValueError(f"inadmissible mode index: {self.kind.value}{self.m.as_tuple()}, p1={self.p1}")

    @classmethod
    def locked(cls, kind: Kind, m1: int, m3: int) -> "ModeIndex":
        """Mode with the phase fixed by the phase-locking convention."""
        m = WaveVector(m1, m3)
        return cls(kind, m, locked_phase(m))

    @property
    def c(self) -> int:
        return self.kind.component

    def label(self) -> str:
        prefix = {"u": "u", "w": "w", "theta": "th"}[self.kind.value]
        return f"{prefix}_{self.m.m1}_{self.m.m3}"


def normalizer_eta(m: WaveVector) -> float:
    """Product of the per-wavenumber normalizers (1 if m>0, 1/sqrt(2) if m=0)."""
    eta1 = 1.0 if m.m1 > 0 else 1.0 / math.sqrt(2.0)
    eta3 = 1.0 if m.m3 > 0 else 1.0 / math.sqrt(2.0)
    return eta1 * eta3


def box_volume_norm(k1: float) -> float:
    """Normalizing constant V = sqrt(pi^2 / (2 k1)) of the basis functions."""
    return math.sqrt(math.pi**2 / (2.0 * k1))


def km_norm(m: WaveVector, k1: float) -> float:
    """Scaled wave-vector norm sqrt(k1^2 m1^2 + m3^2); rejects the zero vector."""
    if m.m1 == 0 and m.m3 == 0:
        raise ValueError("zero wave vector has no scaled norm")
    return math.hypot(k1 * m.m1, float(m.m3))


def km_norm_sq(m: WaveVector, k1: float) -> float:
    if m.m1 == 0 and m.m3 == 0:
        raise ValueError("zero wave vector has no scaled norm")
    return (k1 * m.m1) ** 2 + float(m.m3) ** 2
