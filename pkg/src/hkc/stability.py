"""Origin linearization: eigenvalues, critical numbers, bifurcation taxonomy.

The linearization block-diagonalizes over wave vectors.  Interior blocks
are 3x3 in (u, w, theta); boundary wave vectors reduce to a 2x2 shear
block, a scalar temperature row or a scalar transverse row, all of which
are unconditionally stable.  All signs here are inherited from the
projected evolution equations under phase locking, and the test suite
pins the block against the Jacobian of a compiled model at the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Params, WaveVector, km_norm, km_norm_sq, locked_phase

_REL_TOL = 1e-9


@dataclass(frozen=True)
class OriginBlock:
    m: WaveVector
    matrix: np.ndarray
    rows: tuple[str, ...]


@dataclass(frozen=True)
class StabilityReport:
    m: WaveVector
    eigenvalues: tuple[complex, complex, complex]
    R_crit1: float
    R_crit2: float
    R_crit3: float
    R_c: float
    S_threshold: float
    crossing_type: str


def origin_block(m: WaveVector, params: Params) -> OriginBlock:
    """Linearization block at the origin for one wave vector."""
    P, R, S, k1 = params.P, params.R, params.S, params.k1
    if m.m1 > 0 and m.m3 > 0:
        norm = km_norm(m, k1)
        ksq = norm * norm
        sgn = (-1) ** locked_phase(m)  # equals (-1)^(m1+m3+1)
        cor = P * S * m.m3 / norm
        buoy = k1 * m.m1 / norm
        mat = np.array([
            [-P * ksq, cor, sgn * P * R * buoy],
            [-cor, -P * ksq, 0.0],
            [sgn * buoy, 0.0, -ksq],
        ])
        return OriginBlock(m, mat, ("u", "w", "theta"))
    if m.m1 == 0 and m.m3 > 0:
        if m.m3 % 2 == 1:
            mat = np.array([[-P * m.m3 ** 2, P * S], [-P * S, -P * m.m3 ** 2]])
            return OriginBlock(m, mat, ("u", "w"))
        return OriginBlock(m, np.array([[-float(m.m3 ** 2)]]), ("theta",))
    if m.m3 == 0 and m.m1 > 0:
        return OriginBlock(m, np.array([[-P * (k1 * m.m1) ** 2]]), ("w",))
    raise ValueError("zero wave vector has no linearization block")


def char_coeffs(m: WaveVector, params: Params) -> tuple[float, float, float]:
    """Coefficients (c2, c1, c0) of the interior-block characteristic cubic."""
    if m.m1 < 1 or m.m3 < 1:
        raise ValueError("characteristic cubic is defined for interior wave vectors")
    P, R, S, k1 = params.P, params.R, params.S, params.k1
    ksq = km_norm_sq(m, k1)
    c2 = (2 * P + 1) * ksq
    c1 = P * ((P + 2) * ksq ** 2 + P * S ** 2 * m.m3 ** 2 / ksq
              - R * k1 ** 2 * m.m1 ** 2 / ksq)
    c0 = P ** 2 * (ksq ** 3 + S ** 2 * m.m3 ** 2 - R * k1 ** 2 * m.m1 ** 2)
    return c2, c1, c0


def eigenvalues(m: WaveVector, params: Params) -> np.ndarray:
    """Roots of the interior characteristic cubic, descending by (Re, Im).

    Real parts that agree to relative rounding tolerance count as ties, so
    a conjugate pair straddling a real eigenvalue orders deterministically.
    """
    c2, c1, c0 = char_coeffs(m, params)
    roots = np.roots([1.0, c2, c1, c0])
    if not np.all(np.isfinite(roots)):  # pragma: no cover - np.roots is robust
        roots = np.linalg.eigvals(origin_block(m, params).matrix)
    scale = max(1.0, float(np.max(np.abs(roots))))

    def before(a, b):
        if a.real - b.real > _REL_TOL * scale:
            return True
        if b.real - a.real > _REL_TOL * scale:
            return False
        return a.imag > b.imag

    out = list(roots)
    for i in range(1, 3):  # insertion sort on three roots
        j = i
        while j > 0 and before(out[j], out[j - 1]):
            out[j], out[j - 1] = out[j - 1], out[j]
            j -= 1
    return np.array(out)


def critical_rayleigh(m: WaveVector, params: Params) -> dict:
    """Critical thermal forcing: R1 (real crossing), R2 (pair crossing), Rc = min.

    The R field of ``params`` is ignored.
    """
    if m.m1 < 1 or m.m3 < 1:
        raise ValueError("critical numbers are defined for interior wave vectors")
    P, S, k1 = params.P, params.S, params.k1
    ksq = km_norm_sq(m, k1)
    denom = k1 ** 2 * m.m1 ** 2
    R1 = (ksq ** 3 + S ** 2 * m.m3 ** 2) / denom
    R2 = (2 * (P + 1) * ksq ** 3 + (2 * P ** 2 / (P + 1)) * S ** 2 * m.m3 ** 2) / denom
    return {"R1": R1, "R2": R2, "Rc": min(R1, R2)}


def rayleigh_crit3(m: WaveVector, params: Params) -> float:
    """Forcing at which the middle characteristic coefficient changes sign."""
    P, S, k1 = params.P, params.S, params.k1
    ksq = km_norm_sq(m, k1)
    return ((P + 2) * ksq ** 3 + P * S ** 2 * m.m3 ** 2) / (k1 ** 2 * m.m1 ** 2)


def rotation_threshold(m: WaveVector, P: float, k1: float) -> float:
    """Rotation separating real from oscillatory loss of stability (inf at P=1)."""
    if P <= 0:
        raise ValueError("Prandtl number must be positive")
    if P == 1.0:
        return math.inf
    cube = km_norm(m, k1) ** 3
    if P < 1.0:
        return math.sqrt((1 + P) / (1 - P)) * cube / m.m3
    return cube / (2 * m.m3 * math.sqrt(P * (P - 1)))


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= _REL_TOL * max(1.0, abs(a), abs(b))


def crossing_type(m: WaveVector, params: Params) -> str:
    """Which eigenvalue crossing ('T1'..'T4' or 'none') occurs at params.R.

    T1: real crossing at R1.  T2: conjugate-pair crossing at R2 (only for
    P < 1 at strong rotation).  T3: the delayed real return at R1 after a
    T2.  T4: the degenerate coincidence R1 = R2.
    """
    crit = critical_rayleigh(m, params)
    R, P, S = params.R, params.P, params.S
    if P >= 1.0:
        return "T1" if _close(R, crit["R1"]) else "none"
    Sm = rotation_threshold(m, P, params.k1)
    if _close(abs(S), Sm):
        return "T4" if _close(R, crit["R1"]) else "none"
    if abs(S) < Sm:
        return "T1" if _close(R, crit["R1"]) else "none"
    if _close(R, crit["R2"]):
        return "T2"
    if _close(R, crit["R1"]):
        return "T3"
    return "none"


def n_unstable_for_mode(m: WaveVector, params: Params) -> int:
    """Eigenvalues with positive real part, via the critical numbers alone.

    Above R1 exactly one real eigenvalue is positive.  In the low-Prandtl,
    strong-rotation pocket a conjugate pair crosses first at R2 (+2) and
    one eigenvalue returns at R1, leaving +1.
    """
    crit = critical_rayleigh(m, params)
    R, P, S = params.R, params.P, params.S
    if R > crit["R1"]:
        return 1
    if (P < 1.0 and abs(S) > rotation_threshold(m, P, params.k1)
            and crit["R2"] < R < crit["R1"]):
        return 2
    return 0


def _min_r1_bound(shell: int, k1: float) -> float:
    """Lower bound on Rc over all wave vectors with m1 + m3 >= shell."""
    scale = min(1.0, k1 * k1)
    return scale ** 3 * shell ** 4 / (8.0 * k1 * k1)


def unstable_dimension(params: Params, shell_cap: int) -> int:
    """Dimension of the origin's unstable manifold by eigenvalue counting.

    ``shell_cap`` must be large enough that every unstable wave vector has
    m1 + m3 <= shell_cap; this is checked through a monotone lower bound
    on the critical numbers and violated caps raise.
    """
    if shell_cap < 2:
        raise ValueError("shell_cap must be at least 2")
    if _min_r1_bound(shell_cap + 1, params.k1) <= params.R:
        raise ValueError(
            f"shell_cap={shell_cap} cannot certify stability beyond the cap at R={params.R}")
    P, S, k1 = params.P, params.S, params.k1
    pocket = P < 1.0
    total = 0
    for m1 in range(1, shell_cap):
        m3 = np.arange(1, shell_cap - m1 + 1, dtype=float)
        ksq = (k1 * m1) ** 2 + m3 ** 2
        denom = (k1 * m1) ** 2
        R1 = (ksq ** 3 + S ** 2 * m3 ** 2) / denom
        total += int(np.count_nonzero(params.R > R1))
        if pocket:
            R2 = (2 * (P + 1) * ksq ** 3 + (2 * P ** 2 / (P + 1)) * S ** 2 * m3 ** 2) / denom
            Sm = np.sqrt((1 + P) / (1 - P)) * ksq ** 1.5 / m3
            total += 2 * int(np.count_nonzero((abs(S) > Sm) & (params.R > R2) & (params.R < R1)))
    return total


def pitchfork_criticality(m: WaveVector, params: Params) -> str:
    """'supercritical' or 'subcritical' for a real (T1/T3) crossing.

    High Prandtl always gives the supercritical branch; below the slope
    threshold m3/(k1 m1) the rotation decides via the closed-form bound.
    """
    ct = crossing_type(m, params)
    if ct in ("T2",):
        raise ValueError("not a pitchfork: conjugate-pair (Hopf) crossing")
    if ct in ("T4", "none"):
        raise ValueError(f"not a simple pitchfork crossing (type {ct})")
    P, S, k1 = params.P, params.S, params.k1
    slope = m.m3 / (k1 * m.m1)
    if P >= slope:
        return "supercritical"
    Cm = km_norm(m, k1) ** 3 / (m.m3 * math.sqrt((m.m3 / (k1 * m.m1 * P)) ** 2 - 1.0))
    return "supercritical" if abs(S) < Cm else "subcritical"


def hausdorff_constant(P: float, k1: float) -> float:
    return 320.0 * math.pi ** 3 / (P * (1.0 + P) * min(1.0, k1 * k1))


def hausdorff_upper_bound(params: Params) -> float:
    """Upper bound on the attractor's Hausdorff dimension, C * (1 + R)."""
    return hausdorff_constant(params.P, params.k1) * (1.0 + params.R)


def _single_real_root(p: float, q: float) -> float:
    """Real root of t^3 + p t + q = 0 for p >= 0 (unique by monotonicity)."""
    disc = math.sqrt((q / 2.0) ** 2 + (p / 3.0) ** 3)
    return float(np.cbrt(-q / 2.0 + disc) + np.cbrt(-q / 2.0 - disc))


def level_curve_m3(m1: float, params: Params, which: str = "R1curve"):
    """Height m3(m1) of a critical level curve, or None outside its domain.

    The defining equation is cubic in m3^2 with exactly one real root;
    the root comes from the depressed-cubic closed form.
    """
    R, S, P, k1 = params.R, params.S, params.P, params.k1
    if which == "R1curve":
        s_sq, r_eff = S ** 2, R
    elif which == "R2curve":
        s_sq = (P * S / (P + 1.0)) ** 2
        r_eff = R / (2.0 * (P + 1.0))
    else:
        raise ValueError(f"unknown level curve: {which!r}")
    xi = (k1 * m1) ** 2
    if m1 <= 0 or xi >= math.sqrt(r_eff):
        return None
    t = _single_real_root(s_sq, -xi * (s_sq + r_eff))
    eta = t - xi
    if eta <= 0:
        return None
    return math.sqrt(eta)


def stability_report(m: WaveVector, params: Params) -> StabilityReport:
    crit = critical_rayleigh(m, params)
    eigs = eigenvalues(m, params)
    return StabilityReport(
        m=m,
        eigenvalues=tuple(complex(z) for z in eigs),
        R_crit1=crit["R1"],
        R_crit2=crit["R2"],
        R_crit3=rayleigh_crit3(m, params),
        R_c=crit["Rc"],
        S_threshold=rotation_threshold(m, params.P, params.k1),
        crossing_type=crossing_type(m, params),
    )


def stability_atlas(params: Params, max_shell: int) -> list[dict]:
    """Per-wave-vector stability table over all interior shells up to max_shell."""
    rows = []
    for shell in range(2, max_shell + 1):
        for m1 in range(shell - 1, 0, -1):
            m = WaveVector(m1, shell - m1)
            rep = stability_report(m, params)
            rows.append({
                "m1": m.m1, "m3": m.m3,
                "R1": rep.R_crit1, "R2": rep.R_crit2, "Rc": rep.R_c,
                "S_threshold": rep.S_threshold,
                "crossing_type": rep.crossing_type,
                "n_unstable": n_unstable_for_mode(m, params),
            })
    return rows


def write_atlas_csv(rows: list[dict], path, banner: str | None = None) -> None:
    with open(path, "w") as fh:
        if banner:
            fh.write(banner)
        fh.write("m1,m3,R1,R2,Rc,S_threshold,crossing_type,n_unstable\n")
        for r in rows:
            fh.write("%d,%d,%.17g,%.17g,%.17g,%.17g,%s,%d\n" % (
                r["m1"], r["m3"], r["R1"], r["R2"], r["Rc"], r["S_threshold"],
                r["crossing_type"], r["n_unstable"]))
