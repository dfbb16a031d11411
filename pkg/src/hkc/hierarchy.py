"""Mode selection: consistency criteria and the nested model hierarchy.

Models are specified by three wave-vector sets (in-plane velocity,
transverse velocity, temperature); phases are fixed by the phase-locking
convention.  The hierarchy adjoins interior wave vectors shell by shell
(larger m1 first within a shell, so the m1 = 1 member closes each shell)
and, whenever a shell completes, the vertically stratified modes that the
energy and vorticity balance criteria demand.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .core import Kind, ModeIndex, WaveVector, locked_phase


def wave_order(i: int) -> WaveVector:
    """The i-th interior wave vector: by increasing shell m1+m3, then decreasing m1."""
    if i < 1:
        raise ValueError("wave order index starts at 1")
    # shell s holds s-1 vectors; cumulative count through shell s is s(s-1)/2
    s = 2
    while s * (s - 1) // 2 < i:
        s += 1
    j = i - (s - 1) * (s - 2) // 2  # 1-based position within shell s
    return WaveVector(s - j, j)


def model_dimension(M: int) -> int:
    """State dimension of the level-M model (closed form)."""
    if M < 1:
        raise ValueError("model level must be >= 1")
    return 3 * M + 4 * int((math.isqrt(8 * M + 1) - 1) // 2) - 1


def _layout_key(m: WaveVector) -> tuple[int, int, int]:
    return (m.m1 + m.m3, m.m1, m.m3)


@dataclass(frozen=True)
class ModelSpec:
    """Wave-vector sets plus the deterministic state-vector layout.

    ``level`` is the hierarchy index (0 for custom specs).  The layout
    lists all U modes, then W modes, then THETA modes, each sorted by
    (m1+m3, m1, m3); slot order is what state vectors follow everywhere.
    """

    level: int
    u_modes: tuple[WaveVector, ...]
    w_modes: tuple[WaveVector, ...]
    theta_modes: tuple[WaveVector, ...]
    layout: tuple[ModeIndex, ...] = field(init=False)

    def __post_init__(self):
        modes = []
        for kind, group in ((Kind.U, self.u_modes), (Kind.W, self.w_modes),
                            (Kind.THETA, self.theta_modes)):
            for m in sorted(group, key=_layout_key):
                modes.append(ModeIndex(kind, m, locked_phase(m)))
        object.__setattr__(self, "layout", tuple(modes))

    @property
    def dimension(self) -> int:
        return len(self.layout)

    def slot(self, n: ModeIndex) -> int:
        return self.layout.index(n)

    def mode_set(self, kind: Kind) -> frozenset[WaveVector]:
        return frozenset({Kind.U: self.u_modes, Kind.W: self.w_modes,
                          Kind.THETA: self.theta_modes}[kind])

    def without(self, kind: Kind, m: WaveVector) -> "ModelSpec":
        """Copy with one wave vector removed from one set (for consistency studies)."""
        sets = {Kind.U: self.u_modes, Kind.W: self.w_modes, Kind.THETA: self.theta_modes}
        if m not in sets[kind]:
            raise ValueError(f"{kind.value}{m.as_tuple()} not in model")
        sets[kind] = tuple(v for v in sets[kind] if v != m)
        return ModelSpec(0, sets[Kind.U], sets[Kind.W], sets[Kind.THETA])


def make_spec(u_modes, w_modes, theta_modes, level: int = 0) -> ModelSpec:
    """Custom model from raw (m1, m3) iterables."""
    def conv(group):
        return tuple(sorted({m if isinstance(m, WaveVector) else WaveVector(*m) for m in group},
                            key=_layout_key))
    return ModelSpec(level, conv(u_modes), conv(w_modes), conv(theta_modes))


def build_hkc(M: int) -> ModelSpec:
    """Level-M member of the hierarchy.

    Each interior wave vector joins all three sets.  When the adjoined
    vector has m1 = 1 (closing a shell with m3 = shell-1), the stratified
    modes (0, 2*m3-1) join the velocity sets, (0, 2*m3) joins the
    temperature set and (m3-1, 0) joins the transverse set, except that
    the empty vector (0, 0) arising at M = 1 is dropped.
    """
    if M < 1:
        raise ValueError("model level must be >= 1")
    u: set[WaveVector] = set()
    w: set[WaveVector] = set()
    th: set[WaveVector] = set()
    for i in range(1, M + 1):
        m = wave_order(i)
        u.add(m)
        w.add(m)
        th.add(m)
        if m.m1 == 1:
            u.add(WaveVector(0, 2 * m.m3 - 1))
            w.add(WaveVector(0, 2 * m.m3 - 1))
            th.add(WaveVector(0, 2 * m.m3))
            if m.m3 > 1:
                w.add(WaveVector(m.m3 - 1, 0))
    return make_spec(u, w, th, level=M)


@dataclass
class CriteriaReport:
    """Outcome of the three mode-selection criteria.

    ``violations`` holds (criterion, offending mode pair, required mode)
    triples; the pair entry is None for the buoyancy criterion.
    """

    energy_ok: bool
    vorticity_ok: bool
    rotating_vorticity_ok: bool
    buoyancy_ok: bool
    violations: list

    @property
    def all_ok(self) -> bool:
        return (self.energy_ok and self.vorticity_ok
                and self.rotating_vorticity_ok and self.buoyancy_ok)

    def consistent_for(self, S: float) -> bool:
        """Balance consistency needed before simulating at rotation S."""
        ok = self.energy_ok and self.vorticity_ok
        return ok and (S == 0.0 or self.rotating_vorticity_ok)


def _phases_match(m_a: WaveVector, m_b: WaveVector) -> bool:
    return locked_phase(m_a) == locked_phase(m_b)


def check_energy_criterion(spec: ModelSpec) -> list:
    """Potential-energy balance closure violations.

    For every velocity/temperature pair sharing an interior horizontal
    wave number, phase and component c = 1: equal vertical wave numbers
    demand the stratified temperature mode (0, 2*m3); unequal ones demand
    that (0, m3'-m3'') and (0, m3'+m3'') are jointly present or absent.
    """
    violations = []
    th_strat = {m.m3 for m in spec.theta_modes if m.m1 == 0}
    for mp in spec.u_modes:
        if mp.m1 == 0 or mp.m3 == 0:
            continue  # c=1 advectors with an interior horizontal wave number
        for mpp in spec.theta_modes:
            if mpp.m1 != mp.m1 or not _phases_match(mp, mpp):
                continue
            if mp.m3 == mpp.m3:
                if 2 * mp.m3 not in th_strat:
                    violations.append(("energy", (mp, mpp), WaveVector(0, 2 * mp.m3)))
            else:
                lo, hi = abs(mp.m3 - mpp.m3), mp.m3 + mpp.m3
                if (lo in th_strat) != (hi in th_strat):
                    need = WaveVector(0, hi if lo in th_strat else lo)
                    violations.append(("energy", (mp, mpp), need))
    return violations


def check_vorticity_criteria(spec: ModelSpec, rotating: bool) -> tuple[list, list]:
    """Mean-vorticity balance violations: (non-rotating clause, rotating clause)."""
    vi: list = []
    u_strat = {m.m3 for m in spec.u_modes if m.m1 == 0}
    w_strat = {m.m3 for m in spec.w_modes if m.m1 == 0}

    def pairs():
        groups = [(m, Kind.U) for m in spec.u_modes if m.m1 > 0 and m.m3 > 0]
        groups += [(m, Kind.W) for m in spec.w_modes if m.m1 > 0]
        for a, ka in groups:
            for b, kb in groups:
                if a.m1 != b.m1:
                    continue
                if (a.m3 + b.m3) % 2 == 0:
                    continue
                if _phases_match(a, b):
                    continue  # needs p' = p'' + 1
                yield a, ka, b, kb

    seen = set()
    for a, ka, b, kb in pairs():
        key = frozenset({(a, ka), (b, kb)})
        if key in seen:
            continue
        seen.add(key)
        lo, hi = abs(a.m3 - b.m3), a.m3 + b.m3
        if ka is Kind.U and kb is Kind.U:
            if (lo in u_strat) != (hi in u_strat):
                need = WaveVector(0, hi if lo in u_strat else lo)
                vi.append(("vorticity", (a, b), need))
        elif {ka, kb} == {Kind.U, Kind.W}:
            for m3 in {lo, hi}:
                if m3 > 0 and m3 not in w_strat:
                    vi.append(("vorticity", (a, b), WaveVector(0, m3)))

    vii: list = []
    if rotating:
        for m3 in sorted(u_strat | w_strat):
            if m3 % 2 == 0:
                continue
            if m3 in u_strat and m3 not in w_strat:
                vii.append(("rotating-vorticity", (WaveVector(0, m3), None), WaveVector(0, m3)))
            if m3 in w_strat and m3 not in u_strat:
                vii.append(("rotating-vorticity", (WaveVector(0, m3), None), WaveVector(0, m3)))
    return vi, vii


def check_buoyancy_criterion(spec: ModelSpec) -> list:
    """Interior velocity and temperature sets must carry the same wave vectors."""
    violations = []
    u_int = {m for m in spec.u_modes if m.m1 > 0 and m.m3 > 0}
    th_int = {m for m in spec.theta_modes if m.m1 > 0 and m.m3 > 0}
    for m in sorted(u_int ^ th_int, key=_layout_key):
        need_in = "theta" if m in u_int else "u"
        violations.append(("buoyancy", None, (need_in, m)))
    return violations


def criteria_report(spec: ModelSpec, rotating: bool = True) -> CriteriaReport:
    energy = check_energy_criterion(spec)
    vort, rot = check_vorticity_criteria(spec, rotating)
    buoy = check_buoyancy_criterion(spec)
    return CriteriaReport(
        energy_ok=not energy,
        vorticity_ok=not vort,
        rotating_vorticity_ok=not rot,
        buoyancy_ok=not buoy,
        violations=energy + vort + rot + buoy,
    )


def spec_to_json(spec: ModelSpec) -> str:
    doc = {
        "M": spec.level,
        "u": [list(m.as_tuple()) for m in spec.u_modes],
        "w": [list(m.as_tuple()) for m in spec.w_modes],
        "theta": [list(m.as_tuple()) for m in spec.theta_modes],
        "layout": [
            {"kind": n.kind.value, "m": list(n.m.as_tuple()), "p1": n.p1, "slot": i}
            for i, n in enumerate(spec.layout)
        ],
    }
    return json.dumps(doc, indent=2)


def spec_from_json(text: str) -> ModelSpec:
    doc = json.loads(text)
    spec = make_spec(doc["u"], doc["w"], doc["theta"], level=int(doc.get("M", 0)))
    if "layout" in doc:
        got = [(e["kind"], tuple(e["m"]), e["p1"]) for e in doc["layout"]]
        ours = [(n.kind.value, n.m.as_tuple(), n.p1) for n in spec.layout]
        if got != ours:
            raise ValueError("layout in file disagrees with the canonical slot order")
    return spec
