"""Cycle stability from transition matrices and bifurcations of the projected map."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import mpmath
import numpy as np

from .network import NetworkKind, ParamSet, build_topology, normalize_key
from .projmap import Admissibility, build_projected_map, eigvec2, fixed_point, switching_thetas
from .transition import derived_scalars, full_matrix, general_split_matrices, negative_entry_bases

ZERO_REL = 1e-12
TIE_REL = 1e-12
BISECT_MAX = 200


@dataclass(frozen=True)
class PodviginaReport:
    lambda_max: complex | float
    w_max: np.ndarray | None
    cond_I: bool
    cond_II: bool
    cond_III: bool
    undetermined: bool = False
    tag: str = ""

    @property
    def all_hold(self) -> bool:
        return self.cond_I and self.cond_II and self.cond_III and not self.undetermined

    def min_abs_entry(self) -> float:
        """Smallest |w_i| / |w|, the distance to failing the sign condition."""
        if self.w_max is None:
            return math.nan
        w = np.asarray(self.w_max, dtype=float)
        return float(np.min(np.abs(w)) / np.linalg.norm(w))


def _sign_condition(w: np.ndarray) -> bool:
    norm = np.linalg.norm(w)
    if norm == 0:
        return False
    if np.any(np.abs(w) <= ZERO_REL * norm):
        return False
    return bool(np.all(w > 0) or np.all(w < 0))


def podvigina_check(M) -> PodviginaReport:
    """Conditions I-III for a full transition matrix.

    I: the eigenvalue of largest modulus is real; II: it exceeds 1;
    III: its eigenvector has nonzero entries of one sign.
    """
    tag = getattr(M, "tag", "")
    m = np.asarray(getattr(M, "entries", M), dtype=float)
    if m.shape == (2, 2):
        (m11, m12), (m21, m22) = m
        tau = m11 + m22
        det = m11 * m22 - m12 * m21
        omega = tau * tau - 4 * det
        if omega < 0:
            lam = complex(tau / 2, math.sqrt(-omega) / 2)
            return PodviginaReport(lam, None, False, False, False, tag=tag)
        root = math.sqrt(omega)
        l1, l2 = (tau + root) / 2, (tau - root) / 2
        lam = l1 if abs(l1) >= abs(l2) else l2
        other = l2 if lam is l1 else l1
        tie = lam != other and abs(abs(lam) - abs(other)) <= TIE_REL * abs(lam)
        w = np.array(eigvec2(m, lam))
        if not np.any(w):
            w = np.array([1.0, 0.0])
    else:
        vals, vecs = np.linalg.eig(m)
        order = np.argsort(-np.abs(vals))
        lam = vals[order[0]]
        if abs(lam.imag) > TIE_REL * abs(lam):
            return PodviginaReport(complex(lam), None, False, False, False, tag=tag)
        lam = float(lam.real)
        second = vals[order[1]] if len(vals) > 1 else None
        tie = second is not None and abs(second - lam) > TIE_REL * abs(lam) and \
            abs(abs(second) - abs(lam)) <= TIE_REL * abs(lam)
        w = np.real(vecs[:, order[0]])
    return PodviginaReport(float(lam), w / np.linalg.norm(w), True, float(lam) > 1.0,
                           _sign_condition(w), bool(tie), tag)


@dataclass(frozen=True)
class CycleClassification:
    cycle: str
    verdict: str
    reasons: dict[str, float] = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        out = {"cycle": self.cycle, "verdict": self.verdict, "reasons": dict(self.reasons)}
        if self.note:
            out["note"] = self.note
        return out


def _simple_cycle(cycle: str, delta: float, disc: float, dname: str, nname: str) -> CycleClassification:
    reasons = {dname: delta, nname: disc}
    if delta == 1.0 or (delta > 1.0 and disc == 0.0):
        return CycleClassification(cycle, "undetermined", reasons, "on a bifurcation boundary")
    if delta < 1.0:
        return CycleClassification(cycle, "cu", reasons)
    return CycleClassification(cycle, "fas" if disc > 0 else "acu", reasons)


def _c34_classification(p: ParamSet, ds) -> CycleClassification:
    tau, det, omega, zeta = ds.tau34, ds.delta34, ds.omega34, ds.zeta34
    beta, nu4 = ds.beta34, ds.nu4
    threshold = min(2.0, 1.0 + det)
    reasons = {"omega34": omega, "tau34": tau, "delta34": det, "zeta34": zeta, "beta34": beta, "nu4": nu4}
    if omega < 0 or tau < 0:
        return CycleClassification("C34", "cu", reasons)
    if omega == 0 or tau == threshold or tau == 0:
        return CycleClassification("C34", "undetermined", reasons, "on a bifurcation boundary")
    if tau < threshold:
        return CycleClassification("C34", "cu", reasons)
    if p.kind is NetworkKind.DELTA_CLIQUE:
        if zeta == 0 or nu4 == 0 or (zeta < 0 and beta == 0):
            return CycleClassification("C34", "undetermined", reasons, "on a bifurcation boundary")
        if zeta < 0:
            fas = beta < 0 or nu4 < 0
        else:
            fas = nu4 < 0
        return CycleClassification("C34", "fas" if fas else "cu", reasons)
    # Tournament: stable exactly when the attracting fixed point is admissible in its domain.
    fp = fixed_point(build_projected_map(p), "theta34*")
    reasons["theta34*"] = fp.value
    if any(abs(fp.value - s) <= 1e-13 for s in switching_thetas(p)):
        return CycleClassification("C34", "undetermined", reasons, "fixed point on a switching point")
    ok = fp.admissibility is Admissibility.ADMISSIBLE
    return CycleClassification("C34", "fas" if ok else "cu", reasons)


def classify_cycle(p: ParamSet, cycle: str) -> CycleClassification:
    topo = build_topology(p.kind)
    topo.cycle(cycle)
    ds = derived_scalars(p)
    if cycle == "C3":
        if p.kind is NetworkKind.TOURNAMENT:
            out = _simple_cycle("C3", float(ds.delta3), float(ds.mu3), "delta3", "mu3")
            return CycleClassification(out.cycle, out.verdict, {**out.reasons, "nu3": float(ds.nu3)}, out.note)
        return _simple_cycle("C3", float(ds.delta3), float(ds.nu3), "delta3", "nu3")
    if cycle == "C4":
        return _simple_cycle("C4", float(ds.delta4), float(ds.nu4), "delta4", "nu4")
    return _c34_classification(p, ds)


def classify_all(p: ParamSet) -> dict[str, CycleClassification]:
    return {name: classify_cycle(p, name) for name in build_topology(p.kind).cycles}


@dataclass(frozen=True)
class BcbEntry:
    fixed_point: str
    bases: tuple[int, ...]
    admissible: bool | None
    cond_III: bool | None
    matched: bool | None
    skipped: str = ""


def bcb_equivalence_check(p: ParamSet) -> list[BcbEntry]:
    """Admissibility of each cycle's attracting fixed point versus Podvigina III.

    Condition III is evaluated on the full matrices based at the successors
    of every basic map with a negative entry; outside the theorem's
    preconditions the entry is skipped.
    """
    ds = derived_scalars(p)
    f = build_projected_map(p)
    out = []
    for cycle in build_topology(p.kind).cycles:
        name = f"theta{cycle[1:]}*"
        bases = tuple(negative_entry_bases(p, cycle))
        if cycle == "C3":
            pre = ds.delta3 > 1
        elif cycle == "C4":
            pre = ds.delta4 > 1
        else:
            pre = ds.omega34 > 0 and ds.tau34 > min(2.0, 1.0 + ds.delta34)
        if not pre:
            out.append(BcbEntry(name, bases, None, None, None, "precondition unmet"))
            continue
        adm = fixed_point(f, name).admissibility is Admissibility.ADMISSIBLE
        cond = all(podvigina_check(full_matrix(p, cycle, b)).cond_III for b in bases)
        out.append(BcbEntry(name, bases, adm, cond, adm == cond))
    return out


@dataclass(frozen=True)
class ZeroEntryReport:
    image123: np.ndarray
    image124: np.ndarray
    entry123: float
    entry124: float
    norm: float

    def ok(self, rel: float = 1e-14) -> bool:
        return abs(self.entry123) <= rel * self.norm and abs(self.entry124) <= rel * self.norm


def general_bcb_check(n: int, p: Mapping[str, float], w: Sequence[float]) -> ZeroEntryReport:
    """Apply both split matrices to a switching-subspace vector.

    ``w`` must start with ``(-1, -e_24/e_23)`` up to positive scale and
    continue with negative components.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (n - 2,):
        raise ValueError(f"w must have {n - 2} components (X3..Xn)")
    r = p["e_24"] / p["e_23"]
    if not (w[0] < 0 and abs(w[1] - r * w[0]) <= 1e-12 * abs(w[1]) and np.all(w[2:] < 0)):
        raise ValueError("w is not in the switching subspace")
    m123, m124 = general_split_matrices(n, p)
    i123 = m123.entries @ w
    i124 = m124.entries @ w
    return ZeroEntryReport(i123, i124, float(i123[1]), float(i124[0]), float(np.linalg.norm(w)))


@dataclass(frozen=True)
class BifurcationEvent:
    kind: str
    locus: float
    subject: str
    indicator: str
    residual: float
    validated: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "locus": self.locus, "subject": self.subject, "indicator": self.indicator,
                "residual": self.residual, "validated": self.validated, "details": dict(self.details)}


_INDICATORS = {
    NetworkKind.KIRK_SILBER: ("nu3", "nu4", "delta3", "delta4"),
    NetworkKind.DELTA_CLIQUE: ("nu4", "delta4", "omega34"),
    NetworkKind.TOURNAMENT: ("nu3", "mu3", "nu4", "delta3", "delta4", "omega34"),
}


def _indicator(ds, name: str):
    v = getattr(ds, name)
    return v - 1 if name in ("delta3", "delta4") else v


def _fixed_value(M, lam):
    w1, w2 = eigvec2(M, lam)
    return -w1 / (w1 + w2)


def _validate(p: ParamSet, name: str) -> tuple[str, str, bool, dict]:
    """Cross-check at a located root; ``p`` may carry mpmath values."""
    ds = derived_scalars(p)
    sw = switching_thetas(p)
    lo_switch = sw[0]
    if name in ("nu3", "mu3"):
        M = full_matrix(p, "C3", 2).entries
        th = _fixed_value(M, M[0, 0])
        target = lo_switch if name == "nu3" else sw[-1]
        gap = abs(th - target)
        return "border_collision", "C3: theta3*", gap <= 1e-9, {"theta3*": float(th), "switch": float(target)}
    if name == "nu4":
        M = full_matrix(p, "C4", 2).entries
        th = _fixed_value(M, M[1, 1])
        gap = abs(th - lo_switch)
        details = {"theta4*": float(th), "switch": float(lo_switch)}
        if p.kind is NetworkKind.DELTA_CLIQUE and ds.omega34 >= 0:
            M34 = full_matrix(p, "C34", 2).entries
            root = ds.omega34 ** 0.5
            best = min(abs(_fixed_value(M34, (ds.tau34 + s * root) / 2) - lo_switch) for s in (1, -1))
            details["theta34_gap"] = float(best)
        return "border_collision", "C4: theta4*", gap <= 1e-9, details
    if name in ("delta3", "delta4"):
        cyc = "C" + name[-1]
        M = full_matrix(p, cyc, 2).entries
        lam = M[0, 0] if cyc == "C3" else M[1, 1]
        th = _fixed_value(M, lam)
        end = 0 if cyc == "C3" else -1
        if lam == 1:
            th = end
        ok = abs(th - end) <= 1e-8
        return "transcritical", f"{cyc}: theta{cyc[1:]}*", ok, {f"theta{cyc[1:]}*": float(th)}
    # fold
    M = full_matrix(p, "C34", 2).entries
    root = max(ds.omega34, 0) ** 0.5
    tp = _fixed_value(M, (ds.tau34 + root) / 2)
    tm = _fixed_value(M, (ds.tau34 - root) / 2)
    zeta = ds.zeta34
    tc = (2 * ds.alpha2 + ds.alpha4 - ds.alpha1) / (2 * zeta)
    lam = (ds.tau34 + root) / 2
    df = ds.delta34 / (ds.tau34 * lam - ds.delta34)
    f = build_projected_map(ParamSet(p.kind, {k: float(v) for k, v in p.values.items()}))
    br = f.branch("C34")
    ok = abs(tp - tc) <= 1e-8 and abs(tm - tc) <= 1e-8 and abs(df - 1) <= 1e-6
    adm = br.contains(float(tc))
    details = {"theta34*": float(tp), "theta34-": float(tm), "theta34c": float(tc), "derivative": float(df),
               "beta34": float(ds.beta34), "zeta34": float(zeta), "admissible": adm}
    return "fold", "C34: theta34* = theta34-", ok, details


def _refine(p_base: ParamSet, key: str, lo: float, hi: float, name: str, dps: int = 50):
    """Bisection in extended precision for a sign change of indicator ``name``."""
    with mpmath.workdps(dps):
        vals = {k: mpmath.mpf(v) for k, v in p_base.values.items()}

        def g(x):
            vals[key] = x
            return _indicator(derived_scalars(ParamSet(p_base.kind, vals)), name)

        a, b = mpmath.mpf(lo), mpmath.mpf(hi)
        ga = g(a)
        x, gx = a, ga
        for _ in range(BISECT_MAX):
            x = (a + b) / 2
            gx = g(x)
            if gx == 0 or abs(gx) <= mpmath.mpf(10) ** (-(dps - 10)):
                break
            if (gx > 0) == (ga > 0):
                a, ga = x, gx
            else:
                b = x
        vals[key] = x
        kind, subject, ok, details = _validate(ParamSet(p_base.kind, vals), name)
        return float(x), float(abs(gx)), kind, subject, ok, details


def detect_bifurcations(p_base: ParamSet, key: str, interval: tuple[float, float],
                        samples: int = 101) -> list[BifurcationEvent]:
    lo, hi = interval
    if not 0 < lo < hi:
        raise ValueError("interval must be positive and increasing")
    if normalize_key(key) not in p_base.values:
        raise KeyError(f"{key} is not a parameter of {p_base.kind.value}")
    key = normalize_key(key)
    grid = np.linspace(lo, hi, samples)
    names = _INDICATORS[p_base.kind]
    table = []
    for x in grid:
        ds = derived_scalars(p_base.replace(**{key: float(x)}))
        table.append([float(_indicator(ds, n)) for n in names])
    table = np.array(table)
    events = []
    for col, name in enumerate(names):
        g = table[:, col]
        for s in range(samples - 1):
            if g[s] == 0 or np.sign(g[s]) == np.sign(g[s + 1]):
                continue
            locus, res, kind, subject, ok, details = _refine(p_base, key, grid[s], grid[s + 1], name)
            events.append(BifurcationEvent(kind, locus, subject, name, res, ok, details))
    events.sort(key=lambda e: (e.locus, e.indicator))
    return events


def _scan_cell(args):
    kind, values, k1, v1, k2, v2 = args
    vals = dict(values)
    vals[k1] = v1
    vals[k2] = v2
    p = ParamSet(kind, vals)
    ds = derived_scalars(p).to_dict()
    verdicts = {name: c.verdict for name, c in classify_all(p).items()}
    signs = {k: ds[k] for k in ("delta3", "nu3", "mu3", "delta4", "nu4", "tau34", "omega34", "zeta34", "beta34")
             if k in ds}
    return {"axis1": v1, "axis2": v2, "verdicts": verdicts, "signs": signs}


def worker_count() -> int:
    env = os.environ.get("HETERONET_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def scan_plane(p_base: ParamSet, axis1: tuple[str, float, float, int], axis2: tuple[str, float, float, int],
               workers: int | None = None) -> list[dict]:
    """Classify every cycle on a rectangular grid of two parameters.

    Cells are returned row-major (axis1 outer) whatever the worker count.
    """
    k1, a1, b1, n1 = axis1
    k2, a2, b2, n2 = axis2
    k1, k2 = normalize_key(k1), normalize_key(k2)
    for k in (k1, k2):
        if k not in p_base.values:
            raise KeyError(f"{k} is not a parameter of {p_base.kind.value}")
    if k1 == k2:
        raise ValueError("scan axes must be distinct parameters")
    values = p_base.as_floats()
    jobs = [(p_base.kind, values, k1, float(x), k2, float(y))
            for x in np.linspace(a1, b1, n1) for y in np.linspace(a2, b2, n2)]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) < 2000:
        return [_scan_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_scan_cell, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
