"""The projected map on the segment S = (-1, 0).

A direction ``(X3, X4)`` in the open negative orthant of an incoming section
at the splitting equilibrium ``xi_2`` is represented by
``theta = -X3 / (X3 + X4)``.  Each full return matrix acts on directions as
a Mobius transformation of ``theta``; gluing these branches over the
regions that lead to each cycle gives a piecewise-Mobius map of S.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .network import NetworkKind, ParamSet
from .transition import TransitionMatrix, basic_matrix, full_matrix

SWITCH_TOL = 1e-13
CONVERGENCE_TOL = 1e-12
ENDPOINT_TOL = 1e-9
MAX_STEPS = 10_000


class Admissibility(str, Enum):
    ADMISSIBLE = "admissible"
    VIRTUAL_OTHER = "virtual-in-other-domain"
    VIRTUAL_OUTSIDE = "virtual-outside-S"


class Stability(str, Enum):
    ATTRACTING = "attracting"
    REPELLING = "repelling"
    NEUTRAL = "neutral"


class _Halt:
    """Marker returned by :func:`evaluate` on a switching point."""

    reason = "on switching manifold"

    def __repr__(self) -> str:
        return "HALT"


HALT = _Halt()


def project(X) -> float:
    x3, x4 = float(X[0]), float(X[1])
    if not (x3 < 0 and x4 < 0):
        raise ValueError("projection needs both components strictly negative")
    return -x3 / (x3 + x4)


def lift(theta: float) -> np.ndarray:
    """Point of S as the log-coordinate vector (theta, -1 - theta)."""
    return np.array([theta, -1.0 - theta])


def slope_to_theta(a: float) -> float:
    return -1.0 / (1.0 + a)


def theta_to_slope(theta: float) -> float:
    return -(1.0 + theta) / theta


@dataclass(frozen=True)
class MobiusBranch:
    """``theta -> (a theta + b) / (c theta + d)`` on the open interval ``(lo, hi)``."""

    a: float
    b: float
    c: float
    d: float
    lo: float
    hi: float
    label: str
    source: TransitionMatrix | None = field(default=None, repr=False)

    def __call__(self, theta):
        return (self.a * theta + self.b) / (self.c * theta + self.d)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def derivative(self, theta):
        den = self.c * theta + self.d
        return self.det / (den * den)

    def inverse(self, y):
        return (self.d * y - self.b) / (self.a - self.c * y)

    def contains(self, theta: float) -> bool:
        return self.lo < theta < self.hi

    def pole(self) -> float | None:
        if self.c == 0:
            return None
        return -self.d / self.c


def branch_from_matrix(M, label: str = "", lo: float = -1.0, hi: float = 0.0) -> MobiusBranch:
    """Action of a 2x2 matrix on directions, written in the theta coordinate.

    With ``M (theta, -1-theta) = (u, v)`` the image direction is
    ``-u / (u + v)``, which collects into Mobius coefficients.
    """
    src = M if isinstance(M, TransitionMatrix) else None
    m = M.entries if src is not None else np.asarray(M)
    (m11, m12), (m21, m22) = m
    if m11 * m22 - m12 * m21 == 0:
        raise ValueError(f"singular matrix for branch {label or '?'}")
    a = m12 - m11
    b = m12
    c = m11 - m12 + m21 - m22
    d = -m12 - m22
    return MobiusBranch(a, b, c, d, lo, hi, label, src)


def switching_thetas(p: ParamSet) -> tuple[float, ...]:
    """Switch points of S in increasing order.

    At ``xi_2`` a direction leaves toward ``xi_3`` or ``xi_4`` depending on
    which coordinate reaches the exit section first; the tie is the ray
    ``(X3, X4) ~ (e_23, e_24)``.  In the tournament network the split at
    ``xi_3`` (ties along ``(X1, X4) ~ (e_31, e_34)``) is pulled back to
    ``xi_2`` through ``m_123``.
    """
    e23, e24 = p["e_23"], p["e_24"]
    out = [-e23 / (e23 + e24)]
    if p.kind is NetworkKind.TOURNAMENT:
        (a, b), (c, d) = basic_matrix(p, 1, 2, 3).entries
        u, v = -p["e_31"], -p["e_34"]
        det = a * d - b * c
        x3, x4 = (d * u - b * v) / det, (a * v - c * u) / det
        out.append(-x3 / (x3 + x4))
    return tuple(sorted(out))


_LAYOUT = {
    NetworkKind.KIRK_SILBER: ("C4", "C3"),
    NetworkKind.DELTA_CLIQUE: ("C4", "C34"),
    NetworkKind.TOURNAMENT: ("C4", "C34", "C3"),
}


@dataclass(frozen=True)
class ProjectedMap:
    kind: NetworkKind
    params: ParamSet = field(repr=False)
    branches: tuple[MobiusBranch, ...]
    switch_points: tuple[float, ...]

    def branch(self, label: str) -> MobiusBranch:
        for br in self.branches:
            if br.label == label:
                return br
        raise KeyError(f"no branch {label!r} in {self.kind.value} map")

    def owner(self, theta: float) -> MobiusBranch | None:
        for br in self.branches:
            if br.contains(theta):
                return br
        return None

    def __call__(self, theta: float):
        return evaluate(self, theta)


def build_projected_map(p: ParamSet) -> ProjectedMap:
    labels = _LAYOUT[p.kind]
    cuts = (-1.0,) + switching_thetas(p) + (0.0,)
    branches = []
    for label, lo, hi in zip(labels, cuts[:-1], cuts[1:]):
        br = branch_from_matrix(full_matrix(p, label, 2), label, lo, hi)
        pole = br.pole()
        if pole is not None and lo <= pole <= hi:
            raise ValueError(f"branch {label} has a pole at {pole!r} inside its domain [{lo}, {hi}]")
        branches.append(br)
    return ProjectedMap(p.kind, p, tuple(branches), cuts[1:-1])


def evaluate(f: ProjectedMap, theta: float):
    """Apply the owning branch, or return :data:`HALT` on a switch point."""
    if not (-1.0 < theta < 0.0):
        raise ValueError(f"theta={theta!r} is outside S=(-1,0)")
    for s in f.switch_points:
        if abs(theta - s) <= SWITCH_TOL:
            return HALT
    br = f.owner(theta)
    return br(theta)


@dataclass
class Orbit:
    values: list[float]
    labels: list[str]
    halt_reason: str

    def blocks(self) -> list[str]:
        """Cycle label of each step taken (the predicted cycle itinerary)."""
        return list(self.labels)


def iterate(f: ProjectedMap, theta0: float, max_steps: int = MAX_STEPS,
            tol: float = CONVERGENCE_TOL, endpoint_tol: float = ENDPOINT_TOL,
            stop_on_convergence: bool = True) -> Orbit:
    values = [float(theta0)]
    labels: list[str] = []
    theta = float(theta0)
    reason = "max_steps"
    for _ in range(max_steps):
        if theta <= -1.0 + endpoint_tol or theta >= -endpoint_tol:
            reason = "escape_endpoint"
            break
        nxt = evaluate(f, theta)
        if nxt is HALT:
            reason = "switching_manifold"
            break
        labels.append(f.owner(theta).label)
        values.append(float(nxt))
        if stop_on_convergence and abs(nxt - theta) < tol:
            reason = "converged"
            break
        theta = float(nxt)
    return Orbit(values, labels, reason)


@dataclass(frozen=True)
class FixedPointReport:
    name: str
    branch: str
    exists: bool
    value: float | None = None
    eigenvalue: float | None = None
    derivative: float | None = None
    stability: Stability | None = None
    admissibility: Admissibility | None = None
    note: str = ""

    def to_dict(self) -> dict:
        out = {"name": self.name, "branch": self.branch, "exists": self.exists}
        if self.exists:
            out.update(value=self.value, eigenvalue=self.eigenvalue, derivative=self.derivative,
                       stability=self.stability.value, admissibility=self.admissibility.value)
        if self.note:
            out["note"] = self.note
        return out


def eigvec2(m, lam):
    """Eigenvector of a 2x2 matrix for eigenvalue ``lam``.

    Both rows of ``M - lam I`` give a candidate; the larger one is the
    better conditioned.
    """
    (m11, m12), (m21, m22) = m
    u = (m12, lam - m11)
    v = (lam - m22, m21)
    if u[0] * u[0] + u[1] * u[1] >= v[0] * v[0] + v[1] * v[1]:
        return u
    return v


def _classify_value(f: ProjectedMap, br: MobiusBranch, value: float) -> Admissibility:
    if br.contains(value):
        return Admissibility.ADMISSIBLE
    if -1.0 < value < 0.0:
        return Admissibility.VIRTUAL_OTHER
    return Admissibility.VIRTUAL_OUTSIDE


def _stability(df: float) -> Stability:
    if abs(df - 1.0) <= 1e-12:
        return Stability.NEUTRAL
    return Stability.ATTRACTING if abs(df) < 1.0 else Stability.REPELLING


def _branch_eigenpairs(br: MobiusBranch):
    """(name suffix, eigenvalue) pairs; None when eigenvalues are complex."""
    (m11, m12), (m21, m22) = br.source.entries
    det = m11 * m22 - m12 * m21
    if br.label == "C3":
        # Lower triangular, diag (delta3, 1): read eigenvalues off exactly.
        return [("*", m11), ("-", m22)]
    if br.label == "C4":
        return [("*", m22), ("-", m11)]
    tau = m11 + m22
    omega = tau * tau - 4 * det
    if omega < 0:
        return None
    root = math.sqrt(omega)
    return [("*", (tau + root) / 2), ("-", (tau - root) / 2)]


def fixed_point_of(br: MobiusBranch, which: str):
    """Value of the fixed point ``which`` in {'*', '-'} of a branch, or None."""
    pairs = _branch_eigenpairs(br)
    if pairs is None:
        return None, None
    lam = dict(pairs)[which]
    w1, w2 = eigvec2(br.source.entries, lam)
    s = w1 + w2
    if s == 0:
        return math.copysign(math.inf, -w1) if w1 else math.nan, lam
    value = -w1 / s
    if math.isfinite(value):
        g = br(value) - value
        dg = br.derivative(value) - 1.0
        if g != 0 and abs(dg) > 1e-8:
            cand = value - g / dg
            if abs(br(cand) - cand) < abs(g):
                value = cand
    return value, lam


def fixed_points(f: ProjectedMap) -> list[FixedPointReport]:
    out = []
    for br in f.branches:
        suffix = br.label[1:]
        pairs = _branch_eigenpairs(br)
        if pairs is None:
            for which in ("*", "-"):
                out.append(FixedPointReport(f"theta{suffix}{which}", br.label, False,
                                            note="fold not yet occurred (complex eigenvalues)"))
            continue
        for which, _ in pairs:
            value, lam = fixed_point_of(br, which)
            name = f"theta{suffix}{which}"
            if not math.isfinite(value):
                out.append(FixedPointReport(name, br.label, True, value, float(lam), math.nan, Stability.NEUTRAL,
                                            Admissibility.VIRTUAL_OUTSIDE, note="at infinity"))
                continue
            df = br.derivative(value)
            out.append(FixedPointReport(name, br.label, True, float(value), float(lam), float(df),
                                        _stability(df), _classify_value(f, br, value)))
    return out


def fixed_point(f: ProjectedMap, name: str) -> FixedPointReport:
    for fp in fixed_points(f):
        if fp.name == name:
            return fp
    raise KeyError(name)


@dataclass(frozen=True)
class AdmissibilityEntry:
    report: FixedPointReport
    conditions: dict[str, float]


def admissibility_region(p: ParamSet) -> list[AdmissibilityEntry]:
    """Each fixed point with the sign quantities that govern its admissibility."""
    from .transition import derived_scalars

    ds = derived_scalars(p).to_dict()
    f = build_projected_map(p)
    governing = {
        "C3": ("delta3", "rho3", "nu3", "mu3"),
        "C4": ("delta4", "rho4", "nu4"),
        "C34": ("tau34", "zeta34", "beta34", "omega34", "nu4"),
    }
    out = []
    for fp in fixed_points(f):
        conds = {k: ds[k] for k in governing[fp.branch] if k in ds}
        if fp.branch == "C3":
            conds["delta3+rho3-1"] = ds["delta3"] + ds["rho3"] - 1
        out.append(AdmissibilityEntry(fp, conds))
    return out


@dataclass
class PreimageList:
    values: list[float]
    truncated: str | None = None


def preimages_of_switch(f: ProjectedMap, branch: str, n_max: int, switch: float | None = None) -> PreimageList:
    """Points E_0 = switch, E_{n+1} = branch^{-1}(E_n) inside the branch domain."""
    br = f.branch(branch)
    if switch is None:
        inside = [x for x in (br.lo, br.hi) if -1.0 < x < 0.0]
        if not inside:
            raise ValueError(f"branch {branch} has no switch point on its boundary")
        switch = inside[0]
    values = [switch]
    for _ in range(n_max):
        den = br.a - br.c * values[-1]
        if den == 0:
            return PreimageList(values, "pole")
        nxt = br.inverse(values[-1])
        if not br.contains(nxt):
            return PreimageList(values, f"pre-image {nxt!r} leaves domain ({br.lo}, {br.hi})")
        values.append(nxt)
    return PreimageList(values)


@dataclass(frozen=True)
class ContinuityEntry:
    switch: float
    left_branch: str
    right_branch: str
    left: float
    right: float
    continuous: bool


def continuity_report(f: ProjectedMap, rtol: float = 1e-12) -> list[ContinuityEntry]:
    out = []
    for s in f.switch_points:
        left = next(br for br in f.branches if br.hi == s)
        right = next(br for br in f.branches if br.lo == s)
        lv, rv = left(s), right(s)
        ok = abs(lv - rv) <= rtol * max(1.0, abs(lv))
        out.append(ContinuityEntry(s, left.label, right.label, float(lv), float(rv), bool(ok)))
    return out


@dataclass(frozen=True)
class SlopeCheck:
    a: float
    h: float
    residual: float
    branch: str


def slope_map_check(p: ParamSet, a: float, f: ProjectedMap | None = None) -> SlopeCheck:
    """Evaluate the slope map ``h`` and its conjugacy residual with ``f``.

    A ray ``X4 = a X3`` is carried by ``M`` to the ray of slope
    ``(m21 + m22 a) / (m11 + m12 a)``; under ``theta = -1/(1+a)`` this must
    agree with the projected map.
    """
    if not a > 0:
        raise ValueError("slope must be positive")
    f = f or build_projected_map(p)
    theta = slope_to_theta(a)
    for s in f.switch_points:
        if abs(theta - s) <= SWITCH_TOL:
            raise ValueError(f"slope {a!r} lies on a switching ray")
    br = f.owner(theta)
    (m11, m12), (m21, m22) = br.source.entries
    h = (m21 + m22 * a) / (m11 + m12 * a)
    residual = abs(h - theta_to_slope(br(theta)))
    return SlopeCheck(a, float(h), float(residual), br.label)


def cusp_alpha_star(p: ParamSet, theta: float, eps: float = 0.01) -> float:
    """Smallest scale such that ``alpha (theta, -1-theta)`` avoids the excluded cusp.

    The cusp sits around the switching ray at ``xi_2``; beyond ``alpha*``
    the point is committed to one exit before reaching the outgoing section.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if not -1.0 < theta < 0.0:
        raise ValueError("theta outside S")
    r = p["e_24"] / p["e_23"]
    ts = -1.0 / (1.0 + r)
    if abs(theta - ts) <= SWITCH_TOL:
        raise ValueError("theta is the switching point; the half-line is undefined")
    log = math.log1p(-eps)
    if theta > ts:
        return -log / (r * theta + 1.0 + theta)
    return log / (theta + (1.0 + theta) / r)


def sample_map(f: ProjectedMap, n: int = 1001) -> list[tuple[float, float, str]]:
    """Grid samples ``(theta, f(theta), label)`` on S, skipping switch points."""
    rows = []
    for theta in np.linspace(-1.0, 0.0, n + 2)[1:-1]:
        val = evaluate(f, float(theta))
        if val is HALT:
            continue
        rows.append((float(theta), float(val), f.owner(theta).label))
    return rows


def evaluate_array(f: ProjectedMap, thetas: np.ndarray) -> np.ndarray:
    """Vectorized :func:`evaluate`; NaN marks switch points and points outside S."""
    x = np.asarray(thetas, dtype=float)
    out = np.full(x.shape, np.nan)
    for br in f.branches:
        mask = (x > br.lo) & (x < br.hi)
        xm = x[mask]
        out[mask] = (br.a * xm + br.b) / (br.c * xm + br.d)
    for s in f.switch_points:
        out[np.abs(x - s) <= SWITCH_TOL] = np.nan
    return out


def find_periodic_orbits(f: ProjectedMap, period: int, n_grid: int = 10_000, tol: float = 1e-6) -> np.ndarray:
    """Grid points whose ``period``-fold image returns within ``tol`` but that are not fixed.

    A point counts as a candidate of exact period ``period`` when
    ``|f^period(theta) - theta| < tol`` while ``|f^k(theta) - theta| >= tol``
    for every proper divisor ``k`` of ``period``.
    """
    grid = np.linspace(-1.0, 0.0, n_grid + 2)[1:-1]
    images = [grid]
    x = grid
    for _ in range(period):
        x = evaluate_array(f, x)
        images.append(x)
    with np.errstate(invalid="ignore"):
        hit = np.abs(images[period] - grid) < tol
        for k in range(1, period):
            if period % k == 0:
                hit &= ~(np.abs(images[k] - grid) < tol)
    return grid[hit]
