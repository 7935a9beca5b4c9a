"""Transition matrices of the return maps around each cycle.

A basic map ``phi_ijk`` takes the incoming cross-section at ``xi_j`` (arriving
from ``xi_i``) to the incoming cross-section at ``xi_k``.  In logarithmic
coordinates it is linear.  Coordinates on the section at ``xi_j`` coming
from ``xi_i`` are the two remaining log coordinates in ascending index
order.  Passing ``xi_j`` and leaving toward ``xi_k`` takes time
``-X_k / e_jk``, so every other coordinate ``X_q`` picks up
``-(lambda_jq / lambda_jk) X_k``, where ``lambda_jq`` is the eigenvalue at
``xi_j`` in direction ``q``.  Order-1 constants of the global maps do not
enter the exponents and are dropped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .network import EQUILIBRIA, NetworkKind, ParamSet, build_topology, eigenvalue


@dataclass(frozen=True)
class TransitionMatrix:
    entries: np.ndarray = field(repr=False)
    tag: str

    def __post_init__(self):
        self.entries.setflags(write=False)

    def __matmul__(self, other: "TransitionMatrix") -> "TransitionMatrix":
        return TransitionMatrix(self.entries @ other.entries, f"{self.tag}*{other.tag}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.entries.shape

    def tolist(self) -> list[list[float]]:
        return [[float(x) for x in row] for row in self.entries]


def _array(rows) -> np.ndarray:
    arr = np.array(rows)
    if arr.dtype == object:
        return arr
    return arr.astype(float)


def section_coords(i: int, j: int) -> tuple[int, int]:
    """Log coordinates on the incoming section at ``xi_j`` from ``xi_i``."""
    return tuple(sorted(set(EQUILIBRIA) - {i, j}))


def basic_matrix(p: ParamSet, i: int, j: int, k: int) -> TransitionMatrix:
    topo = build_topology(p.kind)
    if (i, j) not in topo.edges or (j, k) not in topo.edges:
        raise ValueError(f"({i},{j},{k}) is not a pair of consecutive edges of {p.kind.value}")
    if not any(_consecutive(c, i, j, k) for c in topo.cycles.values()):
        raise ValueError(f"({i},{j},{k}) does not lie on a cycle of {p.kind.value}")
    inc = section_coords(i, j)
    out = section_coords(j, k)
    lead = eigenvalue(p, j, k)
    rows = []
    for q in out:
        row = []
        for s in inc:
            if s == k:
                row.append(-eigenvalue(p, j, q) / lead)
            else:
                row.append(1 if s == q else 0)
        rows.append(row)
    return TransitionMatrix(_array(rows), f"m{i}{j}{k}")


def _consecutive(cycle: tuple[int, ...], i: int, j: int, k: int) -> bool:
    n = len(cycle)
    return any(cycle[r] == i and cycle[(r + 1) % n] == j and cycle[(r + 2) % n] == k for r in range(n))


def cycle_triples(p: ParamSet, cycle: str, base: int) -> list[tuple[int, int, int]]:
    """Basic-map triples of ``cycle`` in the order they act, starting at ``base``."""
    seq = build_topology(p.kind).cycle(cycle)
    if base not in seq:
        raise ValueError(f"equilibrium {base} is not on cycle {cycle}")
    n = len(seq)
    r = seq.index(base)
    return [(seq[(r + s - 1) % n], seq[(r + s) % n], seq[(r + s + 1) % n]) for s in range(n)]


def full_matrix(p: ParamSet, cycle: str, base: int = 2) -> TransitionMatrix:
    """Return map around ``cycle`` on the incoming section at ``xi_base``."""
    triples = cycle_triples(p, cycle, base)
    m = basic_matrix(p, *triples[0]).entries
    for t in triples[1:]:
        m = basic_matrix(p, *t).entries @ m
    return TransitionMatrix(m, f"M{base}({cycle[1:]})")


def negative_entry_bases(p: ParamSet, cycle: str) -> list[int]:
    """Bases ``k`` of basic maps ``m_ijk`` of the cycle with a negative entry."""
    seq = build_topology(p.kind).cycle(cycle)
    out = []
    for i, j, k in cycle_triples(p, cycle, seq[0]):
        if np.any(basic_matrix(p, i, j, k).entries.astype(float) < 0):
            out.append(k)
    return sorted(out)


@dataclass(frozen=True)
class DerivedScalars:
    delta3: float | None = None
    rho3: float | None = None
    nu3: float | None = None
    mu3: float | None = None
    delta4: float | None = None
    rho4: float | None = None
    nu4: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None
    alpha3: float | None = None
    alpha4: float | None = None
    tau34: float | None = None
    delta34: float | None = None
    omega34: float | None = None
    lambda34_plus: float | None = None
    lambda34_minus: float | None = None
    zeta34: float | None = None
    beta34: float | None = None

    def to_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.__dict__.items() if v is not None}


def derived_scalars(p: ParamSet) -> DerivedScalars:
    """Scalars read off the full transition matrices (products of basic maps)."""
    cycles = build_topology(p.kind).cycles
    vals: dict[str, object] = {}
    if "C3" in cycles:
        m2 = full_matrix(p, "C3", 2).entries
        vals["delta3"] = m2[0, 0]
        vals["rho3"] = m2[1, 0]
        vals["nu3"] = full_matrix(p, "C3", 3).entries[1, 0]
        if p.kind is NetworkKind.TOURNAMENT:
            vals["mu3"] = full_matrix(p, "C3", 1).entries[1, 0]
    if "C4" in cycles:
        m2 = full_matrix(p, "C4", 2).entries
        vals["rho4"] = m2[0, 1]
        vals["delta4"] = m2[1, 1]
        vals["nu4"] = full_matrix(p, "C4", 4).entries[1, 0]
    if "C34" in cycles:
        (a1, a2), (a3, a4) = full_matrix(p, "C34", 2).entries
        tau = a1 + a4
        # det M is the product of the basic determinants; a1 a4 - a2 a3 cancels badly.
        det = 1
        for tri in cycle_triples(p, "C34", 2):
            (b11, b12), (b21, b22) = basic_matrix(p, *tri).entries
            det = det * (b11 * b22 - b12 * b21)
        omega = tau * tau - 4 * det
        vals.update(alpha1=a1, alpha2=a2, alpha3=a3, alpha4=a4, tau34=tau, delta34=det, omega34=omega)
        if omega >= 0:
            root = omega ** 0.5
            vals["lambda34_plus"] = (tau + root) / 2
            vals["lambda34_minus"] = (tau - root) / 2
        vals["zeta34"] = a1 - a2 + a3 - a4
        r = p["e_24"] / p["e_23"]
        vals["beta34"] = a3 + (a1 - a4) / 2 + r * (a2 + (a4 - a1) / 2)
    return DerivedScalars(**vals)


def closed_form_scalars(p: ParamSet) -> dict[str, float]:
    """Published closed-form expressions, used only as a cross-check.

    The tournament expressions here are corrected to agree with the matrix
    products; the uncorrected printed forms do not.
    """
    g = p.values
    kind = p.kind
    out: dict[str, float] = {}
    if kind is NetworkKind.KIRK_SILBER:
        c13, c14, c21, c32, c42 = (g[k] for k in ("c_13", "c_14", "c_21", "c_32", "c_42"))
        e12, e23, e24, e31, e41 = (g[k] for k in ("e_12", "e_23", "e_24", "e_31", "e_41"))
        t34, t43 = g["t_34"], g["t_43"]
        out["delta3"] = c13 * c21 * c32 / (e12 * e23 * e31)
        out["delta4"] = c14 * c21 * c42 / (e12 * e24 * e41)
        out["rho3"] = -e24 / e23 + c21 * t34 / (e23 * e31) + c14 * c21 * c32 / (e12 * e23 * e31)
        out["rho4"] = -e23 / e24 + c21 * t43 / (e24 * e41) + c13 * c21 * c42 / (e12 * e24 * e41)
        out["nu3"] = t34 / e31 + c14 * c32 / (e12 * e31) - c13 * c32 * e24 / (e12 * e23 * e31)
        out["nu4"] = t43 / e41 + c13 * c42 / (e12 * e41) - c14 * c42 * e23 / (e12 * e24 * e41)
    elif kind is NetworkKind.DELTA_CLIQUE:
        c14, c21, c32, c42, c43 = (g[k] for k in ("c_14", "c_21", "c_32", "c_42", "c_43"))
        e12, e23, e24, e34, e41 = (g[k] for k in ("e_12", "e_23", "e_24", "e_34", "e_41"))
        t13, t31 = g["t_13"], g["t_31"]
        out["alpha1"] = (c21 * c43 / (e23 * e41) + c21 * c42 * t13 / (e23 * e41 * e12)
                         - c32 * e24 * t13 / (e34 * e23 * e12) - c43 * e24 * t31 / (e41 * e23 * e34)
                         - c42 * e24 * t13 * t31 / (e41 * e23 * e12 * e34))
        out["alpha2"] = c32 * t13 / (e34 * e12) + c43 * t31 / (e41 * e34) + c42 * t13 * t31 / (e41 * e12 * e34)
        out["alpha3"] = (c14 * c21 * c42 / (e12 * e23 * e41) - c14 * c32 * e24 / (e12 * e34 * e23)
                         - c14 * c42 * e24 * t31 / (e12 * e41 * e23 * e34))
        out["alpha4"] = c14 * c32 / (e12 * e34) + c14 * c42 * t31 / (e12 * e41 * e34)
        out["delta34"] = c14 * c21 * c32 * c43 / (e12 * e23 * e34 * e41)
        out["delta4"] = c14 * c21 * c42 / (e12 * e24 * e41)
        out["rho4"] = -e23 / e24 + c21 * c43 / (e24 * e41) + c21 * c42 * t13 / (e24 * e41 * e12)
        out["nu4"] = c43 / e41 + c42 * t13 / (e41 * e12) - c14 * c42 * e23 / (e12 * e41 * e24)
    else:
        c13, c14, c21, c32, c42, c43 = (g[k] for k in ("c_13", "c_14", "c_21", "c_32", "c_42", "c_43"))
        e12, e23, e24, e31, e34, e41 = (g[k] for k in ("e_12", "e_23", "e_24", "e_31", "e_34", "e_41"))
        out["delta3"] = c13 * c21 * c32 / (e12 * e23 * e31)
        out["rho3"] = -e24 / e23 - c21 * e34 / (e23 * e31) + c14 * c21 * c32 / (e12 * e23 * e31)
        out["mu3"] = c14 / e12 - c13 * e24 / (e12 * e23) - c13 * c21 * e34 / (e12 * e23 * e31)
        out["alpha1"] = (c21 * c43 / (e23 * e41) + c13 * c21 * c42 / (e12 * e23 * e41)
                         + c43 * e24 * e31 / (e41 * e23 * e34) + c13 * c42 * e24 * e31 / (e12 * e41 * e23 * e34)
                         - c13 * c32 * e24 / (e12 * e34 * e23))
        out["alpha2"] = c32 * c13 / (e12 * e34) - c43 * e31 / (e41 * e34) - c13 * c42 * e31 / (e12 * e41 * e34)
        out["alpha3"] = (c14 * c21 * c42 / (e12 * e23 * e41) + c14 * c42 * e24 * e31 / (e12 * e41 * e23 * e34)
                         - c14 * c32 * e24 / (e12 * e34 * e23))
        out["alpha4"] = c14 * c32 / (e12 * e34) - c14 * c42 * e31 / (e12 * e41 * e34)
        out["delta34"] = c14 * c21 * c32 * c43 / (e12 * e23 * e34 * e41)
        out["delta4"] = c14 * c21 * c42 / (e12 * e24 * e41)
        out["rho4"] = -e23 / e24 + c21 * c43 / (e24 * e41) + c13 * c21 * c42 / (e24 * e41 * e12)
        out["nu4"] = c43 / e41 + c13 * c42 / (e12 * e41) - c14 * c42 * e23 / (e12 * e41 * e24)
    return out


def crosscheck(p: ParamSet, rtol: float = 1e-12) -> dict[str, tuple[float, float, bool]]:
    """Compare product-derived scalars with closed forms: name -> (product, closed, ok)."""
    derived = derived_scalars(p).to_dict()
    out = {}
    for name, closed in closed_form_scalars(p).items():
        prod = derived[name]
        ok = abs(prod - closed) <= rtol * max(1.0, abs(closed))
        out[name] = (prod, float(closed), ok)
    return out


def general_split_matrices(n: int, p: Mapping[str, float]) -> tuple[TransitionMatrix, TransitionMatrix]:
    """Basic maps leaving a splitting equilibrium ``xi_2`` of an n-equilibrium cycle pair.

    ``p`` holds ``c_21, e_23, e_24`` and transverse magnitudes ``t_25..t_2n``.
    Both matrices act on the section coordinates ``(X3, X4, X5, ..., Xn)``.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    c21, e23, e24 = p["c_21"], p["e_23"], p["e_24"]
    tails = [p[f"t_2{k}"] for k in range(5, n + 1)]
    for name, v in [("c_21", c21), ("e_23", e23), ("e_24", e24)] + [(f"t_2{k}", v) for k, v in zip(range(5, n + 1), tails)]:
        if not v > 0:
            raise ValueError(f"nonpositive: {name}")
    dim = n - 2
    m123 = np.eye(dim)
    m123[:, 0] = [c21 / e23, -e24 / e23] + [t / e23 for t in tails]
    m124 = np.eye(dim)
    m124[:, 1] = [-e23 / e24, c21 / e24] + [t / e24 for t in tails]
    return TransitionMatrix(m123, "m123"), TransitionMatrix(m124, "m124")


def all_matrices(p: ParamSet) -> dict[str, list[list[float]]]:
    """Every basic and full matrix of the network, keyed by tag."""
    topo = build_topology(p.kind)
    out: dict[str, list[list[float]]] = {}
    for name, seq in topo.cycles.items():
        for base in seq:
            for t in cycle_triples(p, name, base):
                m = basic_matrix(p, *t)
                out.setdefault(m.tag, m.tolist())
        for base in seq:
            m = full_matrix(p, name, base)
            out[m.tag] = m.tolist()
    return out
