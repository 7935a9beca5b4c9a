"""Network topologies, eigenvalue parameters and eigenvalue classification.

Each network lives in R^4 with a saddle equilibrium on every positive
coordinate axis.  The vector field has the form

    x_j' = x_j (1 - |x|^2 + sum_{k != j} a_kj x_k^2)

and the coefficient ``a_kj`` is the eigenvalue of the linearization at the
equilibrium ``xi_k`` in the direction ``x_j``.  Parameters are stored as
positive magnitudes named ``c_kj`` (contracting), ``e_kj`` (expanding) and
``t_kj`` (transverse); the sign lives in the coefficient table.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

EQUILIBRIA = (1, 2, 3, 4)


class NetworkKind(str, enum.Enum):
    KIRK_SILBER = "kirk_silber"
    DELTA_CLIQUE = "delta_clique"
    TOURNAMENT = "tournament"

    @classmethod
    def parse(cls, value: "str | NetworkKind") -> "NetworkKind":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("-", "_")
        aliases = {"ks": "kirk_silber", "dc": "delta_clique", "t": "tournament"}
        text = aliases.get(text, text)
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown network kind: {value!r}") from None


class EigenClass(str, enum.Enum):
    RADIAL = "radial"
    CONTRACTING = "contracting"
    EXPANDING = "expanding"
    TRANSVERSE = "transverse"


# For each equation j: {k: (sign, key)} meaning the term sign * p[key] * x_k^2.
_KS_TABLE = {
    1: {2: (-1, "c_21"), 3: (+1, "e_31"), 4: (+1, "e_41")},
    2: {1: (+1, "e_12"), 3: (-1, "c_32"), 4: (-1, "c_42")},
    3: {1: (-1, "c_13"), 2: (+1, "e_23"), 4: (-1, "t_43")},
    4: {1: (-1, "c_14"), 2: (+1, "e_24"), 3: (-1, "t_34")},
}
_DC_TABLE = {
    1: {2: (-1, "c_21"), 3: (-1, "t_31"), 4: (+1, "e_41")},
    2: {1: (+1, "e_12"), 3: (-1, "c_32"), 4: (-1, "c_42")},
    3: {1: (-1, "t_13"), 2: (+1, "e_23"), 4: (-1, "c_43")},
    4: {1: (-1, "c_14"), 2: (+1, "e_24"), 3: (+1, "e_34")},
}
_T_TABLE = {
    1: {2: (-1, "c_21"), 3: (+1, "e_31"), 4: (+1, "e_41")},
    2: {1: (+1, "e_12"), 3: (-1, "c_32"), 4: (-1, "c_42")},
    3: {1: (-1, "c_13"), 2: (+1, "e_23"), 4: (-1, "c_43")},
    4: {1: (-1, "c_14"), 2: (+1, "e_24"), 3: (+1, "e_34")},
}
COEFFICIENTS: dict[NetworkKind, dict[int, dict[int, tuple[int, str]]]] = {
    NetworkKind.KIRK_SILBER: _KS_TABLE,
    NetworkKind.DELTA_CLIQUE: _DC_TABLE,
    NetworkKind.TOURNAMENT: _T_TABLE,
}

_EDGES = {
    NetworkKind.KIRK_SILBER: ((1, 2), (2, 3), (3, 1), (2, 4), (4, 1)),
    NetworkKind.DELTA_CLIQUE: ((1, 2), (2, 3), (2, 4), (3, 4), (4, 1)),
    NetworkKind.TOURNAMENT: ((1, 2), (2, 3), (3, 1), (2, 4), (4, 1), (3, 4)),
}
_CYCLES = {
    NetworkKind.KIRK_SILBER: {"C3": (1, 2, 3), "C4": (1, 2, 4)},
    NetworkKind.DELTA_CLIQUE: {"C4": (1, 2, 4), "C34": (1, 2, 3, 4)},
    NetworkKind.TOURNAMENT: {"C3": (1, 2, 3), "C4": (1, 2, 4), "C34": (1, 2, 3, 4)},
}


@dataclass(frozen=True)
class Topology:
    kind: NetworkKind
    equilibria: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    cycles: Mapping[str, tuple[int, ...]]
    splitting_equilibria: tuple[int, ...]

    def successors(self, j: int) -> tuple[int, ...]:
        return tuple(b for a, b in self.edges if a == j)

    def cycle(self, name: str) -> tuple[int, ...]:
        try:
            return self.cycles[name]
        except KeyError:
            raise ValueError(f"{self.kind.value} has no cycle {name!r}") from None


def build_topology(kind: NetworkKind | str) -> Topology:
    kind = NetworkKind.parse(kind)
    edges = _EDGES[kind]
    splitting = tuple(j for j in EQUILIBRIA if sum(a == j for a, _ in edges) >= 2)
    return Topology(
        kind=kind,
        equilibria=EQUILIBRIA,
        edges=edges,
        cycles=MappingProxyType(dict(_CYCLES[kind])),
        splitting_equilibria=splitting,
    )


def param_keys(kind: NetworkKind | str) -> tuple[str, ...]:
    """Parameter names appearing in the ODE system of ``kind``, sorted."""
    table = COEFFICIENTS[NetworkKind.parse(kind)]
    return tuple(sorted(key for row in table.values() for _, key in row.values()))


def normalize_key(key: str) -> str:
    """Accept ``c21``, ``c_21`` or ``C_21`` and return ``c_21``."""
    m = re.fullmatch(r"\s*([cetCET])_?(\d)(\d)\s*", key)
    if not m:
        return key.strip()
    return f"{m.group(1).lower()}_{m.group(2)}{m.group(3)}"


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    missing: tuple[str, ...] = ()
    extra: tuple[str, ...] = ()
    nonpositive: tuple[str, ...] = ()

    def messages(self) -> list[str]:
        out = [f"missing: {k}" for k in self.missing]
        out += [f"extra: {k}" for k in self.extra]
        out += [f"nonpositive: {k}" for k in self.nonpositive]
        return out

    def to_dict(self) -> dict:
        return {"ok": self.ok, "errors": self.messages()}


def validate_params(kind: NetworkKind | str, values: Mapping[str, float]) -> ValidationReport:
    required = set(param_keys(kind))
    given = {normalize_key(k): v for k, v in values.items()}
    missing = tuple(sorted(required - given.keys()))
    extra = tuple(sorted(given.keys() - required))
    nonpositive = []
    for k in sorted(required & given.keys()):
        try:
            v = float(given[k])
        except (TypeError, ValueError):
            nonpositive.append(k)
            continue
        if not (v > 0 and math.isfinite(v)):
            nonpositive.append(k)
    ok = not (missing or extra or nonpositive)
    return ValidationReport(ok, missing, extra, tuple(nonpositive))


class ParamError(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__("invalid parameters: " + ", ".join(report.messages()))
        self.report = report


@dataclass(frozen=True)
class ParamSet:
    """Validated, immutable parameter set for one network kind.

    Values may be floats or any numeric type supporting ordinary arithmetic
    (``mpmath.mpf`` is used for high-precision bifurcation refinement).
    """

    kind: NetworkKind
    values: Mapping[str, float] = field(repr=False)

    def __post_init__(self):
        kind = NetworkKind.parse(self.kind)
        vals = {normalize_key(k): v for k, v in dict(self.values).items()}
        report = validate_params(kind, vals)
        if not report.ok:
            raise ParamError(report)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "values", MappingProxyType(vals))

    def __getitem__(self, key: str):
        return self.values[normalize_key(key)]

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in sorted(self.values.items()))
        return f"ParamSet({self.kind.value}: {inner})"

    def replace(self, **updates) -> "ParamSet":
        vals = dict(self.values)
        for k, v in updates.items():
            k = normalize_key(k)
            if k not in vals:
                raise KeyError(f"{k} is not a parameter of {self.kind.value}")
            vals[k] = v
        return ParamSet(self.kind, vals)

    def as_floats(self) -> dict[str, float]:
        return {k: float(v) for k, v in sorted(self.values.items())}

    @classmethod
    def uniform(cls, kind: NetworkKind | str, value: float = 1.0) -> "ParamSet":
        return cls(NetworkKind.parse(kind), {k: value for k in param_keys(kind)})


def eigenvalue(p: ParamSet, at: int, direction: int):
    """Eigenvalue of the linearization at ``xi_at`` along ``x_direction``."""
    if at == direction:
        return -2
    sign, key = COEFFICIENTS[p.kind][direction][at]
    return sign * p[key]


@dataclass(frozen=True)
class EigenInfo:
    key: str | None
    direction: int
    eigenclass: EigenClass
    sign: int
    globally_transverse: bool


def eigen_classes(kind: NetworkKind | str, cycle: str, equilibrium: int) -> dict[str, EigenInfo]:
    """Classify the eigenvalues at ``equilibrium`` relative to ``cycle``.

    The linearization at a unit equilibrium is diagonal in coordinate
    directions, so each direction ``x_m`` carries the coefficient of
    ``x_k^2`` in the ``x_m`` equation.  Relative to the cycle (predecessor
    ``j``, successor ``l``): the direction of ``x_j`` is contracting, of
    ``x_l`` expanding, the remaining one transverse, the axis itself radial.
    A transverse direction is flagged globally transverse when it is
    transverse for every cycle through the equilibrium.
    """
    kind = NetworkKind.parse(kind)
    topo = build_topology(kind)
    seq = topo.cycle(cycle)
    if equilibrium not in seq:
        raise ValueError(f"equilibrium {equilibrium} is not on cycle {cycle}")

    def neighbours(cyc: tuple[int, ...], k: int) -> tuple[int, int]:
        i = cyc.index(k)
        return cyc[i - 1], cyc[(i + 1) % len(cyc)]

    pred, succ = neighbours(seq, equilibrium)
    through = [c for c in topo.cycles.values() if equilibrium in c]
    table = COEFFICIENTS[kind]
    out: dict[str, EigenInfo] = {}
    for m in EQUILIBRIA:
        if m == equilibrium:
            out["radial"] = EigenInfo(None, m, EigenClass.RADIAL, -1, False)
            continue
        sign, key = table[m][equilibrium]
        if m == pred:
            cls = EigenClass.CONTRACTING
        elif m == succ:
            cls = EigenClass.EXPANDING
        else:
            cls = EigenClass.TRANSVERSE
        glob = cls is EigenClass.TRANSVERSE and all(m not in neighbours(c, equilibrium) for c in through)
        out[key] = EigenInfo(key, m, cls, sign, glob)
    return out


_KEY_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*[=:]\s*(.+?)\s*$")


def parse_param_text(text: str) -> tuple[NetworkKind | None, dict[str, float]]:
    """Parse ``key = value`` lines with ``#`` comments."""
    kind = None
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _KEY_RE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = m.group(1), m.group(2).strip().strip("\"'")
        if key.lower() == "network":
            kind = NetworkKind.parse(val)
            continue
        try:
            values[normalize_key(key)] = float(val)
        except ValueError:
            raise ValueError(f"line {lineno}: value of {key} is not a number: {val!r}") from None
    return kind, values


def load_params(path: str | Path, kind: NetworkKind | str | None = None) -> ParamSet:
    file_kind, values = parse_param_text(Path(path).read_text())
    chosen = NetworkKind.parse(kind) if kind is not None else file_kind
    if chosen is None:
        raise ValueError(f"{path}: no network kind given (set 'network = ...' or pass one)")
    return ParamSet(chosen, values)


def format_params(p: ParamSet) -> str:
    lines = [f"network = {p.kind.value}"]
    lines += [f"{k} = {float(v)!r}" for k, v in sorted(p.values.items())]
    return "\n".join(lines) + "\n"


def cycles_through(kind: NetworkKind | str, equilibrium: int) -> Iterable[str]:
    topo = build_topology(kind)
    return [name for name, c in topo.cycles.items() if equilibrium in c]
