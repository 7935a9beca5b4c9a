"""Direct simulation of the network ODEs and symbolic itineraries.

Integration is done in logarithmic coordinates ``X_j = log x_j`` by default:
near the network the coordinates span many orders of magnitude and the log
form keeps the relative precision.  In these coordinates
``X_j' = 1 - |x|^2 + sum_k a_kj x_k^2`` with ``x_k^2 = exp(2 X_k)``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .network import COEFFICIENTS, EQUILIBRIA, ParamSet
from .projmap import HALT, build_projected_map, cusp_alpha_star, evaluate, iterate

log = logging.getLogger(__name__)

DWELL_ETA = 0.1
PERIOD_WINDOW = 24
PERIOD_CANDIDATES = (3, 4, 6, 8, 9, 12)
TIME_TOL = 1e-9

_BLOCKS = {(3, 1): "C3", (4, 1): "C4", (3, 4, 1): "C34"}


class Coordinates(str, Enum):
    ORIGINAL = "orig"
    LOG = "log"


@dataclass(frozen=True)
class OdeSystem:
    params: ParamSet
    coordinates: Coordinates = Coordinates.LOG
    coefficients: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coordinates", Coordinates(self.coordinates))
        table = COEFFICIENTS[self.params.kind]
        a = np.zeros((4, 4))
        for j, row in table.items():
            for k, (sign, key) in row.items():
                a[j - 1, k - 1] = sign * float(self.params[key])
        object.__setattr__(self, "coefficients", a)

    @property
    def kind(self):
        return self.params.kind


def rhs(system: OdeSystem, state) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if system.coordinates is Coordinates.LOG:
        sq = np.exp(2.0 * state)
        return 1.0 - sq.sum() + system.coefficients @ sq
    sq = state * state
    return state * (1.0 - sq.sum() + system.coefficients @ sq)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    coordinates: Coordinates
    segments: list = field(default_factory=list, repr=False)
    status: str = "ok"
    message: str = ""

    def log_states(self) -> np.ndarray:
        if self.coordinates is Coordinates.LOG:
            return self.states
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.states))

    def at(self, t: float) -> np.ndarray:
        """Dense-output state (native coordinates) at time ``t``."""
        for t0, t1, sol in self.segments:
            if t0 <= t <= t1:
                return sol(t)
        idx = int(np.clip(np.searchsorted(self.times, t), 0, len(self.times) - 1))
        return self.states[idx]

    def log_at(self, t: float) -> np.ndarray:
        x = self.at(t)
        if self.coordinates is Coordinates.LOG:
            return x
        with np.errstate(divide="ignore"):
            return np.log(np.abs(x))


def integrate(system: OdeSystem, x0, t_end: float, rtol: float = 1e-9, atol: float = 1e-12,
              t0: float = 0.0) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration with dense output."""
    x0 = np.asarray(x0, dtype=float)
    if t_end <= t0:
        return Trajectory(np.array([t0]), x0[None, :].copy(), system.coordinates)
    sol = solve_ivp(lambda t, y: rhs(system, y), (t0, t_end), x0, method="RK45",
                    rtol=rtol, atol=atol, dense_output=True)
    traj = Trajectory(sol.t, sol.y.T, system.coordinates, [(sol.t[0], sol.t[-1], sol.sol)])
    if sol.status != 0:
        traj.status = "truncated"
        traj.message = sol.message
        log.warning("integration stopped at t=%g: %s", sol.t[-1], sol.message)
    return traj


def _concat(parts: list[Trajectory]) -> Trajectory:
    times = np.concatenate([parts[0].times] + [p.times[1:] for p in parts[1:]])
    states = np.concatenate([parts[0].states] + [p.states[1:] for p in parts[1:]])
    segs = [s for p in parts for s in p.segments]
    last = parts[-1]
    return Trajectory(times, states, parts[0].coordinates, segs, last.status, last.message)


def _margins(X: np.ndarray, eta: float) -> np.ndarray:
    """Per-equilibrium dwell margin; positive exactly inside the dwell region."""
    hi = math.log1p(-eta)
    lo = math.log(eta)
    X = np.atleast_2d(X)
    out = np.empty_like(X)
    for j in range(4):
        others = np.delete(X, j, axis=1)
        out[:, j] = np.minimum(X[:, j] - hi, np.min(lo - others, axis=1))
    return out


def dwell_labels(traj: Trajectory, eta: float = DWELL_ETA) -> np.ndarray:
    """Equilibrium label (1..4) of the dwell region for each stored state, 0 if none."""
    m = _margins(traj.log_states(), eta)
    lab = np.argmax(m, axis=1) + 1
    lab[np.max(m, axis=1) <= 0] = 0
    return lab


@dataclass(frozen=True)
class Visit:
    equilibrium: int
    entry: float
    exit: float


@dataclass(frozen=True)
class Periodicity:
    preperiod: int
    period: int
    root: tuple[int, ...]


@dataclass
class Itinerary:
    symbols: tuple[int, ...]
    visits: list[Visit]
    eventually_periodic: Periodicity | None

    def blocks(self) -> list[str]:
        return symbols_to_blocks(self.symbols)


def detect_periodicity(symbols, window: int = PERIOD_WINDOW,
                       candidates=PERIOD_CANDIDATES) -> Periodicity | None:
    s = list(symbols)
    if len(s) < window:
        return None
    tail = s[-window:]
    for p in sorted(candidates):
        if 2 * p > window:
            break
        if all(tail[i] == tail[i + p] for i in range(window - p)):
            n = len(s) - window
            while n > 0 and s[n - 1] == s[n - 1 + p]:
                n -= 1
            return Periodicity(n, p, tuple(s[n:n + p]))
    return None


def _refine_crossing(traj: Trajectory, j: int, ta: float, tb: float, eta: float) -> float:
    def g(t):
        return _margins(traj.log_at(t)[None, :], eta)[0, j - 1]

    ga, gb = g(ta), g(tb)
    if ga == 0:
        return ta
    if np.sign(ga) == np.sign(gb):
        return tb
    return brentq(g, ta, tb, xtol=TIME_TOL)


def extract_itinerary(traj: Trajectory, eta: float = DWELL_ETA, refine: bool = True) -> Itinerary:
    if not 0 < eta < 1:
        raise ValueError("dwell threshold must lie in (0, 1)")
    labels = dwell_labels(traj, eta)
    t = traj.times
    visits: list[Visit] = []
    current, entry = 0, None
    for idx, lab in enumerate(labels):
        if lab == current:
            continue
        if current:
            exit_t = _refine_crossing(traj, current, t[idx - 1], t[idx], eta) if refine else t[idx]
            visits.append(Visit(int(current), float(entry), float(exit_t)))
        if lab:
            if refine and idx > 0:
                entry = _refine_crossing(traj, int(lab), t[idx - 1], t[idx], eta)
            else:
                entry = t[idx]
        current = lab
    if current:
        visits.append(Visit(int(current), float(entry), float(t[-1])))
    symbols: list[int] = []
    for v in visits:
        if not symbols or symbols[-1] != v.equilibrium:
            symbols.append(v.equilibrium)
    return Itinerary(tuple(symbols), visits, detect_periodicity(symbols))


def symbols_to_blocks(symbols) -> list[str]:
    """Split at each visit to ``xi_2`` into completed cycle loops."""
    s = list(symbols)
    starts = [i for i, x in enumerate(s) if x == 2]
    out = []
    for a, b in zip(starts, starts[1:]):
        out.append(_BLOCKS.get(tuple(s[a + 1:b]), "?"))
    return out


def run_lengths(blocks) -> list[tuple[str, int]]:
    out: list[tuple[str, int]] = []
    for b in blocks:
        if out and out[-1][0] == b:
            out[-1] = (b, out[-1][1] + 1)
        else:
            out.append((b, 1))
    return out


def seed_state(p: ParamSet, theta: float, alpha: float | None = None, section: float = 0.1,
               eps: float = 0.01, scale: float = 25.0) -> np.ndarray:
    """Log-coordinate state on the incoming section at ``xi_2`` with direction ``theta``.

    ``x_1 = section`` and ``(X3, X4) = alpha (theta, -1-theta)`` with
    ``alpha`` at least twice the cusp bound, so the seed is committed to one
    exit of ``xi_2``.
    """
    bound = cusp_alpha_star(p, theta, eps)
    # Both transverse coordinates start below the dwell threshold of xi_2.
    inside = (1.0 - math.log(DWELL_ETA)) / min(-theta, 1.0 + theta)
    a = max(scale, 2.0 * bound, inside) if alpha is None else alpha
    if a <= bound:
        raise ValueError(f"alpha={a} lies inside the excluded cusp (needs > {bound})")
    X1 = math.log(section)
    X3 = a * theta
    X4 = -a * (1.0 + theta)
    rest = 1.0 - section ** 2 - math.exp(2 * X3) - math.exp(2 * X4)
    X2 = 0.5 * math.log(rest)
    return np.array([X1, X2, X3, X4])


def simulate_symbols(system: OdeSystem, x0, n_symbols: int, t_chunk: float = 200.0,
                     t_max: float = 1e7, wall: float = 50.0, eta: float = DWELL_ETA) -> tuple[Trajectory, Itinerary]:
    """Integrate in growing chunks until ``n_symbols`` symbols are seen."""
    start = time.monotonic()
    parts = [integrate(system, x0, t_chunk)]
    chunk = t_chunk
    while True:
        traj = _concat(parts)
        itin = extract_itinerary(traj, eta)
        done = len(itin.symbols) >= n_symbols
        if done or traj.status != "ok" or traj.times[-1] >= t_max or time.monotonic() - start > wall:
            if not done and traj.status == "ok":
                traj.message = "stopped before reaching the requested symbol count"
            return traj, itin
        chunk *= 2
        t0 = traj.times[-1]
        parts.append(integrate(system, traj.states[-1], t0 + chunk, t0=t0))


def section_hits(traj: Trajectory, section: float = 0.1, eta: float = DWELL_ETA) -> list[tuple[float, float]]:
    """Times and theta values where ``x_1`` falls through ``section`` next to ``xi_2``."""
    X = traj.log_states()
    level = math.log(section)
    near2 = math.log1p(-eta)
    hits = []
    for i in range(len(X) - 1):
        if X[i, 0] > level >= X[i + 1, 0]:
            tc = brentq(lambda t: traj.log_at(t)[0] - level, traj.times[i], traj.times[i + 1], xtol=TIME_TOL) \
                if X[i, 0] != level else traj.times[i]
            Y = traj.log_at(tc)
            if Y[1] > near2 and Y[2] < 0 and Y[3] < 0:
                hits.append((float(tc), float(-Y[2] / (Y[2] + Y[3]))))
    return hits


@dataclass
class AgreementReport:
    status: str
    theta0: float | None
    predicted_blocks: list[str]
    observed_blocks: list[str]
    predicted_runs: list[tuple[str, int]]
    observed_runs: list[tuple[str, int]]
    symbols: tuple[int, ...]
    eventual_root_agrees: bool
    order_agrees: bool
    first_disagreement: int | None
    periodicity: Periodicity | None
    section_thetas: list[float]
    map_halt: str
    message: str = ""

    @property
    def agrees(self) -> bool:
        return self.eventual_root_agrees and self.order_agrees

    def to_dict(self) -> dict:
        per = None
        if self.periodicity is not None:
            per = {"preperiod": self.periodicity.preperiod, "period": self.periodicity.period,
                   "root": list(self.periodicity.root)}
        return {
            "status": self.status, "agrees": self.agrees, "theta0": self.theta0,
            "eventual_root_agrees": self.eventual_root_agrees, "order_agrees": self.order_agrees,
            "first_disagreement": self.first_disagreement,
            "predicted_runs": [[b, n] for b, n in self.predicted_runs],
            "observed_runs": [[b, n] for b, n in self.observed_runs],
            "predicted_blocks": self.predicted_blocks, "observed_blocks": self.observed_blocks,
            "symbols": list(self.symbols), "periodicity": per, "section_thetas": self.section_thetas,
            "map_halt": self.map_halt, "message": self.message,
        }


def compare_prediction(p: ParamSet, x0=None, horizon: int = 60, theta0: float | None = None,
                       alpha: float | None = None, section: float = 0.1, eta: float = DWELL_ETA,
                       wall: float = 50.0) -> AgreementReport:
    """Projected-map block prediction versus the ODE itinerary.

    Give either a log-coordinate state ``x0`` or a seed direction ``theta0``
    (placed on the incoming section at ``xi_2`` by :func:`seed_state`).
    """
    if x0 is None:
        if theta0 is None:
            raise ValueError("need x0 or theta0")
        x0 = seed_state(p, theta0, alpha, section)
    system = OdeSystem(p, Coordinates.LOG)
    seeded = theta0 is not None
    traj, itin = simulate_symbols(system, x0, horizon, eta=eta, wall=wall)
    if seeded and itin.symbols[:1] != (2,):
        # The seed sits on the incoming section of xi_2 and counts as a visit.
        sym = (2,) + itin.symbols
        itin = Itinerary(sym, itin.visits, detect_periodicity(sym))
    hits = section_hits(traj, section, eta)
    thetas = [h[1] for h in hits]
    if theta0 is None:
        if not hits:
            return AgreementReport("no section hit", None, [], [], [], [], itin.symbols, False, False, None,
                                   itin.eventually_periodic, [], "", traj.message)
        theta0 = thetas[0]
        first = next(i for i, t in enumerate(traj.times) if t >= hits[0][0])
        # Restrict the observation to what follows the seeding section hit.
        sub = Trajectory(traj.times[first:], traj.states[first:], traj.coordinates, traj.segments)
        itin = extract_itinerary(sub, eta)
    f = build_projected_map(p)
    observed = symbols_to_blocks(itin.symbols)
    orbit = iterate(f, theta0, max_steps=max(len(observed), 1), stop_on_convergence=False)
    predicted = list(orbit.labels)
    if len(predicted) < len(observed) and predicted:
        predicted += [predicted[-1]] * (len(observed) - len(predicted))
    if evaluate(f, theta0) is HALT:
        return AgreementReport("seed on switching point", theta0, predicted, observed, [], [], itin.symbols,
                               False, False, 0, itin.eventually_periodic, thetas, orbit.halt_reason)
    pr, orr = run_lengths(predicted), run_lengths(observed)
    first_bad = next((i for i, (a, b) in enumerate(zip(predicted, observed)) if a != b), None)
    root_ok = bool(observed) and bool(predicted) and observed[-1] == predicted[-1]
    if itin.eventually_periodic is not None and observed:
        root = itin.eventually_periodic.root
        cyc = {"C3": {1, 2, 3}, "C4": {1, 2, 4}, "C34": {1, 2, 3, 4}}.get(predicted[-1] if predicted else "", set())
        root_ok = root_ok and set(root) == cyc and len(root) == len(cyc)
    order_ok = [b for b, _ in pr] == [b for b, _ in orr]
    status = "ok" if len(itin.symbols) >= horizon else "short"
    return AgreementReport(status, float(theta0), predicted, observed, pr, orr, itin.symbols, root_ok, order_ok,
                           first_bad, itin.eventually_periodic, thetas, orbit.halt_reason, traj.message)


def equilibrium_state(label: int, coordinates: Coordinates = Coordinates.ORIGINAL) -> np.ndarray:
    if label not in EQUILIBRIA:
        raise ValueError(f"no equilibrium {label}")
    x = np.zeros(4)
    x[label - 1] = 1.0
    if Coordinates(coordinates) is Coordinates.LOG:
        with np.errstate(divide="ignore"):
            return np.log(x)
    return x
