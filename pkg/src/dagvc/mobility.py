"""Vehicle mobility: traces, the time-varying VC graph and contact rates."""

from __future__ import annotations

import csv
import math
import xml.etree.ElementTree as ET
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NotLinked, ParseError, TimeOutOfHorizon, VehicleAbsent

DEFAULT_RADIUS = 500.0
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class Vehicle:
    id: str
    cpu_speed: float  # cycles per second
    antenna_height: float = 1.5  # meters, used for both transmit and receive

    def __post_init__(self):
        if not self.cpu_speed > 0:
            raise ValueError(f"vehicle {self.id}: cpu_speed must be positive")
        if not self.antenna_height > 0:
            raise ValueError(f"vehicle {self.id}: antenna_height must be positive")


class MobilityTrace:
    """Sampled vehicle positions with piecewise-linear interpolation.

    A vehicle is present in the VC between its first and last sample. The
    first vehicle (or ``owner``) is the task owner.

    Two lookup paths exist: scalar lookups that walk each vehicle's own
    samples, and vectorized lookups over a merged time grid used by the
    schedulers. Both describe the same piecewise-linear motion.
    """

    def __init__(self, vehicles, samples, owner=None, horizon=None):
        self.vehicles = list(vehicles)
        if len(self.vehicles) < 1:
            raise ValueError("trace needs at least one vehicle")
        self.ids = [v.id for v in self.vehicles]
        self.index = {vid: k for k, vid in enumerate(self.ids)}
        if len(self.index) != len(self.ids):
            raise ValueError("duplicate vehicle ids")
        unknown = set(samples) - set(self.index)
        if unknown:
            raise ValueError(f"samples for unknown vehicles: {sorted(unknown)}")
        self._t, self._x, self._y = [], [], []
        for vid in self.ids:
            ts, xs, ys = samples.get(vid, ((), (), ()))
            ta, xa, ya = (np.asarray(v, dtype=float) for v in (ts, xs, ys))
            if not ta.size:
                raise ValueError(f"vehicle {vid} has no samples")
            if not (ta.size == xa.size == ya.size):
                raise ValueError(f"vehicle {vid}: ragged samples")
            if np.any(np.diff(ta) <= 0):
                raise ValueError(f"vehicle {vid}: sample times must be strictly increasing")
            if not (np.isfinite(ta).all() and np.isfinite(xa).all() and np.isfinite(ya).all()):
                raise ValueError(f"vehicle {vid}: non-finite sample")
            self._t.append(ta.tolist())
            self._x.append(xa.tolist())
            self._y.append(ya.tolist())
        self.owner = owner if owner is not None else self.ids[0]
        if self.owner not in self.index:
            raise ValueError(f"owner {self.owner!r} is not a vehicle")
        self.owner_index = self.index[self.owner]
        self.arrival = np.array([ts[0] for ts in self._t])
        self.departure = np.array([ts[-1] for ts in self._t])
        lo, hi = float(self.arrival.min()), float(self.departure.max())
        if horizon is None:
            horizon = (lo, hi)
        if horizon[0] > lo or horizon[1] < hi:
            raise ValueError("horizon does not cover all samples")
        self.horizon = (float(horizon[0]), float(horizon[1]))
        self.cpu = np.array([v.cpu_speed for v in self.vehicles], dtype=float)
        self.antenna = np.array([v.antenna_height for v in self.vehicles], dtype=float)
        self._build_grid()
        self._cache: dict[float, tuple] = {}

    # -- construction helpers ------------------------------------------------

    def _build_grid(self):
        grid = np.unique(np.concatenate([np.asarray(ts) for ts in self._t]))
        V, K = len(self.ids), len(grid)
        X = np.full((V, K), np.nan)
        Y = np.full((V, K), np.nan)
        for k in range(V):
            ts = np.asarray(self._t[k])
            inside = (grid >= ts[0]) & (grid <= ts[-1])
            X[k, inside] = np.interp(grid[inside], ts, self._x[k])
            Y[k, inside] = np.interp(grid[inside], ts, self._y[k])
        self._grid = grid
        self._grid_list = grid.tolist()
        self._X, self._Y = X, Y

    @classmethod
    def static(cls, vehicles, positions, horizon=(0.0, 1000.0), owner=None):
        """Trace where every vehicle sits still for the whole horizon."""
        samples = {}
        for v in vehicles:
            x, y = positions[v.id]
            samples[v.id] = ((horizon[0], horizon[1]), (x, x), (y, y))
        return cls(vehicles, samples, owner=owner, horizon=horizon)

    # -- basic queries ---------------------------------------------------------

    @property
    def n_vehicles(self) -> int:
        return len(self.ids)

    def vehicle(self, vid) -> Vehicle:
        return self.vehicles[self.index[vid]]

    def check_time(self, t):
        if t < self.horizon[0] - _TIME_EPS or t > self.horizon[1] + _TIME_EPS:
            raise TimeOutOfHorizon(f"t={t} outside horizon {self.horizon}")

    def is_present(self, vid, t) -> bool:
        k = self.index[vid]
        return bool(self.arrival[k] <= t <= self.departure[k])

    def present_ids(self, t) -> list[str]:
        self.check_time(t)
        return [vid for k, vid in enumerate(self.ids) if self.arrival[k] <= t <= self.departure[k]]

    def _segment(self, k, t):
        ts = self._t[k]
        i = bisect_right(ts, t) - 1
        if i >= len(ts) - 1:
            i = len(ts) - 2
        return i

    def position(self, vid, t) -> tuple[float, float]:
        self.check_time(t)
        k = self.index[vid]
        if not self.arrival[k] <= t <= self.departure[k]:
            raise VehicleAbsent(f"vehicle {vid} absent at t={t}")
        ts, xs, ys = self._t[k], self._x[k], self._y[k]
        if len(ts) == 1:
            return xs[0], ys[0]
        i = self._segment(k, t)
        f = (t - ts[i]) / (ts[i + 1] - ts[i])
        if f == 0.0:
            return xs[i], ys[i]
        return xs[i] + f * (xs[i + 1] - xs[i]), ys[i] + f * (ys[i + 1] - ys[i])

    def velocity(self, vid, t) -> tuple[float, float]:
        """Velocity of the segment starting at ``t`` (the one ending there when
        ``t`` is the last sample)."""
        self.check_time(t)
        k = self.index[vid]
        if not self.arrival[k] <= t <= self.departure[k]:
            raise VehicleAbsent(f"vehicle {vid} absent at t={t}")
        ts, xs, ys = self._t[k], self._x[k], self._y[k]
        if len(ts) == 1:
            return 0.0, 0.0
        i = self._segment(k, t)
        dt = ts[i + 1] - ts[i]
        return (xs[i + 1] - xs[i]) / dt, (ys[i + 1] - ys[i]) / dt

    # -- vectorized state over all vehicles ------------------------------------

    def state_at(self, t):
        """``(positions (V,2), velocities (V,2), present mask)`` at time ``t``.

        Absent vehicles carry NaN positions.
        """
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        self.check_time(t)
        grid, X, Y = self._grid_list, self._X, self._Y
        K = len(grid)
        present = (self.arrival <= t) & (t <= self.departure)
        if K == 1:
            P = np.stack([X[:, 0], Y[:, 0]], axis=1)
            Vel = np.zeros_like(P)
        else:
            i = bisect_right(grid, t) - 1
            i = min(max(i, 0), K - 2)
            f = (t - grid[i]) / (grid[i + 1] - grid[i])
            if f <= 0.0:
                P = np.stack([X[:, i], Y[:, i]], axis=1)
            elif f >= 1.0:
                P = np.stack([X[:, i + 1], Y[:, i + 1]], axis=1)
            else:
                P = np.stack([X[:, i] + f * (X[:, i + 1] - X[:, i]), Y[:, i] + f * (Y[:, i + 1] - Y[:, i])], axis=1)
            # segment starting at t; fall back to the one ending at t
            j = i + 1 if f >= 1.0 and i + 2 < K else i
            dt = grid[j + 1] - grid[j]
            fwd = np.stack([(X[:, j + 1] - X[:, j]) / dt, (Y[:, j + 1] - Y[:, j]) / dt], axis=1)
            if j > 0:
                dtb = grid[j] - grid[j - 1]
                bwd = np.stack([(X[:, j] - X[:, j - 1]) / dtb, (Y[:, j] - Y[:, j - 1]) / dtb], axis=1)
                fwd = np.where(np.isnan(fwd), bwd, fwd)
            Vel = np.nan_to_num(fwd, nan=0.0)
        P = np.where(present[:, None], P, np.nan)
        out = (P, Vel, present)
        if len(self._cache) > 50_000:
            self._cache.clear()
        self._cache[t] = out
        return out


@dataclass(frozen=True)
class VcSnapshot:
    time: float
    present: frozenset
    links: frozenset  # frozenset({a, b}) pairs
    positions: dict

    def linked(self, a, b) -> bool:
        return frozenset((a, b)) in self.links


def distance(trace: MobilityTrace, a, b, t) -> float:
    """Euclidean distance between two present vehicles at ``t``."""
    xa, ya = trace.position(a, t)
    xb, yb = trace.position(b, t)
    return math.hypot(xa - xb, ya - yb)


def snapshot(trace: MobilityTrace, t, R=DEFAULT_RADIUS) -> VcSnapshot:
    present = trace.present_ids(t)
    pos = {vid: trace.position(vid, t) for vid in present}
    links = set()
    for k, a in enumerate(present):
        for b in present[k + 1:]:
            if math.hypot(pos[a][0] - pos[b][0], pos[a][1] - pos[b][1]) <= R:
                links.add(frozenset((a, b)))
    return VcSnapshot(float(t), frozenset(present), frozenset(links), pos)


@dataclass
class ContactModel:
    """Rate of the exponential residual-contact-duration law per vehicle pair.

    ``kinematic`` mode estimates ``mu = max(mu_floor, v_rel / max(eps, R - d))``
    from the current relative speed and the remaining link margin;
    ``constant`` mode returns ``mu_const``. ``overrides`` pins the rate of
    specific pairs (keyed by ``frozenset({a, b})``) in either mode.
    """

    mode: str = "kinematic"
    mu_const: float = 0.1
    mu_floor: float = 1e-3
    eps: float = 1.0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("kinematic", "constant"):
            raise ValueError(f"unknown contact mode {self.mode!r}")
        if not (self.mu_const > 0 and self.mu_floor > 0 and self.eps > 0):
            raise ValueError("contact rates and eps must be positive")
        if any(not mu > 0 for mu in self.overrides.values()):
            raise ValueError("overridden rates must be positive")
        self._override_idx = None

    def rate(self, trace: MobilityTrace, a, b, t, R=DEFAULT_RADIUS) -> float:
        d = distance(trace, a, b, t)
        if a != b and d > R:
            raise NotLinked(f"{a} and {b} are {d:.1f} m apart at t={t}")
        return self._rate(trace, a, b, t, d, R)

    def _rate(self, trace, a, b, t, d, R):
        key = frozenset((a, b))
        if key in self.overrides:
            return float(self.overrides[key])
        if self.mode == "constant":
            return float(self.mu_const)
        va, vb = trace.velocity(a, t), trace.velocity(b, t)
        v_rel = math.hypot(va[0] - vb[0], va[1] - vb[1])
        return max(self.mu_floor, v_rel / max(self.eps, R - d))

    def _override_table(self, trace):
        if self._override_idx is None or self._override_idx[0] is not trace:
            table = {}
            for key, value in self.overrides.items():
                pair = list(key)
                a, b = (pair * 2)[:2]
                if a in trace.index and b in trace.index:
                    ia, ib = trace.index[a], trace.index[b]
                    table.setdefault(ia, {})[ib] = float(value)
                    table.setdefault(ib, {})[ia] = float(value)
            self._override_idx = (trace, table)
        return self._override_idx[1]

    def rate_matrix(self, trace: MobilityTrace, dist, vel, R):
        """Rates between every pair of vehicles; ``dist`` is the distance matrix."""
        n = len(dist)
        if self.mode == "constant":
            mu = np.full((n, n), float(self.mu_const))
        else:
            v_rel = np.hypot(vel[:, None, 0] - vel[None, :, 0], vel[:, None, 1] - vel[None, :, 1])
            mu = np.maximum(self.mu_floor, v_rel / np.maximum(self.eps, R - dist))
        if self.overrides:
            for a, row in self._override_table(trace).items():
                for b, value in row.items():
                    mu[a, b] = value
        return mu

    def rate_row(self, trace: MobilityTrace, h: int, dist, vel, R):
        """Rates from vehicle index ``h`` to every vehicle (vectorized)."""
        if self.mode == "constant":
            mu = np.full(len(dist), float(self.mu_const))
        else:
            v_rel = np.hypot(vel[:, 0] - vel[h, 0], vel[:, 1] - vel[h, 1])
            mu = np.maximum(self.mu_floor, v_rel / np.maximum(self.eps, R - dist))
        if self.overrides:
            for k, value in self._override_table(trace).get(h, {}).items():
                mu[k] = value
        return mu


def contact_rate(trace, a, b, t, R=DEFAULT_RADIUS, model: ContactModel | None = None) -> float:
    """Contact-duration rate of a linked pair; raises NotLinked otherwise."""
    return (model or ContactModel()).rate(trace, a, b, t, R)


# -- synthetic generation ---------------------------------------------------------


@dataclass(frozen=True)
class TraceParams:
    n_vehicles: int = 30  # initial VC size, owner included
    region: tuple = (1000.0, 1000.0)
    speed_min: float = 5.0
    speed_max: float = 20.0
    horizon: float = 120.0
    sample_dt: float = 0.5
    cpu_mean: float = 20e6
    cpu_var: float = 0.2  # relative: std = cpu_var * cpu_mean
    antenna_m: float = 1.5
    arrival_rate: float = 0.15  # vehicles per second joining the VC
    departure_rate: float = 0.005  # per vehicle per second

    def check(self):
        if self.n_vehicles < 2:
            raise ValueError("need the owner and at least one provider")
        if self.region[0] <= 0 or self.region[1] <= 0:
            raise ValueError("region must be positive")
        if not 0 <= self.speed_min <= self.speed_max:
            raise ValueError("bad speed range")
        if self.horizon <= 0 or self.sample_dt <= 0:
            raise ValueError("horizon and sample_dt must be positive")
        if self.arrival_rate < 0 or self.departure_rate < 0:
            raise ValueError("rates must be non-negative")


def _waypoint_walk(rng, params, n_steps):
    W, H = params.region
    dt = params.sample_dt
    x, y = rng.uniform(0, W), rng.uniform(0, H)
    wx, wy = rng.uniform(0, W), rng.uniform(0, H)
    speed = rng.uniform(params.speed_min, params.speed_max)
    xs, ys = [], []
    for _ in range(n_steps):
        xs.append(float(x))
        ys.append(float(y))
        budget = speed * dt
        while budget > 0:
            gap = math.hypot(wx - x, wy - y)
            if gap <= budget:
                x, y = wx, wy
                budget -= gap
                wx, wy = rng.uniform(0, W), rng.uniform(0, H)
                speed = rng.uniform(params.speed_min, params.speed_max)
                if speed <= 0:
                    break
            else:
                f = budget / gap
                x, y = x + (wx - x) * f, y + (wy - y) * f
                budget = 0.0
    return xs, ys


def generate_synthetic_trace(params: TraceParams, rng: np.random.Generator) -> MobilityTrace:
    """Random-waypoint trace.

    Vehicle 1 owns the task and stays for the whole horizon. The other
    initial vehicles depart after an exponential residence time; new vehicles
    join as a Poisson process. Join/leave instants are snapped to the
    sampling grid. CPU speeds are normal with relative spread ``cpu_var``,
    truncated at zero.
    """
    params.check()
    dt = params.sample_dt
    n_steps = int(math.floor(params.horizon / dt + 1e-9)) + 1
    times = [k * dt for k in range(n_steps)]
    horizon = (0.0, times[-1])

    spans = [(0, n_steps - 1)]  # grid index ranges, inclusive
    for _ in range(params.n_vehicles - 1):
        spans.append((0, None))
    if params.arrival_rate > 0:
        t = rng.exponential(1.0 / params.arrival_rate)
        while t <= horizon[1]:
            k0 = int(math.ceil(t / dt - 1e-9))
            if k0 < n_steps:
                spans.append((k0, None))
            t += rng.exponential(1.0 / params.arrival_rate)
    resolved = [spans[0]]
    for k0, _ in spans[1:]:
        k1 = n_steps - 1
        if params.departure_rate > 0:
            leave = times[k0] + rng.exponential(1.0 / params.departure_rate)
            k1 = min(k1, max(k0, int(math.floor(leave / dt + 1e-9))))
        resolved.append((k0, k1))

    width = max(3, len(str(len(resolved))))
    vehicles, samples = [], {}
    for n, (k0, k1) in enumerate(resolved):
        vid = f"v{n + 1:0{width}d}"
        cpu = 0.0
        while cpu <= 0:
            cpu = rng.normal(params.cpu_mean, params.cpu_var * params.cpu_mean)
        vehicles.append(Vehicle(vid, float(cpu), params.antenna_m))
        xs, ys = _waypoint_walk(rng, params, k1 - k0 + 1)
        samples[vid] = (times[k0:k1 + 1], xs, ys)
    return MobilityTrace(vehicles, samples, owner=vehicles[0].id, horizon=horizon)


# -- CSV interchange ----------------------------------------------------------------

TRACE_HEADER = ["t", "vehicle_id", "x", "y"]
VEHICLE_HEADER = ["vehicle_id", "cpu_hz", "antenna_m"]


def _float(text, where):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"not a number: {text!r}", where) from None
    if not math.isfinite(value):
        raise ParseError(f"not finite: {text!r}", where)
    return value


def load_vehicles_csv(path) -> list[Vehicle]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != VEHICLE_HEADER:
        raise ParseError(f"header must be {','.join(VEHICLE_HEADER)}", "line 1")
    out, seen = [], set()
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError("expected 3 fields", f"line {n}")
        vid = row[0].strip()
        if vid in seen:
            raise ParseError(f"duplicate vehicle id {vid!r}", f"line {n}")
        seen.add(vid)
        try:
            out.append(Vehicle(vid, _float(row[1], f"line {n}"), _float(row[2], f"line {n}")))
        except ValueError as exc:
            raise ParseError(str(exc), f"line {n}") from None
    if not out:
        raise ParseError("no vehicles", path)
    return out


def load_trace_csv(path, vehicles_meta) -> MobilityTrace:
    """Read a ``t,vehicle_id,x,y`` trace. ``vehicles_meta`` is a list of
    Vehicle or the path of a vehicle metadata CSV; its first row is the task
    owner."""
    vehicles = vehicles_meta if isinstance(vehicles_meta, list) else load_vehicles_csv(vehicles_meta)
    known = {v.id for v in vehicles}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty trace file", str(path))
    if [c.strip() for c in rows[0]] != TRACE_HEADER:
        raise ParseError(f"header must be {','.join(TRACE_HEADER)}", "line 1")
    samples: dict[str, tuple[list, list, list]] = {}
    last_t = -math.inf
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError("expected 4 fields", f"line {n}")
        t = _float(row[0], f"line {n}")
        vid = row[1].strip()
        if vid not in known:
            raise ParseError(f"unknown vehicle id {vid!r}", f"line {n}")
        if t < last_t:
            raise ParseError("timestamps out of order", f"line {n}")
        last_t = t
        ts, xs, ys = samples.setdefault(vid, ([], [], []))
        if ts and t <= ts[-1]:
            raise ParseError(f"repeated timestamp for {vid!r}", f"line {n}")
        ts.append(t)
        xs.append(_float(row[2], f"line {n}"))
        ys.append(_float(row[3], f"line {n}"))
    if not samples:
        raise ParseError("trace has no samples", str(path))
    present = [v for v in vehicles if v.id in samples]
    if vehicles[0].id not in samples:
        raise ParseError(f"task owner {vehicles[0].id!r} has no samples", str(path))
    return MobilityTrace(present, samples, owner=vehicles[0].id)


def save_trace_csv(trace: MobilityTrace, path, vehicles_path=None) -> None:
    rows = []
    for k, vid in enumerate(trace.ids):
        for t, x, y in zip(trace._t[k], trace._x[k], trace._y[k]):
            rows.append((t, vid, x, y))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for t, vid, x, y in rows:
            w.writerow([repr(t), vid, repr(x), repr(y)])
    if vehicles_path is not None:
        with open(vehicles_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(VEHICLE_HEADER)
            for v in trace.vehicles:
                w.writerow([v.id, repr(v.cpu_speed), repr(v.antenna_height)])


def fcd_to_csv(fcd_path, out_path) -> int:
    """Convert SUMO floating-car-data XML (``<timestep time=..><vehicle id x y>``)
    to the trace CSV. Returns the number of rows written."""
    rows = []
    for _, elem in ET.iterparse(fcd_path, events=("end",)):
        if elem.tag == "timestep":
            t = float(elem.get("time"))
            for veh in elem.findall("vehicle"):
                rows.append((t, veh.get("id"), float(veh.get("x")), float(veh.get("y"))))
            elem.clear()
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        w.writerows([repr(t), vid, repr(x), repr(y)] for t, vid, x, y in rows)
    return len(rows)
