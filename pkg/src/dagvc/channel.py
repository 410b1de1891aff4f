"""V2V link layer: dual-slope path loss, transmission time, contact survival
and the feasibility sets used by the schedulers.

The scalar functions are the reference definitions. :class:`Network` is the
vectorized engine the schedulers run on; tests cross-check the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DistanceBelowModelRange, LinkOutOfRange, NonPositiveResult, PredecessorUnassigned
from .mobility import ContactModel, MobilityTrace, distance


@dataclass(frozen=True)
class ChannelParams:
    l_b_db: float = 20.0
    pl_d0_db: float = 46.4
    eta1: float = 2.0
    eta2: float = 4.0
    delta: float = 0.05
    wavelength_m: float = 0.0508
    gamma_a: float = 0.15
    gamma_b: float = 0.001
    # scales the 0.15*PL term; with c in Mbit, 1.2 Mbit at 100 dB takes ~0.3 s
    gamma_scale: float = 1.0 / 60.0
    data_unit_bits: float = 1e6
    radius_m: float = 500.0
    theta: float = 0.9

    def __post_init__(self):
        if self.eta1 != 2.0 or self.eta2 < self.eta1:
            raise ValueError("need eta1 = 2 <= eta2")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if not self.gamma_a > 0 or self.gamma_b < 0 or not self.gamma_scale > 0:
            raise ValueError("gamma_a and gamma_scale must be positive, gamma_b non-negative")
        if not self.radius_m > 0:
            raise ValueError("radius must be positive")
        if not (self.delta > 0 and self.wavelength_m > 0 and self.data_unit_bits > 0):
            raise ValueError("delta, wavelength and data unit must be positive")


def breakpoint_distance(h_t: float, h_r: float, params: ChannelParams) -> float:
    """d_brk = 4 h_t h_r / delta - lambda / 4, in meters."""
    if not (h_t > 0 and h_r > 0):
        raise ValueError("antenna heights must be positive")
    d = 4.0 * h_t * h_r / params.delta - params.wavelength_m / 4.0
    if d <= 1.0:
        raise NonPositiveResult(f"breakpoint distance {d} m is not beyond the 1 m reference")
    return d


def path_loss(d: float, d_brk: float, params: ChannelParams) -> float:
    """Dual-slope path loss in dB for a link of length ``d`` >= 1 m."""
    if d < 1.0:
        raise DistanceBelowModelRange(f"d={d} m is below the 1 m reference distance")
    if d <= d_brk:
        return params.l_b_db + 10.0 * params.eta1 * math.log10(d) + params.pl_d0_db
    return (
        params.l_b_db
        + 10.0 * (params.eta1 - params.eta2) * math.log10(d_brk)
        + 10.0 * params.eta2 * math.log10(d)
        + params.pl_d0_db
    )


def gamma(pl_db: float, params: ChannelParams) -> float:
    """Seconds per data unit for a link with loss ``pl_db``: a*kappa*PL + b."""
    return params.gamma_a * params.gamma_scale * pl_db + params.gamma_b


def link_loss(trace: MobilityTrace, src, dst, t, params: ChannelParams) -> float:
    d = max(distance(trace, src, dst, t), 1.0)  # co-located radios sit at the reference distance
    d_brk = breakpoint_distance(trace.vehicle(src).antenna_height, trace.vehicle(dst).antenna_height, params)
    return path_loss(d, d_brk, params)


def transmission_time(c, src, dst, t, trace: MobilityTrace, params: ChannelParams, enforce_range=True) -> float:
    """Seconds to move ``c`` bits from ``src`` to ``dst`` at time ``t``.

    Zero when both ends are the same vehicle. Raises VehicleAbsent if either
    end is absent and, unless ``enforce_range`` is off, LinkOutOfRange when the
    pair is farther apart than the radius.
    """
    if src == dst:
        return 0.0
    d = distance(trace, src, dst, t)
    if enforce_range and d > params.radius_m:
        raise LinkOutOfRange(f"{src}->{dst} at t={t}: {d:.1f} m > {params.radius_m} m")
    return c / params.data_unit_bits * gamma(link_loss(trace, src, dst, t, params), params)


def contact_survival(T: float, mu: float) -> float:
    """Probability that the residual contact lasts longer than ``T``."""
    return math.exp(-T * mu)


def link_feasible(c, src, dst, t, trace, params: ChannelParams, contact: ContactModel) -> bool:
    """True when ``c`` bits can cross ``src -> dst`` at ``t`` with survival
    probability at least theta. Absent vehicles give False; a zero-size
    transfer needs no link."""
    if not trace.is_present(dst, t):
        return False
    if src == dst or c == 0:
        return True
    if not trace.is_present(src, t):
        return False
    d = distance(trace, src, dst, t)
    if d > params.radius_m:
        return False
    tt = transmission_time(c, src, dst, t, trace, params)
    mu = contact._rate(trace, src, dst, t, d, params.radius_m)
    return contact_survival(tt, mu) >= params.theta


def candidate_set(sid, state) -> set:
    """Vehicles present at the subtask's scheduling time that can reliably
    receive the output of every (already placed) predecessor.

    Reference implementation over scalar link checks; ``state`` is a
    :class:`dagvc.sched.ScheduleState`.
    """
    dag, net = state.dag, state.network
    i = dag.index[sid]
    t = state.st(i)
    trace = net.trace
    hosts = []
    for j, c in dag.pred_data[i]:
        h = state.host[j]
        if h < 0:
            raise PredecessorUnassigned(dag.ids[j])
        hosts.append((trace.ids[h], c))
    out = set()
    for vid in trace.present_ids(t):
        if all(link_feasible(c, h, vid, t, trace, net.channel, net.contact) for h, c in hosts):
            out.add(vid)
    return out


def degree_set(sid, vid, state) -> set:
    """Vehicles that can reliably receive the largest output of ``sid`` from
    ``vid``, evaluated at the subtask's scheduling time. Empty for the exit."""
    dag, net = state.dag, state.network
    i = dag.index[sid]
    if not dag.succs[i]:
        return set()
    t = state.st(i)
    c = dag.max_out_data[i]
    trace = net.trace
    return {
        other for other in trace.present_ids(t) if link_feasible(c, vid, other, t, trace, net.channel, net.contact)
    }


class LinkRow:
    """Link quantities from one sender to every vehicle at one instant."""

    __slots__ = ("t", "h", "dist", "spb", "mu", "present", "linked")

    def __init__(self, t, h, dist, spb, mu, present, linked):
        self.t, self.h = t, h
        self.dist, self.spb, self.mu = dist, spb, mu
        self.present, self.linked = present, linked

    def tt(self, c):
        """Transfer times of ``c`` bits to every vehicle (0 to the sender)."""
        if c == 0:
            return np.zeros_like(self.spb)
        out = c * self.spb
        out[self.h] = 0.0
        return out

    def feasible(self, c, theta):
        if c == 0:
            ok = self.present.copy()
        else:
            with np.errstate(invalid="ignore"):
                ok = self.present & self.linked & (np.exp(-(c * self.spb) * self.mu) >= theta)
        ok[self.h] = self.present[self.h]
        return ok


class Network:
    """A trace bound to channel and contact parameters, with cached
    per-instant link rows. One instance per trial."""

    def __init__(self, trace: MobilityTrace, channel: ChannelParams | None = None, contact: ContactModel | None = None):
        self.trace = trace
        self.channel = channel or ChannelParams()
        self.contact = contact or ContactModel()
        self.n = trace.n_vehicles
        self.cpu = trace.cpu
        ch = self.channel
        h = trace.antenna
        self._dbrk = 4.0 * np.outer(h, h) / ch.delta - ch.wavelength_m / 4.0
        if self._dbrk.min() <= 1.0:
            raise NonPositiveResult("breakpoint distance not beyond 1 m for some antenna pair")
        self._log_dbrk = np.log10(self._dbrk)
        self._rows: dict = {}
        self._mats: dict = {}
        self.row_evals = 0

    def present(self, t):
        return self.trace.state_at(t)[2]

    def link_row(self, t, h) -> LinkRow:
        key = (t, h)
        row = self._rows.get(key)
        if row is not None:
            return row
        ch = self.channel
        P, Vel, present = self.trace.state_at(t)
        dist = np.hypot(P[:, 0] - P[h, 0], P[:, 1] - P[h, 1])
        d = np.maximum(dist, 1.0)
        logd = np.log10(d)
        near = ch.l_b_db + 10.0 * ch.eta1 * logd + ch.pl_d0_db
        far = ch.l_b_db + 10.0 * (ch.eta1 - ch.eta2) * self._log_dbrk[h] + 10.0 * ch.eta2 * logd + ch.pl_d0_db
        pl = np.where(d <= self._dbrk[h], near, far)
        spb = (ch.gamma_a * ch.gamma_scale * pl + ch.gamma_b) / ch.data_unit_bits
        with np.errstate(invalid="ignore"):
            linked = dist <= ch.radius_m
            mu = self.contact.rate_row(self.trace, h, dist, Vel, ch.radius_m)
        row = LinkRow(t, h, dist, spb, mu, present, linked & present)
        if len(self._rows) > 200_000:
            self._rows.clear()
        self._rows[key] = row
        self.row_evals += 1
        return row

    def matrices(self, t):
        """``(spb, mu, linked)`` between every ordered pair at ``t``.

        ``spb`` is 0 on the diagonal and NaN where either end is absent;
        ``linked`` is False for absent vehicles and on the diagonal.
        """
        m = self._mats.get(t)
        if m is not None:
            return m
        ch = self.channel
        P, Vel, present = self.trace.state_at(t)
        dist = np.hypot(P[:, None, 0] - P[None, :, 0], P[:, None, 1] - P[None, :, 1])
        d = np.maximum(dist, 1.0)
        logd = np.log10(d)
        near = ch.l_b_db + 10.0 * ch.eta1 * logd + ch.pl_d0_db
        far = ch.l_b_db + 10.0 * (ch.eta1 - ch.eta2) * self._log_dbrk + 10.0 * ch.eta2 * logd + ch.pl_d0_db
        spb = (ch.gamma_a * ch.gamma_scale * np.where(d <= self._dbrk, near, far) + ch.gamma_b) / ch.data_unit_bits
        np.fill_diagonal(spb, 0.0)
        with np.errstate(invalid="ignore"):
            linked = (dist <= ch.radius_m) & present[:, None] & present[None, :]
            mu = self.contact.rate_matrix(self.trace, dist, Vel, ch.radius_m)
        np.fill_diagonal(linked, False)
        if len(self._mats) > 10_000:
            self._mats.clear()
        m = self._mats[t] = (spb, mu, linked)
        return m

    def spb_matrix(self, t) -> np.ndarray:
        return self.matrices(t)[0]

    def feasible_matrix(self, t, c) -> np.ndarray:
        """``ok[a, b]``: ``c`` bits from a reliably reach b at ``t``
        (row ``a`` equals ``link_row(t, a).feasible(c, theta)``)."""
        spb, mu, linked = self.matrices(t)
        present = self.present(t)
        if c == 0:
            ok = np.tile(present, (self.n, 1))
        else:
            with np.errstate(invalid="ignore"):
                ok = linked & (np.exp(-(c * spb) * mu) >= self.channel.theta)
        idx = np.arange(self.n)
        ok[idx, idx] = present
        return ok

    def pair(self, t, a: int, b: int):
        """``(seconds per bit, mu, linked)`` for one ordered pair, computed
        without building a whole row."""
        tr, ch = self.trace, self.channel
        if a == b:
            return 0.0, 0.0, True
        ida, idb = tr.ids[a], tr.ids[b]
        xa, ya = tr.position(ida, t)
        xb, yb = tr.position(idb, t)
        dist = math.hypot(xa - xb, ya - yb)
        d = max(dist, 1.0)
        dbrk = self._dbrk[a, b]
        if d <= dbrk:
            pl = ch.l_b_db + 10.0 * ch.eta1 * math.log10(d) + ch.pl_d0_db
        else:
            pl = ch.l_b_db + 10.0 * (ch.eta1 - ch.eta2) * math.log10(dbrk) + 10.0 * ch.eta2 * math.log10(d) + ch.pl_d0_db
        spb = (ch.gamma_a * ch.gamma_scale * pl + ch.gamma_b) / ch.data_unit_bits
        mu = self.contact._rate(tr, ida, idb, t, dist, ch.radius_m)
        return spb, mu, dist <= ch.radius_m

    def pair_feasible(self, t, a: int, b: int, c: float) -> bool:
        tr = self.trace
        if not tr.arrival[b] <= t <= tr.departure[b]:
            return False
        if a == b or c == 0:
            return True
        if not tr.arrival[a] <= t <= tr.departure[a]:
            return False
        spb, mu, linked = self.pair(t, a, b)
        return linked and math.exp(-(c * spb) * mu) >= self.channel.theta
