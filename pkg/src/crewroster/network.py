"""Per-pilot pricing networks.

Each pilot gets an acyclic graph whose source-to-sink paths are the pilot's
candidate schedules.  Nodes are the source, the sink, one midnight node per
day boundary and a start/end node per pairing of the pilot's base.  Arc
costs sum to the schedule's satisfaction along any path; after
:func:`apply_duals` the reduced costs sum to the schedule's reduced cost.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import BuildError, ContractViolation, FreezeConflictError, ParameterError
from .model import (
    MINUTES_PER_DAY, VACATION_DAYS, Activity, Instance, Pairing, Pilot, RuleParams, Schedule,
    day_of, day_start,
)

# sort rank for nodes sharing a timestamp; every arc goes from lower to higher (time, rank)
_RANK = {"source": 0, "midnight": 1, "pairing_end": 2, "pairing_start": 3, "sink": 4}

ARC_KINDS = (
    "roster_start", "roster_end", "rest", "vacation", "pairing", "midnight_start",
    "pairing_connection", "postpairing_rest", "postpairing_vacation",
)
RESETTING = frozenset({"rest", "vacation", "postpairing_rest", "postpairing_vacation"})


@dataclass(frozen=True)
class Node:
    kind: str
    ref: object  # pairing id, day, or None
    time_minute: int

    @property
    def key(self) -> tuple:
        return (self.kind, self.ref)


@dataclass(frozen=True)
class ResourceDelta:
    time_minutes: int = 0
    days_off: int = 0
    flight_minutes: int = 0
    duty_days: int = 0
    resets_duty: bool = False


@dataclass(frozen=True)
class ResourceVector:
    time_minutes: int
    days_off_remaining: int
    flight_time_minutes: int
    consecutive_duty_days: int

    @classmethod
    def initial(cls, rules: RuleParams) -> "ResourceVector":
        return cls(0, rules.T_off, 0, 0)

    def extend(self, delta: ResourceDelta) -> "ResourceVector":
        duty = 0 if delta.resets_duty else self.consecutive_duty_days
        return ResourceVector(
            self.time_minutes + delta.time_minutes,
            max(0, self.days_off_remaining - delta.days_off),  # soft lower bound
            self.flight_time_minutes + delta.flight_minutes,
            duty + delta.duty_days,
        )


@dataclass(frozen=True)
class Arc:
    kind: str
    tail: int
    head: int
    cost: float
    delta: ResourceDelta
    pairing_id: str | None = None
    covered_preassigned: tuple[int, ...] = ()
    activity: Activity | None = None


@dataclass(frozen=True)
class SubproblemNetwork:
    pilot_id: str
    horizon_days: int
    rules: RuleParams
    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]
    reduced: tuple[float, ...] | None = None
    # arc-index adjacency and topological order are derived in __post_init__
    out_arcs: tuple[tuple[int, ...], ...] = field(default=(), compare=False, repr=False)
    order: tuple[int, ...] = field(default=(), compare=False, repr=False)
    cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        out = [[] for _ in self.nodes]
        for i, a in enumerate(self.arcs):
            out[a.tail].append(i)
        object.__setattr__(self, "out_arcs", tuple(tuple(x) for x in out))
        order = sorted(range(len(self.nodes)),
                       key=lambda i: (self.nodes[i].time_minute, _RANK[self.nodes[i].kind], i))
        object.__setattr__(self, "order", tuple(order))

    @property
    def source(self) -> int:
        return self.node_index[("source", None)]

    @property
    def sink(self) -> int:
        return self.node_index[("sink", None)]

    @property
    def node_index(self) -> dict[tuple, int]:
        return {n.key: i for i, n in enumerate(self.nodes)}

    def pairing_ids(self) -> set[str]:
        return {a.pairing_id for a in self.arcs if a.kind == "pairing"}

    def count_by_kind(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for a in self.arcs:
            out[a.kind] = out.get(a.kind, 0) + 1
        return out

    def path_schedule(self, arc_path: Sequence[int]) -> Schedule:
        acts = tuple(self.arcs[i].activity for i in arc_path if self.arcs[i].activity is not None)
        return Schedule(self.pilot_id, acts)

    def dump(self) -> str:
        """Line-oriented text dump for fixture diffing."""
        lines = [f"network {self.pilot_id} horizon={self.horizon_days} nodes={len(self.nodes)} arcs={len(self.arcs)}"]
        for i, n in enumerate(self.nodes):
            lines.append(f"node {i} {n.kind} {n.ref if n.ref is not None else '-'} "
                         f"day={day_of(n.time_minute)} t={n.time_minute}")
        for i, a in enumerate(self.arcs):
            d = a.delta
            red = "" if self.reduced is None else f" rc={self.reduced[i]:g}"
            lines.append(f"arc {a.tail}->{a.head} {a.kind} {a.pairing_id or '-'} c={a.cost:g}{red} "
                         f"dt={d.time_minutes} doff={d.days_off} dflight={d.flight_minutes} "
                         f"dduty={d.duty_days} reset={int(d.resets_duty)}")
        return "\n".join(lines) + "\n"


def _pairing_value(pilot: Pilot, w: Pairing) -> float:
    return float(sum(pilot.preferred_flights.get(f.id, 0.0) for f in w.flights))


def eligible_pairings(instance: Instance, pilot: Pilot) -> list[Pairing]:
    """Same-base pairings that leave every preassigned day off untouched."""
    H = instance.horizon_days
    out = []
    for w in instance.pairings:
        if w.base != pilot.base or w.start_minute < 0 or w.end_day > H:
            continue
        if any(d in pilot.preassigned_days_off for d in w.span_days):
            continue
        out.append(w)
    return out


def build_network(instance: Instance, pilot: Pilot) -> SubproblemNetwork:
    H = instance.horizon_days
    rules = instance.rules
    if pilot.id not in instance.pilot_by_id:
        raise BuildError(f"pilot {pilot.id} not in instance")
    for d in pilot.preassigned_days_off:
        if not 1 <= d <= H:
            raise BuildError(f"pilot {pilot.id}: preassigned day {d} outside the horizon")
    for d in pilot.preferred_vacations:
        if d < 1 or d + VACATION_DAYS - 1 > H:
            raise BuildError(f"pilot {pilot.id}: vacation starting day {d} exceeds the horizon")
    Q = pilot.preassigned_days_off

    nodes: list[Node] = [Node("source", None, 0)]
    nodes += [Node("midnight", d, day_start(d)) for d in range(1, H + 2)]
    nodes.append(Node("sink", None, H * MINUTES_PER_DAY))
    pairings = eligible_pairings(instance, pilot)
    for w in pairings:
        nodes.append(Node("pairing_start", w.id, w.start_minute))
        nodes.append(Node("pairing_end", w.id, w.end_minute))
    idx = {n.key: i for i, n in enumerate(nodes)}
    mid = lambda d: idx[("midnight", d)]
    arcs: list[Arc] = []

    def add(kind, tail, head, cost=0.0, days_off=0, flight=0, duty=0, pairing_id=None, covered=(), activity=None):
        dt = nodes[head].time_minute - nodes[tail].time_minute
        delta = ResourceDelta(dt, days_off, flight, duty, kind in RESETTING)
        beta = tuple(d for d in covered if d in Q)
        arcs.append(Arc(kind, tail, head, float(cost), delta, pairing_id, beta, activity))

    add("roster_start", idx[("source", None)], mid(1))
    add("roster_end", mid(H + 1), idx[("sink", None)])
    for d in range(1, H + 1):
        add("rest", mid(d), mid(d + 1), days_off=1, covered=(d,), activity=Activity.day_off(d))
    for s, v in sorted(pilot.preferred_vacations.items()):
        days = tuple(range(s, s + VACATION_DAYS))
        add("vacation", mid(s), mid(s + VACATION_DAYS), cost=v, days_off=VACATION_DAYS, covered=days,
            activity=Activity.vacation(s))

    min_rest = rules.T_min * 60
    by_start_day: dict[int, list[Pairing]] = {}
    for w in pairings:
        by_start_day.setdefault(w.start_day, []).append(w)
    for w in pairings:
        s, e = idx[("pairing_start", w.id)], idx[("pairing_end", w.id)]
        add("pairing", s, e, cost=_pairing_value(pilot, w), flight=w.work_minutes, duty=len(w.duty_days),
            pairing_id=w.id, activity=Activity.of_pairing(w))
        add("midnight_start", mid(w.start_day), s)
        if w.end_day == H:
            add("roster_end", e, idx[("sink", None)])
        for d in (w.end_day, w.end_day + 1):
            for b in by_start_day.get(d, ()):
                if b.start_minute - w.end_minute >= min_rest:
                    add("pairing_connection", e, idx[("pairing_start", b.id)])
        nxt = w.end_day + 1
        if nxt <= H:
            add("postpairing_rest", e, mid(nxt + 1), days_off=1, covered=(nxt,), activity=Activity.day_off(nxt))
        if nxt in pilot.preferred_vacations and nxt + VACATION_DAYS - 1 <= H:
            days = tuple(range(nxt, nxt + VACATION_DAYS))
            add("postpairing_vacation", e, mid(nxt + VACATION_DAYS), cost=pilot.preferred_vacations[nxt],
                days_off=VACATION_DAYS, covered=days, activity=Activity.vacation(nxt))

    net = SubproblemNetwork(pilot.id, H, rules, tuple(nodes), tuple(arcs))
    return _prune(net, [True] * len(arcs))


def _prune(net: SubproblemNetwork, keep: list[bool]) -> SubproblemNetwork:
    """Drop arcs with keep=False, then every node/arc not on a source-sink path."""
    n = len(net.nodes)
    src = net.source
    snk = net.sink
    fwd = [False] * n
    fwd[src] = True
    for u in net.order:
        if fwd[u]:
            for ai in net.out_arcs[u]:
                if keep[ai]:
                    fwd[net.arcs[ai].head] = True
    bwd = [False] * n
    bwd[snk] = True
    for u in reversed(net.order):
        for ai in net.out_arcs[u]:
            if keep[ai] and bwd[net.arcs[ai].head]:
                bwd[u] = True
    alive = [fwd[i] and bwd[i] for i in range(n)]
    if not alive[src]:
        # no path at all; keep only the endpoints so callers can detect emptiness
        alive[src] = alive[snk] = True
    remap = {}
    nodes = []
    for i, nd in enumerate(net.nodes):
        if alive[i]:
            remap[i] = len(nodes)
            nodes.append(nd)
    arcs, reduced = [], []
    for i, a in enumerate(net.arcs):
        if keep[i] and alive[a.tail] and alive[a.head] and fwd[a.tail] and bwd[a.head]:
            arcs.append(Arc(a.kind, remap[a.tail], remap[a.head], a.cost, a.delta, a.pairing_id,
                            a.covered_preassigned, a.activity))
            if net.reduced is not None:
                reduced.append(net.reduced[i])
    return SubproblemNetwork(net.pilot_id, net.horizon_days, net.rules, tuple(nodes), tuple(arcs),
                             tuple(reduced) if net.reduced is not None else None)


def has_path(net: SubproblemNetwork) -> bool:
    return any(a.tail == net.source for a in net.arcs)


@dataclass(frozen=True)
class Duals:
    alpha: dict[str, float]
    beta: dict[tuple[str, int], float]
    gamma: dict[str, float]

    @classmethod
    def zeros(cls, instance: Instance) -> "Duals":
        return cls({w.id: 0.0 for w in instance.pairings},
                   {(k.id, d): 0.0 for k in instance.pilots for d in k.preassigned_days_off},
                   {k.id: 0.0 for k in instance.pilots})


def apply_duals(net: SubproblemNetwork, duals: Duals) -> SubproblemNetwork:
    k = net.pilot_id
    if k not in duals.gamma:
        raise ContractViolation(f"missing dual gamma for pilot {k}")
    red = []
    for a in net.arcs:
        c = a.cost
        if a.kind == "pairing":
            if a.pairing_id not in duals.alpha:
                raise ContractViolation(f"missing dual alpha for pairing {a.pairing_id}")
            c -= duals.alpha[a.pairing_id]
        elif a.kind == "roster_start":
            c -= duals.gamma[k]
        for d in a.covered_preassigned:
            if (k, d) not in duals.beta:
                raise ContractViolation(f"missing dual beta for ({k}, day {d})")
            c -= duals.beta[(k, d)]
        red.append(c)
    # structural caches (flat arrays for the labeling kernel) do not depend on duals
    return SubproblemNetwork(net.pilot_id, net.horizon_days, net.rules, net.nodes, net.arcs, tuple(red),
                             cache=net.cache)


def schedule_reduced_cost(cost: float, schedule: Schedule, pilot: Pilot, duals: Duals, horizon_days: int) -> float:
    """Reduced cost of a schedule computed from its coverage footprint."""
    rc = cost - duals.gamma[pilot.id]
    if not schedule.rostered:
        return rc
    rc -= sum(duals.alpha[w] for w in schedule.pairing_ids)
    off = schedule.off_days(horizon_days)
    rc -= sum(duals.beta[(pilot.id, d)] for d in pilot.preassigned_days_off if d in off)
    return rc


# ------------------------------------------------------------------ windows

@dataclass(frozen=True)
class WindowSpec:
    index: int
    first_day: int
    last_day: int

    def contains(self, day: int) -> bool:
        return self.first_day <= day <= self.last_day


def compute_windows(horizon_days: int, window_len: int, overlap: int) -> list[WindowSpec]:
    if not (0 <= overlap < window_len <= horizon_days):
        raise ParameterError(f"need 0 <= overlap < window_len <= horizon (got {overlap}, {window_len}, {horizon_days})")
    step = window_len - overlap
    out = []
    start = 1
    while True:
        end = min(start + window_len - 1, horizon_days)
        out.append(WindowSpec(len(out), start, end))
        if end == horizon_days:
            return out
        start += step


@dataclass(frozen=True)
class FreezeMask:
    imposed: frozenset[tuple[str, str]] = frozenset()
    forbidden: frozenset[tuple[str, str]] = frozenset()
    mode: str = "win_basic"

    def __post_init__(self):
        if self.mode not in ("win_basic", "win_ml"):
            raise ParameterError(f"unknown windowing mode {self.mode!r}")
        if self.imposed & self.forbidden:
            raise FreezeConflictError(f"pairs both imposed and forbidden: {sorted(self.imposed & self.forbidden)[:3]}")

    def imposed_for(self, pilot_id: str) -> set[str]:
        return {w for k, w in self.imposed if k == pilot_id}

    def forbidden_for(self, pilot_id: str) -> set[str]:
        return {w for k, w in self.forbidden if k == pilot_id}


def restrict_pairings(net: SubproblemNetwork, allowed: Iterable[str] | None = None,
                      removed: Iterable[str] = (), imposed: Iterable[str] = ()) -> SubproblemNetwork:
    """Keep pairing arcs in ``allowed`` (all when None) minus ``removed``; force ``imposed`` onto every path."""
    allowed = None if allowed is None else set(allowed)
    removed = set(removed)
    imposed = set(imposed)
    present = net.pairing_ids()
    missing = imposed - present
    if missing:
        raise FreezeConflictError(f"pilot {net.pilot_id} cannot carry imposed pairings {sorted(missing)}")
    spans = []
    for a in net.arcs:
        if a.kind == "pairing" and a.pairing_id in imposed:
            spans.append((net.nodes[a.tail].time_minute, net.nodes[a.head].time_minute, a.pairing_id))
    keep = []
    for a in net.arcs:
        ok = True
        if a.kind == "pairing":
            w = a.pairing_id
            ok = w in imposed or ((allowed is None or w in allowed) and w not in removed)
        if ok:
            t0, t1 = net.nodes[a.tail].time_minute, net.nodes[a.head].time_minute
            for s, e, w in spans:
                if a.kind == "pairing" and a.pairing_id == w:
                    continue
                # an arc jumping over any part of an imposed pairing would bypass it
                if t1 > s and t0 < e:
                    ok = False
                    break
        keep.append(ok)
    out = _prune(net, keep)
    if imposed and not imposed <= out.pairing_ids():
        raise FreezeConflictError(f"imposed pairings for {net.pilot_id} are mutually incompatible")
    if not has_path(out):
        raise FreezeConflictError(f"no feasible path left for pilot {net.pilot_id}")
    return out


def restrict_for_window(net: SubproblemNetwork, window: WindowSpec, mask: FreezeMask) -> SubproblemNetwork:
    k = net.pilot_id
    imposed = mask.imposed_for(k)
    forbidden = mask.forbidden_for(k)
    allowed = set()
    for a in net.arcs:
        if a.kind == "pairing":
            start_day = day_of(net.nodes[a.tail].time_minute)
            if window.contains(start_day) and a.pairing_id not in forbidden:
                allowed.add(a.pairing_id)
    return restrict_pairings(net, allowed=allowed, imposed=imposed)


def impose_succession(net: SubproblemNetwork, first: str, second: str) -> SubproblemNetwork:
    """Whenever ``first`` is flown, ``second`` must follow it directly."""
    idx = net.node_index
    end = idx.get(("pairing_end", first))
    if end is None:
        return net
    target = idx.get(("pairing_start", second))
    keep = [not (a.tail == end and a.head != target) for a in net.arcs]
    return _prune(net, keep)


def forbid_succession(net: SubproblemNetwork, first: str, second: str) -> SubproblemNetwork:
    idx = net.node_index
    end, start = idx.get(("pairing_end", first)), idx.get(("pairing_start", second))
    keep = [not (a.tail == end and a.head == start) for a in net.arcs]
    return _prune(net, keep)


def enumerate_paths(net: SubproblemNetwork, limit: int = 1_000_000) -> list[tuple[int, ...]]:
    """All source-sink arc paths, ignoring resources (oracle use on small networks)."""
    out: list[tuple[int, ...]] = []
    stack = [(net.source, ())]
    while stack:
        u, path = stack.pop()
        if u == net.sink:
            out.append(path)
            if len(out) > limit:
                raise ParameterError("path enumeration limit exceeded")
            continue
        for ai in reversed(net.out_arcs[u]):
            stack.append((net.arcs[ai].head, path + (ai,)))
    return out


def path_resources(net: SubproblemNetwork, path: Sequence[int]) -> tuple[ResourceVector, bool]:
    """Walk a path applying resource extensions; returns final vector and window feasibility."""
    r = ResourceVector.initial(net.rules)
    ok = True
    fmax = net.rules.T_flight * 60
    for ai in path:
        r = r.extend(net.arcs[ai].delta)
        if r.flight_time_minutes > fmax or r.consecutive_duty_days > net.rules.T_work:
            ok = False
    return r, ok and r.days_off_remaining == 0
