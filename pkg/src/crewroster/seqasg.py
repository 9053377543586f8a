"""Sequential day-by-day assignment driven by a small utility network.

Each day, available pilots are matched to the pairings departing that day
or to a personal rest action (day off, or a preferred vacation starting
that day).  Edge weights come from :class:`PolicyNet`; the matching is an
exact max-weight assignment.  Weights are tuned with CMA-ES on training
scenarios, using the roster objective as fitness.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContractViolation, NumericError, ParseError, SchemaVersionError
from .model import (
    PREFERENCE_BUDGET, VACATION_DAYS, Activity, Instance, Pairing, Pilot, Roster, Schedule,
    check_schedule, roster_objective,
)

ARCH = (13, 4, 4, 1)
N_FEATURES = ARCH[0]
N_PARAMS = sum(a * b + b for a, b in zip(ARCH, ARCH[1:]))  # 81
POLICY_FORMAT = "crewroster.policy"
POLICY_VERSION = 1

_INFEASIBLE = -1e12


class PolicyNet:
    """13-4-4-1 feed-forward net, ReLU on both hidden layers, linear output."""

    def __init__(self, weights: Sequence[float] | np.ndarray):
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.size != N_PARAMS:
            raise ContractViolation(f"expected {N_PARAMS} weights, got {w.size}")
        self.weights = w.copy()
        self.layers = []
        i = 0
        for n_in, n_out in zip(ARCH, ARCH[1:]):
            W = w[i:i + n_in * n_out].reshape(n_out, n_in)
            i += n_in * n_out
            b = w[i:i + n_out]
            i += n_out
            self.layers.append((W, b))

    @classmethod
    def zeros(cls) -> "PolicyNet":
        return cls(np.zeros(N_PARAMS))

    @classmethod
    def random(cls, seed: int, scale: float = 1.0) -> "PolicyNet":
        return cls(np.random.default_rng(seed).normal(0.0, scale, N_PARAMS))

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Batch forward pass; ``X`` has shape (n, 13)."""
        if not np.all(np.isfinite(self.weights)):
            raise NumericError("policy weights contain NaN or inf")
        h = np.asarray(X, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != N_FEATURES:
            raise ContractViolation(f"feature matrix must have shape (n, {N_FEATURES})")
        last = len(self.layers) - 1
        for j, (W, b) in enumerate(self.layers):
            h = h @ W.T + b
            if j < last:
                h = np.maximum(h, 0.0)
        return h[:, 0]

    def to_json(self) -> str:
        return json.dumps({"format": POLICY_FORMAT, "version": POLICY_VERSION, "architecture": list(ARCH),
                           "activation": "relu", "weights": [float(x) for x in self.weights]}, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PolicyNet":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"policy file is not JSON: {e}") from e
        if not isinstance(obj, dict) or obj.get("format") != POLICY_FORMAT:
            raise ParseError("not a policy file")
        if obj.get("version") != POLICY_VERSION:
            raise SchemaVersionError(f"unsupported policy version {obj.get('version')!r}")
        if obj.get("architecture") != list(ARCH):
            raise ParseError(f"$.architecture: expected {list(ARCH)}")
        return cls(obj["weights"])


def utility(policy: PolicyNet, features: Sequence[float]) -> float:
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (N_FEATURES,):
        raise ContractViolation(f"feature vector must have length {N_FEATURES}")
    return float(policy.forward(x[None, :])[0])


# ------------------------------------------------------------------ state

@dataclass
class PilotState:
    pilot: Pilot
    activities: list[Activity] = field(default_factory=list)
    utilities: list[float] = field(default_factory=list)
    busy_until: int = 0            # last day covered by an activity
    flight_minutes: int = 0
    duty_run: int = 0              # duty days in the current work block
    days_off: int = 0
    last_pairing: Pairing | None = None


@dataclass
class RosterState:
    instance: Instance
    day: int = 1
    pilots: dict[str, PilotState] = field(default_factory=dict)
    assigned: dict[str, str] = field(default_factory=dict)
    unassigned: set[str] = field(default_factory=set)
    edges_scored: int = 0

    @classmethod
    def start(cls, instance: Instance) -> "RosterState":
        return cls(instance, 1, {k.id: PilotState(k) for k in instance.pilots})

    def available(self, pilot_id: str) -> bool:
        return self.pilots[pilot_id].busy_until < self.day

    def departing_today(self) -> list[Pairing]:
        return [w for w in self.instance.pairings if w.start_day == self.day and w.id not in self.assigned
                and w.id not in self.unassigned]

    def to_roster(self) -> Roster:
        return Roster.from_schedules(self.instance, [Schedule(k, tuple(p.activities)) for k, p in self.pilots.items()])


def _pairing_feasible(st: RosterState, ps: PilotState, w: Pairing) -> bool:
    inst = st.instance
    rules = inst.rules
    k = ps.pilot
    if w.base != k.base or w.end_day > inst.horizon_days or w.start_minute < 0:
        return False
    if any(d in k.preassigned_days_off for d in w.span_days):
        return False
    if ps.flight_minutes + w.work_minutes > rules.T_flight * 60:
        return False
    prev = ps.last_pairing
    run = ps.duty_run if prev is not None and w.start_day <= prev.end_day + 1 else 0
    if run + len(w.duty_days) > rules.T_work:
        return False
    if prev is not None and w.start_minute - prev.end_minute < rules.T_min * 60:
        return False
    # every remaining day after the pairing could still be off
    return ps.days_off + (inst.horizon_days - w.end_day) >= rules.T_off


def _vacation_ok(st: RosterState, ps: PilotState) -> bool:
    d = st.day
    return d in ps.pilot.preferred_vacations and d + VACATION_DAYS - 1 <= st.instance.horizon_days


def available_actions(st: RosterState, pilot_id: str, today: list[Pairing] | None = None) -> list[Activity]:
    ps = st.pilots[pilot_id]
    if not st.available(pilot_id):
        return []
    acts = [Activity.day_off(st.day)]
    if st.day in ps.pilot.preassigned_days_off:
        return acts
    if _vacation_ok(st, ps):
        acts.append(Activity.vacation(st.day))
    for w in today if today is not None else st.departing_today():
        if _pairing_feasible(st, ps, w):
            acts.append(Activity.of_pairing(w))
    return acts


def _pressure(st: RosterState, base: str, today: list[Pairing]) -> float:
    n_w = sum(1 for w in today if w.base == base)
    n_k = sum(1 for k, p in st.pilots.items() if p.pilot.base == base and st.available(k))
    return min(1.0, n_w / max(1, n_k))


def features(st: RosterState, pilot_id: str, action: Activity, today: list[Pairing] | None = None) -> np.ndarray:
    today = today if today is not None else st.departing_today()
    if action.key() not in {a.key() for a in available_actions(st, pilot_id, today)}:
        raise ContractViolation(f"action {action.key()} not available to {pilot_id} on day {st.day}")
    return _features(st, st.pilots[pilot_id], action, _pressure(st, st.pilots[pilot_id].pilot.base, today))


def _features(st: RosterState, ps: PilotState, a: Activity, pressure: float) -> np.ndarray:
    inst = st.instance
    rules = inst.rules
    H = inst.horizon_days
    k = ps.pilot
    if a.kind == "pairing":
        w = a.pairing
        dur, hours = w.span_days.stop - w.span_days.start, w.work_minutes / 60.0
        pref = sum(k.preferred_flights.get(f.id, 0.0) for f in w.flights)
    elif a.kind == "vacation":
        dur, hours, pref = VACATION_DAYS, 0.0, k.preferred_vacations[a.day]
    else:
        dur, hours, pref = 1, 0.0, 0.0
    return np.array([
        (st.day - 1) / H,
        ps.flight_minutes / (rules.T_flight * 60),
        ps.duty_run / rules.T_work,
        max(0, rules.T_off - ps.days_off) / rules.T_off,
        (H - st.day + 1) / H,
        float(a.kind == "pairing"),
        float(a.kind == "day_off"),
        float(a.kind == "vacation"),
        min(1.0, dur / 5),
        min(1.0, hours / 40),
        min(1.0, pref / PREFERENCE_BUDGET),
        pressure,
        float(st.day + 1 in k.preassigned_days_off),
    ])


def _assign(st: RosterState, ps: PilotState, a: Activity, u: float):
    ps.activities.append(a)
    ps.utilities.append(u)
    ps.busy_until = a.covered_days[-1]
    if a.kind == "pairing":
        w = a.pairing
        prev = ps.last_pairing
        cont = prev is not None and w.start_day <= prev.end_day + 1
        ps.duty_run = (ps.duty_run if cont else 0) + len(w.duty_days)
        ps.flight_minutes += w.work_minutes
        ps.last_pairing = w
        st.assigned[w.id] = ps.pilot.id
    else:
        ps.days_off += len(a.covered_days)
        ps.duty_run = 0


def matching_edges(st: RosterState, policy: PolicyNet):
    """Return (pilot ids, pairings, weight matrix) for today's assignment problem.

    Columns are today's pairings followed by one personal rest column per
    pilot valued at its best rest action.
    """
    today = sorted(st.departing_today(), key=lambda w: w.id)
    pids = sorted(k for k in st.pilots if st.available(k))
    rows, acts, feats = [], [], []
    pressure = {}
    for i, k in enumerate(pids):
        ps = st.pilots[k]
        b = ps.pilot.base
        if b not in pressure:
            pressure[b] = _pressure(st, b, today)
        for a in available_actions(st, k, today):
            rows.append(i)
            acts.append(a)
            feats.append(_features(st, ps, a, pressure[b]))
    util = policy.forward(np.array(feats)) if feats else np.zeros(0)
    st.edges_scored += len(feats)
    col_of = {w.id: j for j, w in enumerate(today)}
    nW = len(today)
    M = np.full((len(pids), nW + len(pids)), _INFEASIBLE)
    rest_choice: dict[int, tuple[float, Activity]] = {}
    for i, a, u in zip(rows, acts, util):
        if a.kind == "pairing":
            M[i, col_of[a.pairing.id]] = u
        elif i not in rest_choice or u > rest_choice[i][0]:
            rest_choice[i] = (float(u), a)
    for i, (u, _) in rest_choice.items():
        M[i, nW + i] = u
    return pids, today, M, rest_choice


def run_day(st: RosterState, policy: PolicyNet) -> RosterState:
    pids, today, M, rest = matching_edges(st, policy)
    if pids:
        r, c = linear_sum_assignment(M, maximize=True)
        nW = len(today)
        for i, j in zip(r, c):
            ps = st.pilots[pids[i]]
            if j < nW and M[i, j] > _INFEASIBLE / 2:
                _assign(st, ps, Activity.of_pairing(today[j]), float(M[i, j]))
            else:
                u, a = rest[i]
                _assign(st, ps, a, u)
    for w in today:
        if w.id not in st.assigned:
            st.unassigned.add(w.id)
    st.day += 1
    return st


def _repair(instance: Instance, ps: PilotState) -> Schedule:
    """Drop trailing lowest-utility pairings until the days-off minimum holds."""
    rules = instance.rules
    acts, utils = list(ps.activities), list(ps.utilities)
    while True:
        s = Schedule(ps.pilot.id, tuple(acts))
        viol = check_schedule(ps.pilot, s, rules, instance.horizon_days)
        if not any(v.kind == "insufficient_days_off" for v in viol):
            return s
        idx = [i for i, a in enumerate(acts) if a.kind == "pairing"]
        if not idx:
            return s
        tail = idx[-3:]
        drop = min(tail, key=lambda i: (utils[i], -i))
        days = acts[drop].covered_days
        acts[drop:drop + 1] = [Activity.day_off(d) for d in days]
        utils[drop:drop + 1] = [0.0] * len(days)


def run_seqasg(instance: Instance, policy: PolicyNet) -> Roster:
    return seqasg_with_state(instance, policy)[0]


def seqasg_with_state(instance: Instance, policy: PolicyNet) -> tuple[Roster, RosterState]:
    st = RosterState.start(instance)
    while st.day <= instance.horizon_days:
        run_day(st, policy)
    scheds = [_repair(instance, ps) for ps in st.pilots.values()]
    return Roster.from_schedules(instance, scheds), st


# ------------------------------------------------------------------ training

@dataclass(frozen=True)
class TrainConfig:
    popsize: int = 17
    max_generations: int = 120
    sigma0: float = 0.3
    seed: int = 0
    stagnation_generations: int = 20
    stagnation_rel: float = 1e-4  # 0.01 %

    def __post_init__(self):
        if self.popsize < 2:
            raise ContractViolation("population size must be >= 2")
        if self.max_generations < 1:
            raise ContractViolation("max_generations must be >= 1")


@dataclass
class TrainResult:
    policy: PolicyNet
    fitness: float
    history: list[tuple[int, float, float]]  # generation, best-ever, generation mean

    def log_lines(self) -> list[str]:
        return [f"gen={g} best={b:.6f} mean={m:.6f}" for g, b, m in self.history]


def fitness(policy: PolicyNet, instances: Sequence[Instance]) -> float:
    return float(np.mean([roster_objective(i, run_seqasg(i, policy)).objective for i in instances]))


def train_cmaes(instances: Sequence[Instance], config: TrainConfig = TrainConfig(),
                progress: Callable[[str], None] | None = None) -> TrainResult:
    import cma

    if not instances:
        raise ContractViolation("need at least one training scenario")
    es = cma.CMAEvolutionStrategy(np.zeros(N_PARAMS), config.sigma0,
                                  {"popsize": config.popsize, "seed": config.seed + 1, "verbose": -9,
                                   "maxiter": config.max_generations, "tolfun": 0, "tolx": 0,
                                   "tolfunhist": 0, "tolstagnation": 10**9, "tolflatfitness": 10**9})
    best_w, best_f = None, -math.inf
    history = []
    for g in range(1, config.max_generations + 1):
        cands = es.ask()
        fits = [fitness(PolicyNet(c), instances) for c in cands]
        es.tell(cands, [-f for f in fits])
        i = int(np.argmax(fits))
        if fits[i] > best_f:
            best_f, best_w = fits[i], np.array(cands[i])
        history.append((g, best_f, float(np.mean(fits))))
        if progress:
            progress(f"gen={g} best={best_f:.6f} mean={np.mean(fits):.6f}")
        n = config.stagnation_generations
        if len(history) > n:
            old = history[-1 - n][1]
            if best_f - old <= config.stagnation_rel * max(abs(old), 1e-12):
                break
    return TrainResult(PolicyNet(best_w), best_f, history)
