"""Column generation and depth-first heuristic branching.

No backtracking: the search dives by fixing columns or imposing direct
successions until the LP relaxation is integral.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import ContractViolation, ParameterError
from .master import Column, RestrictedMaster, RmpSolution
from .model import Instance, Roster, check_roster, roster_objective
from .network import (
    SubproblemNetwork, apply_duals, build_network, forbid_succession, impose_succession, restrict_pairings,
)
from .rcspp import PricingStats, solve_pricing

INTEGRALITY_TOL = 1e-6


@dataclass(frozen=True)
class BnpParams:
    N_iter: float = 500           # math.inf allowed (exact mode)
    m_iter: float = 0.05          # percent
    cfix_threshold: float = 0.70
    itimpose_threshold: float = 0.70
    dominance_resource_count: int = 3
    max_columns_per_pilot: int = 5
    epsilon: float = 1e-6

    def __post_init__(self):
        for name in ("cfix_threshold", "itimpose_threshold"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ParameterError(f"{name} must lie in (0, 1], got {v}")
        if self.N_iter < 1:
            raise ParameterError("N_iter must be >= 1")
        if self.m_iter < 0:
            raise ParameterError("m_iter must be >= 0")
        if self.dominance_resource_count not in (0, 1, 2, 3):
            raise ParameterError("dominance_resource_count must be in 0..3")
        if self.max_columns_per_pilot < 1:
            raise ParameterError("max_columns_per_pilot must be >= 1")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "BnpParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown B&P parameters: {sorted(unknown)}")
        return cls(**d)


ALG_BASIC = BnpParams()
ALG_FAST = BnpParams(N_iter=4, m_iter=1.00, dominance_resource_count=1)
EXACT = BnpParams(N_iter=math.inf, m_iter=0.0)
PRESETS = {"alg_basic": ALG_BASIC, "alg_fast": ALG_FAST, "exact": EXACT}


@dataclass(frozen=True)
class BranchDecision:
    kind: str  # fix_column | impose_succession | forbid_succession
    score: float
    column: Column | None = None
    pilot_id: str | None = None
    first: str | None = None
    second: str | None = None

    def describe(self) -> str:
        if self.kind == "fix_column":
            c = self.column
            return f"fix {c.pilot_id} pairings={','.join(sorted(c.pairings)) or '-'} value={self.score:.4f}"
        return f"{self.kind.split('_')[0]} {self.pilot_id} {self.first}->{self.second} score={self.score:.4f}"


@dataclass
class CgTrace:
    iterations: int = 0
    columns_added: int = 0
    objectives: list[float] = field(default_factory=list)
    stop: str = ""


@dataclass
class BnpResult:
    roster: Roster
    objective: float
    root_lp: float
    lp_after_branch: list[float]
    branch_steps: int
    cg_iterations: int
    pricing: PricingStats
    work: int  # deterministic effort counter: labels + LP column-rows


class RunLog:
    """Line-oriented progress records; ``sink`` receives each formatted line."""

    def __init__(self, sink: Callable[[str], None] | None = None, prefix: str = ""):
        self.sink = sink
        self.prefix = prefix
        self.lines: list[str] = []

    def write(self, tag: str, **fields):
        line = self.prefix + tag + "".join(f" {k}={_fmt(v)}" for k, v in fields.items())
        self.lines.append(line)
        if self.sink is not None:
            self.sink(line)

    def child(self, prefix: str) -> "RunLog":
        out = RunLog(self.sink, self.prefix + prefix)
        out.lines = self.lines
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


class PricingContext:
    """Per-pilot networks kept in step with branching decisions."""

    def __init__(self, instance: Instance, networks: dict[str, SubproblemNetwork], state: RestrictedMaster):
        self.instance = instance
        self.networks = dict(networks)
        self.state = state

    def price(self, sol: RmpSolution, params: BnpParams, stats: PricingStats) -> list[Column]:
        H = self.instance.horizon_days
        pilots = self.instance.pilot_by_id
        out = []
        for k in self.state.active_pilots():
            net = self.networks.get(k.id)
            if net is None:
                continue
            priced = solve_pricing(apply_duals(net, sol.duals), params.dominance_resource_count,
                                   params.max_columns_per_pilot, params.epsilon, stats)
            out += [Column.from_schedule(pilots[k.id], p.schedule, H) for p in priced]
        return out

    def apply(self, d: BranchDecision):
        st = self.state
        if d.kind == "fix_column":
            covered = st.fix_column(d.column)
            self.networks.pop(d.column.pilot_id, None)
            if covered:
                for k, net in list(self.networks.items()):
                    if covered & net.pairing_ids():
                        self.networks[k] = restrict_pairings(net, removed=covered, imposed=st.must_fly.get(k, ()))
        else:
            kind = "impose" if d.kind == "impose_succession" else "forbid"
            st.apply_intertask(kind, d.pilot_id, d.first, d.second)
            net = self.networks.get(d.pilot_id)
            if net is not None:
                if kind == "impose":
                    self.networks[d.pilot_id] = impose_succession(net, d.first, d.second)
                else:
                    self.networks[d.pilot_id] = forbid_succession(net, d.first, d.second)


def column_generation(state: RestrictedMaster, ctx: PricingContext, params: BnpParams,
                      stats: PricingStats | None = None, log: RunLog | None = None) -> tuple[RmpSolution, CgTrace]:
    stats = stats if stats is not None else PricingStats()
    trace = CgTrace()
    while True:
        sol = state.solve()
        trace.iterations += 1
        trace.objectives.append(sol.objective)
        cols = ctx.price(sol, params, stats)
        added = state.add_columns(cols)
        trace.columns_added += added
        if log:
            log.write("cg", it=trace.iterations, lp=sol.objective, added=added, pool=len(state.pool))
        if added == 0:
            trace.stop = "no_improving_column"
            return sol, trace
        n = params.N_iter
        if n != math.inf and len(trace.objectives) > n:
            best = max(trace.objectives)
            old = trace.objectives[-1 - int(n)]
            rel = 100.0 * (trace.objectives[-1] - old) / max(abs(best), 1.0)
            if rel < params.m_iter:
                trace.stop = "min_improvement"
                # the pool grew since the last solve; report the LP over it
                sol = state.solve()
                return sol, trace


def _frac(v: float) -> bool:
    return INTEGRALITY_TOL < v < 1 - INTEGRALITY_TOL


def is_integral(sol: RmpSolution) -> bool:
    return not any(_frac(v) for v in sol.values)


def select_branch(sol: RmpSolution, params: BnpParams, state: RestrictedMaster | None = None) -> list[BranchDecision]:
    if is_integral(sol):
        raise ContractViolation("solution is already integral")
    vals = [(float(v), i, c) for i, (c, v) in enumerate(zip(sol.columns, sol.values))]

    picks: list[BranchDecision] = []
    pilots, used = set(), set()
    for v, i, c in sorted((x for x in vals if x[0] >= params.cfix_threshold), key=lambda x: (-x[0], x[1])):
        if c.pilot_id in pilots or c.pairings & used:
            continue
        picks.append(BranchDecision("fix_column", v, column=c))
        pilots.add(c.pilot_id)
        used |= c.pairings
        if len(picks) == 3:
            break
    if picks:
        return picks

    imposed = state.imposed if state is not None else {}
    flow: dict[tuple[str, str, str], float] = {}
    start: dict[str, int] = {}
    for v, _, c in vals:
        if v <= INTEGRALITY_TOL or c.static:
            continue
        for a, b in c.successions():
            if imposed.get(c.pilot_id, {}).get(a) == b:
                continue
            key = (c.pilot_id, a, b)
            flow[key] = flow.get(key, 0.0) + v
        for w in c.schedule.pairings:
            start[w.id] = w.start_minute
    if flow:
        top = max(flow.values())
        scored = sorted(((f / top, key) for key, f in flow.items()),
                        key=lambda x: (-round(x[0], 12), start[x[1][1]], x[1][0], x[1][1], x[1][2]))
        firsts = set()
        for s, (k, a, b) in scored:
            if s < params.itimpose_threshold or len(picks) == 3:
                break
            if (k, a) in firsts:
                continue
            firsts.add((k, a))
            picks.append(BranchDecision("impose_succession", s, pilot_id=k, first=a, second=b))
        if picks:
            return picks

    v, i, c = max((x for x in vals if _frac(x[0])), key=lambda x: (x[0], -x[1]))
    return [BranchDecision("fix_column", v, column=c)]


def build_networks(instance: Instance) -> dict[str, SubproblemNetwork]:
    return {k.id: build_network(instance, k) for k in instance.pilots}


def solve_bnp(instance: Instance, networks: dict[str, SubproblemNetwork] | None = None,
              params: BnpParams = ALG_BASIC, warm_columns: Iterable[Column] = (),
              static_pilots: Iterable[str] | None = None, must_fly: dict[str, set[str]] | None = None,
              log: RunLog | None = None) -> BnpResult:
    """Dive to an integer roster.

    ``must_fly`` lists pairings each pilot's network is forced to carry (window
    masks); they stay imposed when networks are re-restricted after fixings.
    """
    if networks is None:
        networks = build_networks(instance)
    state = RestrictedMaster(instance, warm_columns, static_pilots, must_fly)
    ctx = PricingContext(instance, networks, state)
    stats = PricingStats()
    log = log or RunLog()

    sol, tr = column_generation(state, ctx, params, stats, log)
    root = sol.objective
    cg_its = tr.iterations
    lp_trace = []
    steps = 0
    while not is_integral(sol):
        for d in select_branch(sol, params, state):
            log.write("branch", step=steps + 1, decision=d.describe())
            ctx.apply(d)
        steps += 1
        sol, tr = column_generation(state, ctx, params, stats, log)
        cg_its += tr.iterations
        lp_trace.append(sol.objective)

    chosen = list(state.fixed) + [c for c, v in zip(sol.columns, sol.values) if v > 0.5]
    roster = Roster.from_schedules(instance, [c.schedule for c in chosen if not c.static])
    report = check_roster(instance, roster)
    if not report.feasible:
        raise ContractViolation("branch-and-price produced an infeasible roster: " + "; ".join(report.lines()[:5]))
    obj = roster_objective(instance, roster).objective
    log.write("done", objective=obj, root_lp=root, steps=steps, cg_iterations=cg_its, labels=stats.labels_created)
    return BnpResult(roster, obj, root, lp_trace, steps, cg_its, stats, stats.labels_created + cg_its * len(state.pool))
