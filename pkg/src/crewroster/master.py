"""Restricted master problem over a pool of schedule columns.

The LP relaxation maximises total satisfaction minus the unassigned-flight
and missed-day-off penalties subject to: every pairing covered once (or its
slack used), every preassigned day off granted once (or its slack used),
and one schedule per pilot.  Solved with HiGHS through ``scipy.optimize.linprog``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csc_matrix

from .errors import DecisionError, InfeasibleInput, NumericError, SizeError
from .model import (
    Instance, Pilot, Roster, Schedule, check_schedule, roster_objective, schedule_satisfaction,
)
from .network import Duals, build_network, enumerate_paths

FEAS_TOL = 1e-7
OPT_TOL = 1e-6


@dataclass(frozen=True)
class Column:
    pilot_id: str
    schedule: Schedule
    cost: float
    pairings: frozenset[str]
    granted: frozenset[int]  # preassigned days off honoured by the schedule
    static: bool = False

    @classmethod
    def from_schedule(cls, pilot: Pilot, schedule: Schedule, horizon_days: int) -> "Column":
        if not schedule.rostered:
            return cls.empty(pilot)
        off = schedule.off_days(horizon_days)
        return cls(pilot.id, schedule, schedule_satisfaction(pilot, schedule), schedule.pairing_ids,
                   frozenset(d for d in pilot.preassigned_days_off if d in off))

    @classmethod
    def empty(cls, pilot: Pilot) -> "Column":
        """Static no-schedule column: satisfies only the one-schedule-per-pilot row."""
        return cls(pilot.id, Schedule.unrostered(pilot.id), 0.0, frozenset(), frozenset(), static=True)

    @property
    def key(self) -> tuple:
        return (self.pilot_id, self.pairings, self.granted, round(self.cost, 9), self.static)

    def successions(self) -> list[tuple[str, str]]:
        return self.schedule.successions()


class ColumnPool:
    def __init__(self):
        self._cols: dict[tuple, Column] = {}

    def add(self, col: Column) -> bool:
        if col.key in self._cols:
            return False
        self._cols[col.key] = col
        return True

    def remove_if(self, pred) -> int:
        drop = [k for k, c in self._cols.items() if pred(c)]
        for k in drop:
            del self._cols[k]
        return len(drop)

    def __iter__(self):
        return iter(self._cols.values())

    def __len__(self):
        return len(self._cols)


@dataclass
class RmpSolution:
    objective: float
    columns: list[Column]
    values: np.ndarray
    unassigned: dict[str, float]
    missed: dict[tuple[str, int], float]
    duals: Duals
    fixed: list[Column]
    status: str

    def value_of(self, col: Column) -> float:
        for c, v in zip(self.columns, self.values):
            if c.key == col.key:
                return float(v)
        return 1.0 if any(f.key == col.key for f in self.fixed) else 0.0

    def is_integral(self, tol: float = 1e-6) -> bool:
        return bool(np.all(np.minimum(np.abs(self.values), np.abs(1 - self.values)) <= tol))


@dataclass(frozen=True)
class Succession:
    pilot_id: str
    first: str
    second: str


class RestrictedMaster:
    """Mutable RMP state: column pool, fixed columns and intertask decisions."""

    def __init__(self, instance: Instance, warm_columns: Iterable[Column] = (),
                 static_pilots: Iterable[str] | None = None, must_fly: dict[str, set[str]] | None = None):
        self.instance = instance
        self.pilots = instance.pilot_by_id
        self.pool = ColumnPool()
        self.fixed: list[Column] = []
        self.fixed_pilots: set[str] = set()
        self.covered: set[str] = set()
        self.imposed: dict[str, dict[str, str]] = {}
        self.forbidden: set[tuple[str, str, str]] = set()
        self.static_pilots = set(self.pilots) if static_pilots is None else set(static_pilots)
        # pairings a pilot's pricing network is forced to carry (window masks)
        self.must_fly = {k: set(v) for k, v in (must_fly or {}).items()}
        for col in warm_columns:
            self.add_warm(col)

    # -- column management
    def add_warm(self, col: Column):
        pilot = self.pilots.get(col.pilot_id)
        if pilot is None:
            raise InfeasibleInput(f"warm column for unknown pilot {col.pilot_id}")
        if not col.static:
            viol = check_schedule(pilot, col.schedule, self.instance.rules, self.instance.horizon_days)
            if viol:
                raise InfeasibleInput(f"warm column for {col.pilot_id} rejected: {', '.join(map(str, viol))}")
        self.pool.add(col)

    def admissible(self, col: Column) -> bool:
        if col.pilot_id in self.fixed_pilots or col.pairings & self.covered:
            return False
        imp = self.imposed.get(col.pilot_id)
        succ = None
        if imp:
            succ = dict(col.successions())
            for a, b in imp.items():
                if a in col.pairings and succ.get(a) != b:
                    return False
        if self.forbidden:
            pairs = col.successions() if succ is None else succ.items()
            for a, b in pairs:
                if (col.pilot_id, a, b) in self.forbidden:
                    return False
        return True

    def add_columns(self, cols: Iterable[Column]) -> int:
        return sum(self.pool.add(c) for c in cols if self.admissible(c))

    def active_pilots(self) -> list[Pilot]:
        return [k for k in self.instance.pilots if k.id not in self.fixed_pilots]

    def fixed_constant(self) -> float:
        cd = self.instance.rules.C_D
        return sum(c.cost - cd * len(self.pilots[c.pilot_id].preassigned_days_off - c.granted) for c in self.fixed)

    # -- branching decisions
    def fix_column(self, col: Column) -> set[str]:
        """Pin ``col`` to 1; returns the pairings it newly covers."""
        if col.pilot_id in self.fixed_pilots:
            raise DecisionError(f"pilot {col.pilot_id} already has a fixed column")
        if col.pairings & self.covered:
            raise DecisionError("column overlaps pairings covered by an earlier fixing")
        self.fixed.append(col)
        self.fixed_pilots.add(col.pilot_id)
        self.covered |= col.pairings
        self.pool.remove_if(lambda c: c.pilot_id == col.pilot_id or bool(c.pairings & col.pairings))
        return set(col.pairings)

    def apply_intertask(self, kind: str, pilot_id: str, first: str, second: str):
        if kind == "impose":
            if (pilot_id, first, second) in self.forbidden:
                raise DecisionError(f"succession {first}->{second} for {pilot_id} is already forbidden")
            cur = self.imposed.setdefault(pilot_id, {})
            if cur.get(first, second) != second:
                raise DecisionError(f"{first} already imposed to precede {cur[first]} for {pilot_id}")
            cur[first] = second
        elif kind == "forbid":
            if self.imposed.get(pilot_id, {}).get(first) == second:
                raise DecisionError(f"succession {first}->{second} for {pilot_id} is already imposed")
            self.forbidden.add((pilot_id, first, second))
        else:
            raise DecisionError(f"unknown intertask kind {kind!r}")
        self.pool.remove_if(lambda c: not self.admissible(c))

    # -- LP
    def solve(self) -> RmpSolution:
        return solve_rmp_lp(self)

    def to_lp_text(self) -> str:
        """CPLEX-LP text of the current relaxation, for external cross-checks."""
        cols, names, rows, obj = self._assemble()
        A, b = rows
        lines = ["\\ restricted master problem", "Maximize", " obj:"]
        terms = [f" {'+' if v >= 0 else '-'} {abs(v):.10g} {n}" for n, v in zip(names, obj) if v != 0]
        lines += terms or [" 0 " + names[0]]
        lines.append("Subject To")
        A = A.tocsr()
        for r in range(A.shape[0]):
            start, end = A.indptr[r], A.indptr[r + 1]
            expr = " + ".join(names[j] for j in A.indices[start:end])
            lines.append(f" r{r}: {expr} = {b[r]:g}")
        lines += ["Bounds"] + [f" 0 <= {n}" for n in names] + ["End"]
        return "\n".join(lines) + "\n"

    def _assemble(self):
        inst = self.instance
        rules = inst.rules
        pilots = self.active_pilots()
        active_ids = {k.id for k in pilots}
        w_rows = {w.id: i for i, w in enumerate(p for p in inst.pairings if p.id not in self.covered)}
        q_keys = [(k.id, d) for k in pilots for d in sorted(k.preassigned_days_off)]
        q_rows = {q: len(w_rows) + i for i, q in enumerate(q_keys)}
        k_rows = {k.id: len(w_rows) + len(q_rows) + i for i, k in enumerate(pilots)}
        n_rows = len(w_rows) + len(q_rows) + len(k_rows)

        cols: list[Column] = [c for c in self.pool if c.pilot_id in active_ids and not c.static]
        has_col = {c.pilot_id for c in cols}
        for k in pilots:
            if k.id in self.static_pilots or k.id not in has_col:
                cols.append(Column.empty(k))
        ri, ci, obj, names = [], [], [], []
        for j, c in enumerate(cols):
            obj.append(c.cost)
            names.append(f"x{j}")
            rws = [w_rows[w] for w in c.pairings] + [q_rows[(c.pilot_id, d)] for d in c.granted] + [k_rows[c.pilot_id]]
            ri += rws
            ci += [j] * len(rws)
        pw = inst.pairing_by_id
        for w, r in w_rows.items():
            ri.append(r)
            ci.append(len(obj))
            obj.append(-rules.C_F * pw[w].n_flights)
            names.append(f"s_{w}")
        for q, r in q_rows.items():
            ri.append(r)
            ci.append(len(obj))
            obj.append(-rules.C_D)
            names.append(f"y_{q[0]}_{q[1]}")
        A = csc_matrix((np.ones(len(ri)), (ri, ci)), shape=(n_rows, len(obj)))
        return cols, names, (A, np.ones(n_rows)), np.asarray(obj, float)

    def _solve_raw(self, obj, A, b, perturb: float = 0.0):
        c = -obj
        if perturb:
            c = c + perturb * np.random.default_rng(0).standard_normal(c.shape)
        return linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs",
                       options={"primal_feasibility_tolerance": FEAS_TOL,
                                "dual_feasibility_tolerance": OPT_TOL})


def build_initial_rmp(instance: Instance, warm_columns: Iterable[Column] = (),
                      static_pilots: Iterable[str] | None = None) -> RestrictedMaster:
    return RestrictedMaster(instance, warm_columns, static_pilots)


def solve_rmp_lp(state: RestrictedMaster) -> RmpSolution:
    cols, names, (A, b), obj = state._assemble()
    res = state._solve_raw(obj, A, b)
    if res.status != 0:
        res = state._solve_raw(obj, A, b, perturb=1e-9)
        if res.status != 0:
            raise NumericError(f"RMP LP failed: {res.message}")
    x = np.clip(res.x, 0.0, None)
    m = len(cols)
    inst = state.instance
    w_ids = [w.id for w in inst.pairings if w.id not in state.covered]
    pilots = state.active_pilots()
    q_keys = [(k.id, d) for k in pilots for d in sorted(k.preassigned_days_off)]
    y = -np.asarray(res.eqlin.marginals)
    nw, nq = len(w_ids), len(q_keys)
    duals = Duals(
        alpha={w: float(y[i]) for i, w in enumerate(w_ids)},
        beta={q: float(y[nw + i]) for i, q in enumerate(q_keys)},
        gamma={k.id: float(y[nw + nq + i]) for i, k in enumerate(pilots)},
    )
    return RmpSolution(
        objective=float(obj @ x) + state.fixed_constant(),
        columns=cols,
        values=x[:m],
        unassigned={w: float(x[m + i]) for i, w in enumerate(w_ids)},
        missed={q: float(x[m + nw + i]) for i, q in enumerate(q_keys)},
        duals=duals,
        fixed=list(state.fixed),
        status=res.message,
    )


def roster_from_columns(instance: Instance, columns: Iterable[Column]) -> Roster:
    return Roster.from_schedules(instance, [c.schedule for c in columns])


# ------------------------------------------------------------------ oracle

BRUTE_FORCE_LIMITS = {"pilots": 4, "pairings": 8, "horizon_days": 10}


def feasible_schedules(instance: Instance, pilot: Pilot) -> list[Schedule]:
    """Every distinct schedule on the pilot's network that passes the rule checker."""
    net = build_network(instance, pilot)
    out, seen = [], set()
    for path in enumerate_paths(net):
        s = net.path_schedule(path)
        if s.signature() in seen:
            continue
        seen.add(s.signature())
        if not check_schedule(pilot, s, instance.rules, instance.horizon_days):
            out.append(s)
    return out


def brute_force_solve(instance: Instance) -> tuple[float, Roster]:
    if (len(instance.pilots) > BRUTE_FORCE_LIMITS["pilots"] or len(instance.pairings) > BRUTE_FORCE_LIMITS["pairings"]
            or instance.horizon_days > BRUTE_FORCE_LIMITS["horizon_days"]):
        raise SizeError(f"brute force limited to {BRUTE_FORCE_LIMITS}")
    bit = {w.id: 1 << i for i, w in enumerate(instance.pairings)}
    rules = instance.rules
    # per pilot: best schedule value for each covered-pairing mask
    options = []
    for k in instance.pilots:
        best: dict[int, tuple[float, Schedule]] = {0: (-rules.C_D * len(k.preassigned_days_off), Schedule.unrostered(k.id))}
        for s in feasible_schedules(instance, k):
            mask = sum(bit[w] for w in s.pairing_ids)
            missed = len(k.preassigned_days_off - s.off_days(instance.horizon_days))
            val = schedule_satisfaction(k, s) - rules.C_D * missed
            if mask not in best or val > best[mask][0] + 1e-12:
                best[mask] = (val, s)
        options.append(best)

    # DP over pilots with the set of used pairings as state
    states: dict[int, tuple[float, tuple]] = {0: (0.0, ())}
    for best in options:
        nxt: dict[int, tuple[float, tuple]] = {}
        for used, (val, picks) in states.items():
            for mask, (v, s) in best.items():
                if used & mask:
                    continue
                m2 = used | mask
                cand = val + v
                if m2 not in nxt or cand > nxt[m2][0] + 1e-12:
                    nxt[m2] = (cand, picks + (s,))
        states = nxt
    flights = {bit[w.id]: w.n_flights for w in instance.pairings}
    best_val, best_roster = -np.inf, None
    for used, (val, picks) in sorted(states.items()):
        pen = rules.C_F * sum(n for b, n in flights.items() if not used & b)
        if val - pen > best_val + 1e-12:
            best_val, best_roster = val - pen, picks
    roster = Roster.from_schedules(instance, best_roster)
    return roster_objective(instance, roster).objective, roster
