"""Domain types for pilot rostering and the objective / feasibility rules.

Time conventions: day ``d`` (1-based) covers minutes ``[(d-1)*1440, d*1440)``
counted from the start of the month.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ContractViolation, CoverageError

MINUTES_PER_DAY = 1440
VACATION_DAYS = 3
PREFERENCE_BUDGET = 100.0


def day_of(minute: int) -> int:
    return minute // MINUTES_PER_DAY + 1


def day_start(day: int) -> int:
    return (day - 1) * MINUTES_PER_DAY


@dataclass(frozen=True)
class Flight:
    id: str
    departure_minute: int
    arrival_minute: int
    origin: str
    destination: str

    @property
    def minutes(self) -> int:
        return self.arrival_minute - self.departure_minute

    @property
    def departure_day(self) -> int:
        return day_of(self.departure_minute)


@dataclass(frozen=True)
class Pairing:
    id: str
    base: str
    flights: tuple[Flight, ...]
    start_minute: int
    end_minute: int
    duty_days: tuple[int, ...]
    work_minutes: int

    @property
    def n_flights(self) -> int:
        return len(self.flights)

    @property
    def start_day(self) -> int:
        return day_of(self.start_minute)

    @property
    def end_day(self) -> int:
        return day_of(self.end_minute)

    @property
    def span_days(self) -> range:
        return range(self.start_day, self.end_day + 1)

    @property
    def flight_minutes(self) -> int:
        return sum(f.minutes for f in self.flights)

    def structural_problems(self, base_airport: str | None = None) -> list[str]:
        problems = []
        if not self.flights:
            return ["pairing has no flights"]
        for a, b in zip(self.flights, self.flights[1:]):
            if a.destination != b.origin:
                problems.append(f"flights {a.id}->{b.id} not connected")
            if b.departure_minute < a.arrival_minute:
                problems.append(f"flights {a.id}->{b.id} out of order")
        home = base_airport if base_airport is not None else self.base
        if self.flights[0].origin != home or self.flights[-1].destination != home:
            problems.append("pairing does not start and end at its base")
        if self.start_minute > self.flights[0].departure_minute:
            problems.append("start after first departure")
        if self.end_minute < self.flights[-1].arrival_minute:
            problems.append("end before last arrival")
        if tuple(sorted({f.departure_day for f in self.flights})) != self.duty_days:
            problems.append("duty days inconsistent with departures")
        for f in self.flights:
            if f.arrival_minute <= f.departure_minute:
                problems.append(f"flight {f.id} arrives before departing")
        return problems


@dataclass(frozen=True)
class Pilot:
    id: str
    base: str
    preferred_flights: Mapping[str, float] = field(default_factory=dict)
    preferred_vacations: Mapping[int, float] = field(default_factory=dict)
    preassigned_days_off: frozenset[int] = frozenset()

    @property
    def preference_total(self) -> float:
        return sum(self.preferred_flights.values()) + sum(self.preferred_vacations.values())


@dataclass(frozen=True)
class RuleParams:
    T_work: int = 6
    T_off: int = 10
    T_min: float = 12.0
    T_flight: float = 85.0
    C_F: float = 100.0
    C_D: float = 1_000_000.0

    def __post_init__(self):
        for name in ("T_work", "T_off", "T_min", "T_flight", "C_F", "C_D"):
            if not getattr(self, name) > 0:
                raise ContractViolation(f"rule parameter {name} must be strictly positive")


@dataclass(frozen=True)
class Instance:
    horizon_days: int
    bases: tuple[str, ...]
    pilots: tuple[Pilot, ...]
    pairings: tuple[Pairing, ...]
    rules: RuleParams = RuleParams()
    name: str = "instance"

    def __post_init__(self):
        if not 1 <= self.horizon_days <= 31:
            raise ContractViolation(f"horizon_days={self.horizon_days} outside 1..31")
        ids = [p.id for p in self.pairings]
        if len(set(ids)) != len(ids):
            raise ContractViolation("pairing ids are not unique")
        pids = [k.id for k in self.pilots]
        if len(set(pids)) != len(pids):
            raise ContractViolation("pilot ids are not unique")
        bases = set(self.bases)
        for w in self.pairings:
            if w.base not in bases:
                raise ContractViolation(f"pairing {w.id} has unknown base {w.base}")
        for k in self.pilots:
            if k.base not in bases:
                raise ContractViolation(f"pilot {k.id} has unknown base {k.base}")

    # lookups are rebuilt on demand; instances are small enough and immutable
    @property
    def pairing_by_id(self) -> dict[str, Pairing]:
        return {w.id: w for w in self.pairings}

    @property
    def pilot_by_id(self) -> dict[str, Pilot]:
        return {k.id: k for k in self.pilots}

    @property
    def total_flight_minutes(self) -> int:
        return sum(w.flight_minutes for w in self.pairings)

    def structural_problems(self) -> list[str]:
        problems = []
        H = self.horizon_days
        for w in self.pairings:
            problems += [f"{w.id}: {p}" for p in w.structural_problems()]
            if w.start_minute < 0 or w.end_minute >= H * MINUTES_PER_DAY:
                problems.append(f"{w.id}: outside horizon")
        for k in self.pilots:
            for d in k.preassigned_days_off:
                if not 1 <= d <= H:
                    problems.append(f"{k.id}: preassigned day {d} outside horizon")
            for d in k.preferred_vacations:
                if d < 1 or d + VACATION_DAYS - 1 > H:
                    problems.append(f"{k.id}: vacation start {d} outside horizon")
        return problems


@dataclass(frozen=True)
class Activity:
    kind: str  # "pairing" | "day_off" | "vacation"
    day: int
    pairing: Pairing | None = None

    @classmethod
    def of_pairing(cls, pairing: Pairing) -> "Activity":
        return cls("pairing", pairing.start_day, pairing)

    @classmethod
    def day_off(cls, day: int) -> "Activity":
        return cls("day_off", day)

    @classmethod
    def vacation(cls, start_day: int) -> "Activity":
        return cls("vacation", start_day)

    @property
    def covered_days(self) -> range:
        if self.kind == "pairing":
            return self.pairing.span_days
        if self.kind == "vacation":
            return range(self.day, self.day + VACATION_DAYS)
        return range(self.day, self.day + 1)

    @property
    def start_minute(self) -> int:
        return self.pairing.start_minute if self.kind == "pairing" else day_start(self.day)

    @property
    def end_minute(self) -> int:
        if self.kind == "pairing":
            return self.pairing.end_minute
        return day_start(self.covered_days[-1] + 1)

    def key(self) -> tuple:
        return (self.kind, self.pairing.id if self.pairing else self.day)


@dataclass(frozen=True)
class Schedule:
    """One pilot's month. ``rostered=False`` is the explicit no-schedule marker."""

    pilot_id: str
    activities: tuple[Activity, ...] = ()
    rostered: bool = True

    @classmethod
    def unrostered(cls, pilot_id: str) -> "Schedule":
        return cls(pilot_id, (), rostered=False)

    @property
    def pairings(self) -> list[Pairing]:
        return [a.pairing for a in self.activities if a.kind == "pairing"]

    @property
    def pairing_ids(self) -> frozenset[str]:
        return frozenset(a.pairing.id for a in self.activities if a.kind == "pairing")

    def working_days(self) -> set[int]:
        days: set[int] = set()
        for w in self.pairings:
            days.update(w.span_days)
        return days

    def off_days(self, horizon_days: int) -> set[int]:
        return set(range(1, horizon_days + 1)) - self.working_days()

    def successions(self) -> list[tuple[str, str]]:
        """Pairs of pairings flown back to back with no day off in between."""
        ws = sorted(self.pairings, key=lambda w: w.start_minute)
        return [(a.id, b.id) for a, b in zip(ws, ws[1:]) if b.start_day <= a.end_day + 1]

    def signature(self) -> tuple:
        return (self.pilot_id, self.rostered, tuple(a.key() for a in self.activities))


@dataclass(frozen=True)
class Roster:
    schedules: tuple[Schedule, ...]
    unassigned_pairings: frozenset[str]
    missed_preassigned: frozenset[tuple[str, int]]

    @classmethod
    def from_schedules(cls, instance: Instance, schedules: Iterable[Schedule]) -> "Roster":
        by_pilot = {s.pilot_id: s for s in schedules}
        ordered = tuple(by_pilot.get(k.id, Schedule.unrostered(k.id)) for k in instance.pilots)
        covered: set[str] = set()
        for s in ordered:
            covered |= s.pairing_ids
        unassigned = frozenset(w.id for w in instance.pairings if w.id not in covered)
        missed = set()
        for k, s in zip(instance.pilots, ordered):
            off = s.off_days(instance.horizon_days) if s.rostered else set()
            missed |= {(k.id, d) for d in k.preassigned_days_off if d not in off}
        return cls(ordered, unassigned, frozenset(missed))

    def schedule_of(self, pilot_id: str) -> Schedule:
        for s in self.schedules:
            if s.pilot_id == pilot_id:
                return s
        raise KeyError(pilot_id)

    def assignment(self) -> dict[str, str]:
        """pairing id -> pilot id."""
        return {w: s.pilot_id for s in self.schedules for w in s.pairing_ids}


@dataclass(frozen=True)
class ObjectiveBreakdown:
    satisfaction_total: float
    flight_penalty: float
    dayoff_penalty: float

    @property
    def objective(self) -> float:
        return self.satisfaction_total - self.flight_penalty - self.dayoff_penalty


def schedule_satisfaction(pilot: Pilot, schedule: Schedule) -> float:
    if pilot.id != schedule.pilot_id:
        raise ContractViolation(f"schedule of {schedule.pilot_id} scored for pilot {pilot.id}")
    score = 0.0
    for a in schedule.activities:
        if a.kind == "pairing":
            score += sum(pilot.preferred_flights.get(f.id, 0.0) for f in a.pairing.flights)
        elif a.kind == "vacation":
            score += pilot.preferred_vacations.get(a.day, 0.0)
    return score


def roster_objective(instance: Instance, roster: Roster) -> ObjectiveBreakdown:
    pilots = instance.pilot_by_id
    pairings = instance.pairing_by_id
    seen: set[str] = set()
    satisfaction = 0.0
    for s in roster.schedules:
        if s.pilot_id not in pilots:
            raise ContractViolation(f"unknown pilot {s.pilot_id}")
        for wid in s.pairing_ids:
            if wid in seen:
                raise CoverageError(f"pairing {wid} covered twice")
            seen.add(wid)
        satisfaction += schedule_satisfaction(pilots[s.pilot_id], s)
    if seen & roster.unassigned_pairings:
        raise CoverageError(f"pairings both assigned and unassigned: {sorted(seen & roster.unassigned_pairings)}")
    flights = sum(pairings[w].n_flights for w in roster.unassigned_pairings)
    return ObjectiveBreakdown(
        satisfaction_total=satisfaction,
        flight_penalty=instance.rules.C_F * flights,
        dayoff_penalty=instance.rules.C_D * len(roster.missed_preassigned),
    )


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str = ""

    def __str__(self):
        return f"{self.kind}: {self.detail}" if self.detail else self.kind


def check_schedule(pilot: Pilot, schedule: Schedule, rules: RuleParams, horizon_days: int) -> list[Violation]:
    """Return the rule violations of one schedule (empty list when feasible).

    Consecutive duties are counted per work block: a block is a run of
    pairings with no full day off between them, and its duty days are the
    days on which a flight departs.
    """
    if not schedule.rostered:
        return []
    out: list[Violation] = []
    acts = sorted(schedule.activities, key=lambda a: (a.start_minute, a.kind))
    for a in acts:
        days = a.covered_days
        if days[0] < 1 or days[-1] > horizon_days:
            out.append(Violation("outside_horizon", str(a.key())))
        if a.kind == "pairing" and a.pairing.base != pilot.base:
            out.append(Violation("base_mismatch", a.pairing.id))
    for a, b in zip(acts, acts[1:]):
        if b.start_minute < a.end_minute or set(a.covered_days) & set(b.covered_days):
            out.append(Violation("overlap", f"{a.key()} / {b.key()}"))

    pairings = sorted(schedule.pairings, key=lambda w: w.start_minute)
    work = sum(w.work_minutes for w in pairings)
    if work > rules.T_flight * 60:
        out.append(Violation("flight_time_exceeded", f"{work} min"))

    off = schedule.off_days(horizon_days)
    if len(off) < rules.T_off:
        out.append(Violation("insufficient_days_off", f"{len(off)} < {rules.T_off}"))

    block = 0
    for i, w in enumerate(pairings):
        if i > 0 and w.start_day > pairings[i - 1].end_day + 1:
            block = 0
        block += len(w.duty_days)
        if block > rules.T_work:
            out.append(Violation("max_consecutive_duties", f"{block} ending day {w.end_day}"))
            break

    for a, b in zip(pairings, pairings[1:]):
        if b.start_minute - a.end_minute < rules.T_min * 60:
            out.append(Violation("insufficient_rest", f"{a.id}->{b.id}"))

    worked = schedule.working_days()
    for d in sorted(pilot.preassigned_days_off):
        if d in worked:
            out.append(Violation("preassigned_day_off_worked", f"day {d}"))
    return out


@dataclass
class RosterReport:
    violations: dict[str, list[Violation]]
    coverage_errors: list[str]
    structural_errors: list[str]

    @property
    def feasible(self) -> bool:
        return (not self.coverage_errors and not self.structural_errors
                and all(not v for v in self.violations.values()))

    def lines(self) -> list[str]:
        out = [f"structural: {e}" for e in self.structural_errors]
        out += [f"coverage: {e}" for e in self.coverage_errors]
        for pid, vs in self.violations.items():
            out += [f"{pid}: {v}" for v in vs]
        return out


def check_roster(instance: Instance, roster: Roster) -> RosterReport:
    pilots = instance.pilot_by_id
    pairings = instance.pairing_by_id
    structural: list[str] = []
    coverage: list[str] = []
    violations: dict[str, list[Violation]] = {}

    seen_pilots: dict[str, int] = {}
    for s in roster.schedules:
        seen_pilots[s.pilot_id] = seen_pilots.get(s.pilot_id, 0) + 1
        if s.pilot_id not in pilots:
            structural.append(f"unknown pilot {s.pilot_id}")
    for k in instance.pilots:
        n = seen_pilots.get(k.id, 0)
        if n != 1:
            structural.append(f"pilot {k.id} appears {n} times")

    count: dict[str, int] = {}
    for s in roster.schedules:
        for a in s.activities:
            if a.kind == "pairing":
                if a.pairing.id not in pairings:
                    structural.append(f"unknown pairing {a.pairing.id}")
                    continue
                count[a.pairing.id] = count.get(a.pairing.id, 0) + 1
    for wid in roster.unassigned_pairings:
        if wid not in pairings:
            structural.append(f"unknown pairing {wid}")
    for w in instance.pairings:
        n = count.get(w.id, 0) + (w.id in roster.unassigned_pairings)
        if n != 1:
            coverage.append(f"pairing {w.id} covered {n} times")

    for s in roster.schedules:
        if s.pilot_id in pilots:
            violations[s.pilot_id] = check_schedule(
                pilots[s.pilot_id], s, instance.rules, instance.horizon_days)

    if not structural:
        expected = Roster.from_schedules(instance, roster.schedules).missed_preassigned
        if expected != roster.missed_preassigned:
            coverage.append("missed preassigned days off inconsistent with schedules")
    return RosterReport(violations, coverage, structural)
