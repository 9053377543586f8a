"""Instance / roster files, synthetic instance and scenario generation.

File format
-----------
Instances and rosters are JSON documents carrying ``"schema"`` and
``"version"`` keys; see ``docs/formats.md`` for the field list.  Times are
integer minutes since the start of the month, days are 1-based.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np

from .errors import ContractViolation, GenerationError, ParseError, ReferenceMismatch, SchemaVersionError
from .model import (
    PREFERENCE_BUDGET, VACATION_DAYS, Activity, Flight, Instance, Pairing, Pilot,
    Roster, RuleParams, Schedule, day_start, roster_objective,
)

INSTANCE_SCHEMA = "crewroster.instance"
ROSTER_SCHEMA = "crewroster.roster"
SCHEMA_VERSION = 1

BRIEFING_MINUTES = 45
DEBRIEFING_MINUTES = 15
TURN_MINUTES = 40
EARLIEST_DEPARTURE = 5 * 60
LATEST_RELEASE = 23 * 60 + 30


@dataclass(frozen=True)
class GeneratorSpec:
    seed: int = 0
    horizon_days: int = 31
    n_bases: int = 3
    n_airports: int = 20
    n_pairings: int = 250
    pairing_length_distribution: tuple[float, ...] = (0.2, 0.25, 0.2, 0.2, 0.15)
    long_pairing_fraction: float = 0.35
    total_flight_minutes: int = 234_000
    target_hours: float = 65.0
    n_pilots: int | None = None
    rules: RuleParams = RuleParams()
    name: str | None = None

    def validate(self):
        if self.n_bases < 1 or self.n_bases >= self.n_airports:
            raise GenerationError("need 1 <= n_bases < n_airports (outstations required)")
        if not 0.0 <= self.long_pairing_fraction <= 1.0:
            raise GenerationError("long_pairing_fraction must lie in [0, 1]")
        if len(self.pairing_length_distribution) != 5 or min(self.pairing_length_distribution) < 0:
            raise GenerationError("pairing_length_distribution needs 5 non-negative weights (1..5 days)")
        if self.n_pairings < 1 or self.total_flight_minutes <= 0:
            raise GenerationError("need at least one pairing and positive flight time")
        if self.target_hours <= 0 and self.n_pilots is None:
            raise GenerationError("target_hours must be positive")
        longest = max(d + 1 for d, p in enumerate(self.pairing_length_distribution) if p > 0) \
            if any(self.pairing_length_distribution) else 1
        if self.long_pairing_fraction > 0:
            longest = max(longest, 4)
        if longest > self.horizon_days:
            raise GenerationError(f"pairings of {longest} days do not fit a {self.horizon_days}-day horizon")


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 0
    preference_budget: float = PREFERENCE_BUDGET
    n_preferred_flights_per_pilot: int = 6
    n_preferred_vacations_per_pilot: int = 1
    preassigned_off_probability: float = 0.03

    def validate(self):
        if not 0.0 <= self.preassigned_off_probability <= 1.0:
            raise ContractViolation("preassigned_off_probability must lie in [0, 1]")
        if min(self.n_preferred_flights_per_pilot, self.n_preferred_vacations_per_pilot) < 0:
            raise ContractViolation("preference counts must be non-negative")
        if self.preference_budget < 0:
            raise ContractViolation("preference budget must be non-negative")


def pilots_for_target_hours(total_flight_minutes: float, target_hours: float) -> int:
    if target_hours <= 0:
        raise ContractViolation("target_hours must be positive")
    return round(total_flight_minutes / (target_hours * 60))  # round-half-even


def _pick_lengths(spec: GeneratorSpec, rng: np.random.Generator) -> list[int]:
    dist = np.asarray(spec.pairing_length_distribution, dtype=float)
    n_long = round(spec.long_pairing_fraction * spec.n_pairings)
    short_w = dist[:3] if dist[:3].sum() > 0 else np.array([0.0, 1.0, 0.0])
    long_w = dist[3:] if dist[3:].sum() > 0 else np.array([1.0, 0.0])
    lengths = list(rng.choice([4, 5], size=n_long, p=long_w / long_w.sum()))
    lengths += list(rng.choice([1, 2, 3], size=spec.n_pairings - n_long, p=short_w / short_w.sum()))
    rng.shuffle(lengths)
    return [int(x) for x in lengths]


def generate_instance(spec: GeneratorSpec) -> Instance:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    H = spec.horizon_days
    bases = tuple(f"B{i + 1}" for i in range(spec.n_bases))
    outstations = [f"A{i + 1:02d}" for i in range(spec.n_airports - spec.n_bases)]

    # route skeletons: per pairing, legs per duty day
    skeletons = []
    for length in _pick_lengths(spec, rng):
        base = bases[int(rng.integers(spec.n_bases))]
        start_day = int(rng.integers(1, H - length + 2))
        legs = [int(x) for x in rng.integers(1, 4, size=length)]
        if sum(legs) < 2:
            legs[-1] = 2
        skeletons.append((base, start_day, legs))

    n_flights = sum(sum(legs) for _, _, legs in skeletons)
    raw = rng.uniform(0.7, 1.3, size=n_flights)
    durations = np.maximum(np.round(raw * spec.total_flight_minutes / raw.sum()), 30).astype(int)
    residue = spec.total_flight_minutes - int(durations.sum())
    order = np.argsort(-durations, kind="stable")
    i = 0
    while residue != 0 and i < 10 * n_flights:
        j = order[i % n_flights]
        step = 1 if residue > 0 else -1
        if durations[j] + step >= 30:
            durations[j] += step
            residue -= step
        i += 1

    pairings_raw = []
    fi = 0
    for base, start_day, legs in skeletons:
        total_legs = sum(legs)
        stops = [base]
        for leg in range(total_legs - 1):
            choices = [a for a in outstations if a != stops[-1]]
            stops.append(choices[int(rng.integers(len(choices)))])
        stops.append(base)
        flights = []
        leg_idx = 0
        for offset, n_legs in enumerate(legs):
            day = start_day + offset
            durs = [int(durations[fi + k]) for k in range(n_legs)]
            duty_len = sum(durs) + TURN_MINUTES * (n_legs - 1)
            latest = LATEST_RELEASE - DEBRIEFING_MINUTES - duty_len
            if latest < EARLIEST_DEPARTURE:
                raise GenerationError("flight time target too high for the requested pairings")
            t = day_start(day) + int(rng.integers(EARLIEST_DEPARTURE, latest + 1))
            for d in durs:
                flights.append((t, t + d, stops[leg_idx], stops[leg_idx + 1]))
                t += d + TURN_MINUTES
                leg_idx += 1
            fi += n_legs
        pairings_raw.append((base, flights))

    pairings_raw.sort(key=lambda bf: (bf[1][0][0], bf[0]))
    pairings = []
    fid = 0
    for n, (base, legs) in enumerate(pairings_raw):
        flights = []
        for dep, arr, o, d in legs:
            fid += 1
            flights.append(Flight(f"F{fid:05d}", dep, arr, o, d))
        flights = tuple(flights)
        flown = sum(f.minutes for f in flights)
        pairings.append(Pairing(
            id=f"W{n + 1:04d}", base=base, flights=flights,
            start_minute=flights[0].departure_minute - BRIEFING_MINUTES,
            end_minute=flights[-1].arrival_minute + DEBRIEFING_MINUTES,
            duty_days=tuple(sorted({f.departure_day for f in flights})),
            work_minutes=flown + BRIEFING_MINUTES + DEBRIEFING_MINUTES,
        ))

    total = sum(w.flight_minutes for w in pairings)
    n_pilots = spec.n_pilots if spec.n_pilots is not None else pilots_for_target_hours(total, spec.target_hours)
    per_base = _apportion(n_pilots, [sum(w.flight_minutes for w in pairings if w.base == b) for b in bases])
    pilots = []
    for b, count in zip(bases, per_base):
        pilots += [b] * count
    pilots = tuple(Pilot(id=f"K{i + 1:03d}", base=b) for i, b in enumerate(pilots))
    name = spec.name or f"gen-s{spec.seed}"
    return Instance(H, bases, pilots, tuple(pairings), spec.rules, name)


def _apportion(total: int, weights: list[float]) -> list[int]:
    """Largest-remainder split of ``total`` proportional to ``weights``; each positive weight gets >= 1."""
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        w = np.ones_like(w)
    quota = total * w / w.sum()
    counts = np.floor(quota).astype(int)
    for i in np.argsort(-(quota - counts), kind="stable")[: total - counts.sum()]:
        counts[i] += 1
    for i in range(len(counts)):
        if w[i] > 0 and counts[i] == 0:
            donor = int(np.argmax(counts))
            if counts[donor] > 1:
                counts[donor] -= 1
                counts[i] += 1
    return [int(c) for c in counts]


def _split_budget(rng: np.random.Generator, n_items: int, budget: float) -> list[int]:
    if n_items == 0:
        return []
    shares = rng.dirichlet(np.ones(n_items))
    return [int(x) for x in np.floor(shares * budget)]


def generate_scenario(instance: Instance, spec: ScenarioSpec) -> Instance:
    spec.validate()
    if any(k.preferred_flights or k.preferred_vacations or k.preassigned_days_off for k in instance.pilots):
        raise ContractViolation("instance already carries preferences")
    rng = np.random.default_rng([spec.seed, 7919])
    H = instance.horizon_days
    flights_by_base: dict[str, list[str]] = {b: [] for b in instance.bases}
    for w in instance.pairings:
        flights_by_base[w.base] += [f.id for f in w.flights]

    pilots = []
    for k in instance.pilots:
        pool = flights_by_base[k.base]
        n_f = min(spec.n_preferred_flights_per_pilot, len(pool))
        chosen_f = [pool[i] for i in sorted(rng.choice(len(pool), size=n_f, replace=False))] if n_f else []
        starts = sorted(int(d) for d in rng.choice(np.arange(1, H - VACATION_DAYS + 2),
                                                   size=min(spec.n_preferred_vacations_per_pilot, H - 2),
                                                   replace=False))
        weights = _split_budget(rng, len(chosen_f) + len(starts), spec.preference_budget)
        pref_f = {f: float(wt) for f, wt in zip(chosen_f, weights)}
        pref_v = {d: float(wt) for d, wt in zip(starts, weights[len(chosen_f):])}
        vac_days = {d + i for d in starts for i in range(VACATION_DAYS)}
        draws = rng.random(H)
        off = frozenset(d for d in range(1, H + 1)
                        if draws[d - 1] < spec.preassigned_off_probability and d not in vac_days)
        pilots.append(replace(k, preferred_flights=pref_f, preferred_vacations=pref_v, preassigned_days_off=off))
    return replace(instance, pilots=tuple(pilots), name=f"{instance.name}-sc{spec.seed}")


def split_scenarios(seeds: list[int]) -> tuple[list[int], list[int]]:
    """Train/test split: every sixth scenario (by position) is held out, giving 25/5 for 30."""
    train = [s for i, s in enumerate(seeds) if i % 6 != 5]
    test = [s for i, s in enumerate(seeds) if i % 6 == 5]
    return train, test


# --------------------------------------------------------------------- files

def _instance_to_obj(inst: Instance) -> dict:
    r = inst.rules
    return {
        "schema": INSTANCE_SCHEMA,
        "version": SCHEMA_VERSION,
        "name": inst.name,
        "horizon_days": inst.horizon_days,
        "bases": list(inst.bases),
        "rules": {"T_work": r.T_work, "T_off": r.T_off, "T_min": r.T_min, "T_flight": r.T_flight,
                  "C_F": r.C_F, "C_D": r.C_D},
        "pairings": [{
            "id": w.id, "base": w.base, "start_minute": w.start_minute, "end_minute": w.end_minute,
            "work_minutes": w.work_minutes, "duty_days": list(w.duty_days),
            "flights": [[f.id, f.departure_minute, f.arrival_minute, f.origin, f.destination]
                        for f in w.flights],
        } for w in inst.pairings],
        "pilots": [{
            "id": k.id, "base": k.base,
            "preferred_flights": dict(k.preferred_flights),
            "preferred_vacations": {str(d): v for d, v in sorted(k.preferred_vacations.items())},
            "preassigned_days_off": sorted(k.preassigned_days_off),
        } for k in inst.pilots],
    }


def write_instance(instance: Instance) -> str:
    return json.dumps(_instance_to_obj(instance), indent=1) + "\n"


def _load(text: str, schema: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError("top level must be an object")
    if obj.get("schema") != schema:
        raise ParseError(f"schema: expected {schema!r}, got {obj.get('schema')!r}")
    if obj.get("version") != SCHEMA_VERSION:
        raise SchemaVersionError(f"version: unsupported schema version {obj.get('version')!r}")
    return obj


def _get(obj: Any, key: str, kind: type | tuple, path: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{path}.{key}: missing field")
    val = obj[key]
    if kind is float:
        kind = (int, float)
    if not isinstance(val, kind) or (isinstance(val, bool) and kind is not bool):
        raise ParseError(f"{path}.{key}: expected {kind}, got {type(val).__name__}")
    return val


def parse_instance(text: str) -> Instance:
    obj = _load(text, INSTANCE_SCHEMA)
    try:
        r = _get(obj, "rules", dict, "$")
        rules = RuleParams(**{k: _get(r, k, float, "$.rules") for k in
                              ("T_work", "T_off", "T_min", "T_flight", "C_F", "C_D")})
        pairings = []
        for i, w in enumerate(_get(obj, "pairings", list, "$")):
            p = f"$.pairings[{i}]"
            flights = []
            for j, f in enumerate(_get(w, "flights", list, p)):
                if not (isinstance(f, list) and len(f) == 5):
                    raise ParseError(f"{p}.flights[{j}]: expected [id, dep, arr, origin, destination]")
                flights.append(Flight(str(f[0]), int(f[1]), int(f[2]), str(f[3]), str(f[4])))
            pairings.append(Pairing(
                id=_get(w, "id", str, p), base=_get(w, "base", str, p), flights=tuple(flights),
                start_minute=_get(w, "start_minute", int, p), end_minute=_get(w, "end_minute", int, p),
                duty_days=tuple(_get(w, "duty_days", list, p)), work_minutes=_get(w, "work_minutes", int, p),
            ))
        pilots = []
        for i, k in enumerate(_get(obj, "pilots", list, "$")):
            p = f"$.pilots[{i}]"
            pilots.append(Pilot(
                id=_get(k, "id", str, p), base=_get(k, "base", str, p),
                preferred_flights={str(f): v for f, v in _get(k, "preferred_flights", dict, p).items()},
                preferred_vacations={int(d): v for d, v in _get(k, "preferred_vacations", dict, p).items()},
                preassigned_days_off=frozenset(int(d) for d in _get(k, "preassigned_days_off", list, p)),
            ))
        return Instance(
            horizon_days=_get(obj, "horizon_days", int, "$"), bases=tuple(_get(obj, "bases", list, "$")),
            pilots=tuple(pilots), pairings=tuple(pairings), rules=rules, name=_get(obj, "name", str, "$"),
        )
    except ContractViolation as e:
        raise ParseError(f"invalid instance: {e}") from None
    except (TypeError, ValueError) as e:
        raise ParseError(f"malformed value: {e}") from None


def _activity_token(a: Activity) -> list:
    return ["pairing", a.pairing.id] if a.kind == "pairing" else [a.kind, a.day]


def write_roster(roster: Roster, instance: Instance | None = None) -> str:
    obj: dict[str, Any] = {
        "schema": ROSTER_SCHEMA,
        "version": SCHEMA_VERSION,
        "schedules": [{"pilot": s.pilot_id, "rostered": s.rostered,
                       "activities": [_activity_token(a) for a in s.activities]} for s in roster.schedules],
        "unassigned_pairings": sorted(roster.unassigned_pairings),
        "missed_preassigned": [list(x) for x in sorted(roster.missed_preassigned)],
    }
    if instance is not None:
        ob = roster_objective(instance, roster)
        obj["instance"] = instance.name
        obj["objective"] = {"S": ob.objective, "satisfaction": ob.satisfaction_total,
                            "flight_penalty": ob.flight_penalty, "dayoff_penalty": ob.dayoff_penalty}
    return json.dumps(obj, indent=1) + "\n"


def parse_roster(text: str, instance: Instance) -> Roster:
    obj = _load(text, ROSTER_SCHEMA)
    pairings = instance.pairing_by_id
    schedules = []
    for i, s in enumerate(_get(obj, "schedules", list, "$")):
        p = f"$.schedules[{i}]"
        acts = []
        for j, tok in enumerate(_get(s, "activities", list, p)):
            if not (isinstance(tok, list) and len(tok) == 2):
                raise ParseError(f"{p}.activities[{j}]: expected [kind, ref]")
            kind, ref = tok
            if kind == "pairing":
                if ref not in pairings:
                    raise ReferenceMismatch(f"{p}.activities[{j}]: unknown pairing {ref!r}")
                acts.append(Activity.of_pairing(pairings[ref]))
            elif kind in ("day_off", "vacation") and isinstance(ref, int):
                acts.append(Activity(kind, ref))
            else:
                raise ParseError(f"{p}.activities[{j}]: bad activity {tok!r}")
        schedules.append(Schedule(_get(s, "pilot", str, p), tuple(acts), _get(s, "rostered", bool, p)))
    unassigned = _get(obj, "unassigned_pairings", list, "$")
    for wid in unassigned:
        if wid not in pairings:
            raise ReferenceMismatch(f"$.unassigned_pairings: unknown pairing {wid!r}")
    missed = frozenset((str(a), int(b)) for a, b in _get(obj, "missed_preassigned", list, "$"))
    return Roster(tuple(schedules), frozenset(unassigned), missed)


# Extension point for other on-disk formats: name -> (parse, write).
FORMATS: dict[str, tuple[Callable[[str], Instance], Callable[[Instance], str]]] = {
    "json": (parse_instance, write_instance),
}


def register_format(name: str, parse: Callable[[str], Instance], write: Callable[[Instance], str]):
    FORMATS[name] = (parse, write)
