"""Hand-built fixtures shared by the test modules."""
from __future__ import annotations

import numpy as np

from crewroster.instance_io import GeneratorSpec, ScenarioSpec, generate_instance, generate_scenario
from crewroster.model import (
    Activity, Flight, Instance, Pairing, Roster, RuleParams, Schedule, day_start,
)
from crewroster.network import Duals

TURN = 40


def make_pairing(pid: str, start_day: int, span: int = 1, n_flights: int = 2, base: str = "B",
                 dep_hour: float = 8.0, leg_min: int = 90, last_arrival_hour: float | None = None) -> Pairing:
    """Flights B -> X1 -> ... -> B spread over ``span`` consecutive days."""
    assert n_flights >= max(span, 1)
    airports = [base] + [f"{pid}X{i}" for i in range(1, n_flights)] + [base]
    per_day = [0] * span
    for i in range(n_flights):
        per_day[i * span // n_flights] += 1
    flights = []
    i = 0
    for d, cnt in enumerate(per_day):
        t = day_start(start_day + d) + int(dep_hour * 60)
        for _ in range(cnt):
            flights.append(Flight(f"{pid}F{i}", t, t + leg_min, airports[i], airports[i + 1]))
            t += leg_min + TURN
            i += 1
    if last_arrival_hour is not None:
        # shift the final leg so the pairing releases at the requested hour
        f = flights[-1]
        arr = day_start(start_day + span - 1) + int(last_arrival_hour * 60)
        flights[-1] = Flight(f.id, arr - leg_min, arr, f.origin, f.destination)
    start = flights[0].departure_minute - 45
    end = flights[-1].arrival_minute + 15
    duty = tuple(sorted({f.departure_day for f in flights}))
    work = sum(f.minutes for f in flights) + 60
    return Pairing(pid, base, tuple(flights), start, end, duty, work)


def make_instance(pairings, pilots, horizon=7, rules=None, bases=("B",), name="fixture") -> Instance:
    return Instance(horizon, tuple(bases), tuple(pilots), tuple(pairings), rules or RuleParams(T_off=2), name)


def schedule_of(pilot_id: str, horizon: int, pairings=(), vacations=()) -> Schedule:
    """Explicit schedule: listed pairings and vacations, every other free day a day off."""
    acts = [Activity.of_pairing(w) for w in pairings] + [Activity.vacation(d) for d in vacations]
    busy = set()
    for a in acts:
        busy.update(a.covered_days)
    acts += [Activity.day_off(d) for d in range(1, horizon + 1) if d not in busy]
    acts.sort(key=lambda a: (a.start_minute, a.kind))
    return Schedule(pilot_id, tuple(acts))


def tiny_instance(seed: int, n_pilots: int = 4, n_pairings: int = 8, horizon: int = 10) -> Instance:
    """Seeded generator instance inside the brute-force size guard."""
    inst = generate_instance(GeneratorSpec(seed=seed, horizon_days=horizon, n_bases=1, n_airports=5,
                                           n_pairings=n_pairings, total_flight_minutes=n_pairings * 900,
                                           n_pilots=n_pilots, rules=RuleParams(T_off=2)))
    return generate_scenario(inst, ScenarioSpec(seed=seed, n_preferred_flights_per_pilot=5,
                                                n_preferred_vacations_per_pilot=2,
                                                preassigned_off_probability=0.1))


def random_duals(instance: Instance, rng: np.random.Generator, scale: float = 150.0) -> Duals:
    return Duals(
        alpha={w.id: float(rng.uniform(-scale, scale / 3)) for w in instance.pairings},
        beta={(k.id, d): float(rng.uniform(-scale, scale)) for k in instance.pilots for d in k.preassigned_days_off},
        gamma={k.id: float(rng.uniform(-scale, scale)) for k in instance.pilots},
    )


def roster(instance: Instance, schedules) -> Roster:
    return Roster.from_schedules(instance, schedules)


def branching_instance(seed: int) -> Instance:
    """Small single-base instance whose root LP is usually fractional (seeds 3, 6, 7 are)."""
    inst = generate_instance(GeneratorSpec(seed=seed, horizon_days=14, n_bases=1, n_airports=8, n_pairings=40,
                                           total_flight_minutes=40_000, n_pilots=8, rules=RuleParams(T_off=4)))
    return generate_scenario(inst, ScenarioSpec(seed=seed))
