"""Sequential overlapping-window solves with the rest of the month frozen.

Pricing networks always span the full horizon, so monthly resources (days
off, flight time) stay enforced; only which pairings may be chosen changes
from window to window.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .bnp import ALG_BASIC, BnpParams, BnpResult, RunLog, build_networks, solve_bnp
from .errors import InfeasibleInput, ParameterError
from .master import Column
from .model import Instance, Roster, check_roster, roster_objective
from .network import FreezeMask, SubproblemNetwork, WindowSpec, compute_windows, restrict_for_window


@dataclass(frozen=True)
class WindowingParams:
    window_len: int = 10
    overlap: int = 3
    mode: str = "win_basic"
    bnp: BnpParams = field(default_factory=lambda: ALG_BASIC)

    def __post_init__(self):
        if self.mode not in ("win_basic", "win_ml"):
            raise ParameterError(f"unknown windowing mode {self.mode!r}")
        if not 0 <= self.overlap < self.window_len:
            raise ParameterError("need 0 <= overlap < window_len")


@dataclass
class WindowRecord:
    window: WindowSpec
    imposed: int
    forbidden: int
    arcs: int
    objective: float
    kept_incumbent: bool
    result: BnpResult | None


@dataclass
class WindowedResult:
    roster: Roster
    objective: float
    windows: list[WindowRecord]

    @property
    def work(self) -> int:
        return sum(w.result.work for w in self.windows if w.result is not None)


def _overlaps(a, b, min_rest: int) -> bool:
    # two pairings cannot both be flown by one pilot
    return a.start_minute < b.end_minute + min_rest and b.start_minute < a.end_minute + min_rest


def freeze_mask_for(instance: Instance, window_index: int, windows: list[WindowSpec],
                    incumbent: Roster | None, mode: str) -> FreezeMask:
    """Pairings departing outside the current window follow the incumbent.

    Earlier windows are always frozen; later ones only under ``win_ml`` (for
    ``win_basic`` they are simply not offered).  Pairings the incumbent left
    unassigned stay unassigned.  Pairings departing inside the window are
    free, except where they clash with an imposed pairing of the same pilot.
    """
    if mode not in ("win_basic", "win_ml"):
        raise ParameterError(f"unknown windowing mode {mode!r}")
    win = windows[window_index]
    owner = incumbent.assignment() if incumbent is not None else {}
    imposed = set()
    for w in instance.pairings:
        if win.contains(w.start_day):
            continue
        frozen = w.start_day < win.first_day or mode == "win_ml"
        if frozen and w.id in owner:
            imposed.add((owner[w.id], w.id))
    pw = instance.pairing_by_id
    min_rest = instance.rules.T_min * 60
    base_of = {k.id: k.base for k in instance.pilots}
    forbidden = set()
    for k, wid in imposed:
        a = pw[wid]
        for b in instance.pairings:
            if b.base == base_of[k] and win.contains(b.start_day) and _overlaps(a, b, min_rest):
                forbidden.add((k, b.id))
    return FreezeMask(frozenset(imposed), frozenset(forbidden), mode)


def _restrict_all(instance: Instance, base: dict[str, SubproblemNetwork], win: WindowSpec,
                  mask: FreezeMask) -> dict[str, SubproblemNetwork]:
    return {k: restrict_for_window(net, win, mask) for k, net in base.items()}


def solve_windowed(instance: Instance, params: WindowingParams = WindowingParams(),
                   initial_roster: Roster | None = None, networks: dict[str, SubproblemNetwork] | None = None,
                   log: RunLog | None = None) -> WindowedResult:
    if params.mode == "win_ml" and initial_roster is None:
        raise InfeasibleInput("win_ml needs an initial roster")
    if initial_roster is not None:
        rep = check_roster(instance, initial_roster)
        if not rep.feasible:
            raise InfeasibleInput("initial roster infeasible: " + "; ".join(rep.lines()[:5]))
    log = log or RunLog()
    windows = compute_windows(instance.horizon_days, params.window_len, params.overlap)
    base = networks if networks is not None else build_networks(instance)
    pilots = instance.pilot_by_id
    H = instance.horizon_days

    incumbent = initial_roster if params.mode == "win_ml" else None
    best = roster_objective(instance, incumbent).objective if incumbent is not None else None
    records = []
    for i, win in enumerate(windows):
        mask = freeze_mask_for(instance, i, windows, incumbent, params.mode)
        nets = _restrict_all(instance, base, win, mask)
        must = {}
        for k, w in mask.imposed:
            must.setdefault(k, set()).add(w)
        warm = []
        if incumbent is not None:
            warm = [Column.from_schedule(pilots[s.pilot_id], s, H) for s in incumbent.schedules if s.rostered]
        static = {k.id for k in instance.pilots if k.id not in must}
        wlog = log.child(f"w{i + 1} ")
        wlog.write("window", first=win.first_day, last=win.last_day, imposed=len(mask.imposed),
                   forbidden=len(mask.forbidden), arcs=sum(len(n.arcs) for n in nets.values()))
        res = solve_bnp(instance, nets, params.bnp, warm, static_pilots=static, must_fly=must, log=wlog)
        kept = best is not None and res.objective < best - 1e-9
        if not kept:
            incumbent, best = res.roster, res.objective
        wlog.write("window_done", objective=res.objective, incumbent=best, kept_incumbent=int(kept))
        records.append(WindowRecord(win, len(mask.imposed), len(mask.forbidden),
                                    sum(len(n.arcs) for n in nets.values()), res.objective, kept, res))
    return WindowedResult(incumbent, best, records)
