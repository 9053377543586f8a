"""Method runner, comparison metrics and benchmark tables.

L is the percent satisfaction loss and p the percent runtime, both relative
to the full-horizon ``alg_basic`` solve of the same instance.
"""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .bnp import PRESETS, BnpParams, RunLog, solve_bnp
from .errors import MetricError, ParameterError
from .instance_io import GeneratorSpec, ScenarioSpec, generate_instance, generate_scenario, split_scenarios
from .model import Instance, Roster, roster_objective
from .seqasg import PolicyNet, seqasg_with_state
from .windowing import WindowingParams, solve_windowed

METHODS = ("alg_basic", "alg_fast", "win_basic", "win_ml", "seqasg")
BASELINE = "alg_basic"
CSV_SCHEMA = "crewroster.bench/1"
CSV_COLUMNS = ("schema", "instance", "method", "S", "t", "L", "p")
CLOCKS = ("wall", "work")


def metric_L(S: float, S_baseline: float) -> float:
    if not S_baseline > 0:
        raise MetricError(f"baseline objective must be positive, got {S_baseline}")
    return round(100.0 * (1.0 - S / S_baseline), 2)


def metric_p(t: float, t_baseline: float) -> float:
    if not t_baseline > 0:
        raise MetricError(f"baseline time must be positive, got {t_baseline}")
    return round(100.0 * t / t_baseline, 2)


def normalize_method(name: str) -> str:
    m = name.replace("-", "_").lower()
    if m not in METHODS:
        raise ParameterError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return m


@dataclass
class MethodRun:
    method: str
    roster: Roster
    S: float
    wall: float
    work: int
    log: list[str]

    def t(self, clock: str) -> float:
        return self.wall if clock == "wall" else float(self.work)


def run_method(instance: Instance, method: str, policy: PolicyNet | None = None, window_len: int = 10,
               overlap: int = 3, params: BnpParams | None = None, log_sink=None) -> MethodRun:
    """Solve with one method; timing covers the solve only (seqAsg included for win_ml)."""
    method = normalize_method(method)
    log = RunLog(log_sink)
    if method in ("alg_basic", "alg_fast"):
        t0 = time.perf_counter()
        res = solve_bnp(instance, params=params or PRESETS[method], log=log)
        wall = time.perf_counter() - t0
        roster, work = res.roster, res.work
    elif method == "seqasg":
        t0 = time.perf_counter()
        roster, st = seqasg_with_state(instance, _need(policy))
        wall = time.perf_counter() - t0
        work = st.edges_scored
    else:
        mode = "win_basic" if method == "win_basic" else "win_ml"
        wp = WindowingParams(window_len, overlap, mode, params or PRESETS["alg_basic"])
        t0 = time.perf_counter()
        init, seq_work = None, 0
        if mode == "win_ml":
            init, st = seqasg_with_state(instance, _need(policy))
            seq_work = st.edges_scored
        res = solve_windowed(instance, wp, init, log=log)
        wall = time.perf_counter() - t0
        roster, work = res.roster, res.work + seq_work
    S = roster_objective(instance, roster).objective
    # wall time stays out of the log so repeated runs produce identical files
    log.write("result", method=method, S=S, work=work)
    return MethodRun(method, roster, S, wall, work, log.lines)


def _need(policy: PolicyNet | None) -> PolicyNet:
    if policy is None:
        raise ParameterError("this method needs a policy (--policy or --seed)")
    return policy


@dataclass(frozen=True)
class BenchmarkRecord:
    instance: str
    method: str
    S: float
    t: float
    L: float | None
    p: float | None


def _cell(args):
    inst, method, policy, wl, ov, params = args
    return run_method(inst, method, policy, wl, ov, params)


def run_bench(instances: Sequence[Instance], methods: Sequence[str], policy: PolicyNet | None = None,
              window_len: int = 10, overlap: int = 3, params: BnpParams | None = None,
              clock: str = "wall", jobs: int = 1) -> list[BenchmarkRecord]:
    if clock not in CLOCKS:
        raise ParameterError(f"clock must be one of {CLOCKS}")
    methods = [normalize_method(m) for m in methods]
    if BASELINE not in methods:
        methods = [BASELINE] + methods
    cells = [(inst, m, policy, window_len, overlap, params) for inst in instances for m in methods]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            runs = list(ex.map(_cell, cells))
    else:
        runs = [_cell(c) for c in cells]
    by_key = {(c[0].name, c[1]): r for c, r in zip(cells, runs)}
    return records_from_runs([i.name for i in instances], methods, by_key, clock)


def records_from_runs(names: Sequence[str], methods: Sequence[str], runs: dict, clock: str) -> list[BenchmarkRecord]:
    out = []
    for name in names:
        base = runs[(name, BASELINE)]
        for m in methods:
            r = runs[(name, m)]
            t = r.t(clock)
            try:
                L = metric_L(r.S, base.S)
            except MetricError:
                L = None
            try:
                p = metric_p(t, base.t(clock))
            except MetricError:
                p = None
            out.append(BenchmarkRecord(name, m, r.S, t, L, p))
    return out


def averages(records: Sequence[BenchmarkRecord]) -> dict[str, tuple[float, float, float | None, float | None]]:
    """Per-method means of S, t, L and p (L, p averaged row-wise)."""
    out = {}
    for m in dict.fromkeys(r.method for r in records):
        rows = [r for r in records if r.method == m]
        Ls = [r.L for r in rows if r.L is not None]
        ps = [r.p for r in rows if r.p is not None]
        out[m] = (sum(r.S for r in rows) / len(rows), sum(r.t for r in rows) / len(rows),
                  round(sum(Ls) / len(Ls), 2) if Ls and len(Ls) == len(rows) else None,
                  round(sum(ps) / len(ps), 2) if ps and len(ps) == len(rows) else None)
    return out


def _num(v, digits=2) -> str:
    return "" if v is None else f"{v:.{digits}f}"


def to_csv(records: Sequence[BenchmarkRecord], clock: str = "wall") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    tdig = 4 if clock == "wall" else 0
    for r in records:
        w.writerow([CSV_SCHEMA, r.instance, r.method, _num(r.S), _num(r.t, tdig), _num(r.L), _num(r.p)])
    for m, (S, t, L, p) in averages(records).items():
        w.writerow([CSV_SCHEMA, "Average", m, _num(S), _num(t, tdig), _num(L), _num(p)])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for r in rows:
        if r.get("schema") != CSV_SCHEMA:
            raise ParameterError(f"unsupported bench CSV schema {r.get('schema')!r}")
    return rows


def to_text(records: Sequence[BenchmarkRecord]) -> str:
    """Aligned table: one row per instance, S / L / p per method."""
    methods = list(dict.fromkeys(r.method for r in records))
    names = list(dict.fromkeys(r.instance for r in records))
    cell = {(r.instance, r.method): r for r in records}
    head = ["instance"]
    for m in methods:
        head += [f"S[{m}]"] + ([] if m == BASELINE else [f"L[{m}]", f"p[{m}]"])
    rows = [head]
    for n in names:
        row = [n]
        for m in methods:
            r = cell[(n, m)]
            row += [_num(r.S)] + ([] if m == BASELINE else [_num(r.L), _num(r.p)])
        rows.append(row)
    avg = averages(records)
    row = ["Average"]
    for m in methods:
        S, _, L, p = avg[m]
        row += [_num(S)] + ([] if m == BASELINE else [_num(L), _num(p)])
    rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    lines = ["  ".join(c.rjust(wd) if j else c.ljust(wd) for j, (c, wd) in enumerate(zip(r, widths))) for r in rows]
    return "\n".join(lines) + "\n"


def write_figures(records: Sequence[BenchmarkRecord], out_dir: Path) -> list[Path]:
    """Bar chart of mean L and p per method, plus a per-instance L-vs-p scatter."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    avg = averages(records)
    methods = [m for m in avg if m != BASELINE]
    paths = []
    if methods:
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
        for ax, idx, label in ((axes[0], 2, "mean L (%)"), (axes[1], 3, "mean p (%)")):
            vals = [avg[m][idx] or 0.0 for m in methods]
            ax.bar(range(len(methods)), vals, color="#4c72b0")
            ax.set_xticks(range(len(methods)), methods, rotation=20)
            ax.set_ylabel(label)
        fig.tight_layout()
        p = out_dir / "bench_means.png"
        fig.savefig(p, dpi=100, metadata={"Software": None})
        plt.close(fig)
        paths.append(p)

        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        for m in methods:
            rows = [r for r in records if r.method == m and r.L is not None and r.p is not None]
            ax.scatter([r.p for r in rows], [r.L for r in rows], label=m, s=18)
        ax.set_xlabel("p (%)")
        ax.set_ylabel("L (%)")
        ax.legend(fontsize=7)
        fig.tight_layout()
        p = out_dir / "bench_tradeoff.png"
        fig.savefig(p, dpi=100, metadata={"Software": None})
        plt.close(fig)
        paths.append(p)
    return paths


# ------------------------------------------------------------------ standard suites

@dataclass(frozen=True)
class Suite:
    base_seed: int = 100
    target_hours: float = 65.0
    n_scenarios: int = 30

    def base_instance(self) -> Instance:
        return generate_instance(GeneratorSpec(seed=self.base_seed, target_hours=self.target_hours,
                                               name=f"mid{self.base_seed}"))

    def scenarios(self, which: str = "test") -> list[Instance]:
        base = self.base_instance()
        train, test = split_scenarios(list(range(self.n_scenarios)))
        seeds = test if which == "test" else train
        return [generate_scenario(base, ScenarioSpec(seed=s)) for s in seeds]


MID_SIZE = Suite()
