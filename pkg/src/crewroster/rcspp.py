"""Label-setting solver for the pricing problem.

Finds maximum reduced-cost source-to-sink paths subject to the resource
windows: flight time within ``[0, T_flight]``, consecutive duty days within
``[0, T_work]`` and zero days off still owed at the sink.  Nodes are
processed in topological order; a label is discarded when another label at
the same node has at least its reduced cost and is no worse on the first
``dominance_resource_count`` resources of :data:`DOMINANCE_ORDER`.
Unchecked resources are still enforced as windows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ContractViolation
from .model import Schedule
from .network import SubproblemNetwork

DOMINANCE_ORDER = ("days_off_remaining", "flight_time", "consecutive_duty_days")


@dataclass(frozen=True)
class PricedPath:
    pilot_id: str
    arcs: tuple[int, ...]
    reduced_cost: float
    cost: float
    schedule: Schedule


@dataclass
class PricingStats:
    labels_created: int = 0
    calls: int = 0


@njit(cache=True)
def _dominates(ca, oa, fa, da, cb, ob, fb, db, nres):
    if ca < cb:
        return False
    if nres >= 1 and oa > ob:
        return False
    if nres >= 2 and fa > fb:
        return False
    if nres >= 3 and da > db:
        return False
    return True


@njit(cache=True)
def _label_kernel(order, out_ptr, out_idx, head, red, doff, dflt, dduty, reset,
                  source, sink, t_off, fmax, wmax, nres, cap):
    n_nodes = out_ptr.shape[0] - 1
    cost = np.empty(cap, np.float64)
    off = np.empty(cap, np.int64)
    flt = np.empty(cap, np.int64)
    duty = np.empty(cap, np.int64)
    parent = np.empty(cap, np.int64)
    arc = np.empty(cap, np.int64)
    nxt = np.empty(cap, np.int64)
    alive = np.zeros(cap, np.bool_)
    bucket = np.full(n_nodes, -1, np.int64)
    fin = np.empty(cap, np.int64)
    nfin = 0

    cost[0] = 0.0
    off[0] = t_off
    flt[0] = 0
    duty[0] = 0
    parent[0] = -1
    arc[0] = -1
    nxt[0] = -1
    alive[0] = True
    bucket[source] = 0
    n = 1

    for u in order:
        if u == sink or bucket[u] == -1:
            continue
        for p in range(out_ptr[u], out_ptr[u + 1]):
            ai = out_idx[p]
            h = head[ai]
            l = bucket[u]
            while l != -1:
                if alive[l]:
                    f2 = flt[l] + dflt[ai]
                    d2 = (0 if reset[ai] else duty[l]) + dduty[ai]
                    if f2 <= fmax and d2 <= wmax:
                        o2 = off[l] - doff[ai]
                        if o2 < 0:
                            o2 = 0
                        c2 = cost[l] + red[ai]
                        if h == sink:
                            if o2 == 0:
                                if n >= cap:
                                    return -1, 0, cost, parent, arc, fin
                                cost[n] = c2
                                off[n] = 0
                                flt[n] = f2
                                duty[n] = d2
                                parent[n] = l
                                arc[n] = ai
                                alive[n] = False
                                fin[nfin] = n
                                nfin += 1
                                n += 1
                        else:
                            dominated = False
                            prev = -1
                            x = bucket[h]
                            while x != -1:
                                if not alive[x]:
                                    nx = nxt[x]
                                    if prev == -1:
                                        bucket[h] = nx
                                    else:
                                        nxt[prev] = nx
                                    x = nx
                                    continue
                                if _dominates(cost[x], off[x], flt[x], duty[x], c2, o2, f2, d2, nres):
                                    dominated = True
                                    break
                                if _dominates(c2, o2, f2, d2, cost[x], off[x], flt[x], duty[x], nres):
                                    alive[x] = False
                                    nx = nxt[x]
                                    if prev == -1:
                                        bucket[h] = nx
                                    else:
                                        nxt[prev] = nx
                                    x = nx
                                    continue
                                prev = x
                                x = nxt[x]
                            if not dominated:
                                if n >= cap:
                                    return -1, 0, cost, parent, arc, fin
                                cost[n] = c2
                                off[n] = o2
                                flt[n] = f2
                                duty[n] = d2
                                parent[n] = l
                                arc[n] = ai
                                alive[n] = True
                                nxt[n] = bucket[h]
                                bucket[h] = n
                                n += 1
                l = nxt[l]
    return n, nfin, cost, parent, arc, fin


def _flat(net: SubproblemNetwork) -> dict:
    c = net.cache
    if "flat" not in c:
        ptr = np.zeros(len(net.nodes) + 1, np.int64)
        for u, outs in enumerate(net.out_arcs):
            ptr[u + 1] = ptr[u] + len(outs)
        idx = np.fromiter((ai for outs in net.out_arcs for ai in outs), np.int64, count=int(ptr[-1]))
        c["flat"] = {
            "order": np.asarray(net.order, np.int64),
            "ptr": ptr,
            "idx": idx,
            "head": np.asarray([a.head for a in net.arcs], np.int64),
            "doff": np.asarray([a.delta.days_off for a in net.arcs], np.int64),
            "dflt": np.asarray([a.delta.flight_minutes for a in net.arcs], np.int64),
            "dduty": np.asarray([a.delta.duty_days for a in net.arcs], np.int64),
            "reset": np.asarray([a.delta.resets_duty for a in net.arcs], np.bool_),
            "cap": 1 << 14,
        }
    return c["flat"]


def solve_pricing(net: SubproblemNetwork, dominance_resource_count: int = 3, max_columns: int = 5,
                  epsilon: float = 1e-6, stats: PricingStats | None = None) -> list[PricedPath]:
    if net.reduced is None:
        raise ContractViolation("reduced costs not loaded; call apply_duals first")
    if dominance_resource_count not in (0, 1, 2, 3):
        raise ContractViolation("dominance_resource_count must be in 0..3")
    if not net.arcs:
        return []
    f = _flat(net)
    red = np.asarray(net.reduced, np.float64)
    rules = net.rules
    while True:
        n, nfin, cost, parent, arc, fin = _label_kernel(
            f["order"], f["ptr"], f["idx"], f["head"], red, f["doff"], f["dflt"], f["dduty"], f["reset"],
            net.source, net.sink, int(rules.T_off), float(rules.T_flight * 60), int(rules.T_work),
            int(dominance_resource_count), int(f["cap"]))
        if n >= 0:
            break
        f["cap"] *= 4
    if stats is not None:
        stats.labels_created += int(n)
        stats.calls += 1

    ends = fin[:nfin]
    ends = ends[np.argsort(-cost[ends], kind="stable")]
    out: list[PricedPath] = []
    seen = set()
    for lab in ends:
        rc = float(cost[lab])
        if rc <= epsilon or len(out) >= max_columns:
            break
        path = []
        x = int(lab)
        while arc[x] >= 0:
            path.append(int(arc[x]))
            x = int(parent[x])
        path.reverse()
        sched = net.path_schedule(path)
        sig = sched.signature()
        if sig in seen:
            continue
        seen.add(sig)
        out.append(PricedPath(net.pilot_id, tuple(path), rc, sum(net.arcs[i].cost for i in path), sched))
    return out
