"""Independent prototype of the case-merging rules, used to sanity-check the
composite test systems and freeze reference numbers."""

import copy

from cases import PQ, PV, SLACK


def merge(cases, connections, master=1):
    """cases: list of case dicts (region 1..n). connections: list of dicts
    {from_region, from_bus, to_region, to_bus, r, x, b, tap, shift}."""
    cases = copy.deepcopy(cases)
    nreg = len(cases)
    offsets = [0]
    for c in cases[:-1]:
        offsets.append(offsets[-1] + max(b["id"] for b in c["bus"]))

    # bus-type surgery on each region
    for ridx in range(1, nreg + 1):
        c = cases[ridx - 1]
        if ridx == master:
            continue
        to_endpoints = {conn["to_bus"] for conn in connections if conn["to_region"] == ridx}
        slack = next(b for b in c["bus"] if b["type"] == SLACK)
        for b in c["bus"]:
            if b["id"] in to_endpoints:
                if b["type"] == SLACK:
                    b["type"] = PQ
                    b["pd"] = b["qd"] = 0.0
                elif b["type"] == PV:
                    b["type"] = PQ
                for g in c["gen"]:
                    if g["bus"] == b["id"]:
                        g["status"] = 0
        if slack["id"] not in to_endpoints:
            slack["type"] = PV

    merged = {"baseMVA": cases[0]["baseMVA"], "bus": [], "gen": [], "branch": []}
    for ridx, c in enumerate(cases):
        off = offsets[ridx]
        for b in c["bus"]:
            b = dict(b)
            b["id"] += off
            merged["bus"].append(b)
        for g in c["gen"]:
            g = dict(g)
            g["bus"] += off
            merged["gen"].append(g)
        for br in c["branch"]:
            br = dict(br)
            br["from"] += off
            br["to"] += off
            merged["branch"].append(br)
    for conn in connections:
        merged["branch"].append({
            "from": conn["from_bus"] + offsets[conn["from_region"] - 1],
            "to": conn["to_bus"] + offsets[conn["to_region"] - 1],
            "r": conn.get("r", 0.0), "x": conn.get("x", 0.00623),
            "b": conn.get("b", 0.0), "tap": conn.get("tap", 0.985),
            "shift": conn.get("shift", 0.0), "status": 1})
    return merged, offsets


def conn(fr, fb, tr, tb):
    return {"from_region": fr, "from_bus": fb, "to_region": tr, "to_bus": tb}


CONN53 = [conn(1, 2, 2, 2), conn(1, 3, 3, 6), conn(2, 6, 3, 12)]

CONN354 = [conn(1, 10, 2, 20), conn(1, 30, 3, 40), conn(2, 50, 3, 60),
           conn(1, 70, 2, 80), conn(2, 90, 3, 100)]

CONN826 = [conn(1, 10, 2, 20), conn(1, 30, 3, 40), conn(2, 50, 4, 60),
           conn(2, 70, 5, 80), conn(3, 90, 6, 100), conn(3, 110, 7, 10),
           conn(4, 20, 5, 30)]
