"""Bundled test systems.

case9 is the classic WSCC 3-machine 9-bus system. case14 is the familiar
14-bus network. case30 and case118 are deterministic synthetic meshed
systems of the stated size (ring plus chords, generation spread across the
network); they exist to exercise the pipeline at realistic region sizes,
not to model any particular physical grid.
"""

import math

PQ, PV, SLACK = 1, 2, 3


def _bus(bid, btype, pd=0.0, qd=0.0, gs=0.0, bs=0.0, vm=1.0, va=0.0, kv=345.0):
    return dict(id=bid, type=btype, pd=pd, qd=qd, gs=gs, bs=bs, vm=vm, va=va, base_kv=kv)


def _gen(bus, pg, qg=0.0, vg=1.0, status=1):
    return dict(bus=bus, pg=pg, qg=qg, vg=vg, status=status)


def _br(f, t, r, x, b=0.0, tap=0.0, shift=0.0, status=1):
    return {"from": f, "to": t, "r": r, "x": x, "b": b, "tap": tap, "shift": shift,
            "status": status}


def case9():
    bus = [
        _bus(1, SLACK),
        _bus(2, PV),
        _bus(3, PV),
        _bus(4, PQ),
        _bus(5, PQ, 90, 30),
        _bus(6, PQ),
        _bus(7, PQ, 100, 35),
        _bus(8, PQ),
        _bus(9, PQ, 125, 50),
    ]
    gen = [_gen(1, 0.0), _gen(2, 163.0), _gen(3, 85.0)]
    branch = [
        _br(1, 4, 0.0, 0.0576, 0.0),
        _br(4, 5, 0.017, 0.092, 0.158),
        _br(5, 6, 0.039, 0.17, 0.358),
        _br(3, 6, 0.0, 0.0586, 0.0),
        _br(6, 7, 0.0119, 0.1008, 0.209),
        _br(7, 8, 0.0085, 0.072, 0.149),
        _br(8, 2, 0.0, 0.0625, 0.0),
        _br(8, 9, 0.032, 0.161, 0.306),
        _br(9, 4, 0.01, 0.085, 0.176),
    ]
    return {"baseMVA": 100.0, "bus": bus, "gen": gen, "branch": branch}


def case14():
    kv = 135.0
    bus = [
        _bus(1, SLACK, 0, 0, vm=1.06, kv=kv),
        _bus(2, PV, 21.7, 12.7, vm=1.045, kv=kv),
        _bus(3, PV, 94.2, 19.0, vm=1.01, kv=kv),
        _bus(4, PQ, 47.8, -3.9, kv=kv),
        _bus(5, PQ, 7.6, 1.6, kv=kv),
        _bus(6, PV, 11.2, 7.5, vm=1.07, kv=kv),
        _bus(7, PQ, 0, 0, kv=kv),
        _bus(8, PV, 0, 0, vm=1.09, kv=kv),
        _bus(9, PQ, 29.5, 16.6, 0, 19.0, kv=kv),
        _bus(10, PQ, 9.0, 5.8, kv=kv),
        _bus(11, PQ, 3.5, 1.8, kv=kv),
        _bus(12, PQ, 6.1, 1.6, kv=kv),
        _bus(13, PQ, 13.5, 5.8, kv=kv),
        _bus(14, PQ, 14.9, 5.0, kv=kv),
    ]
    gen = [
        _gen(1, 232.4, -16.9, 1.06),
        _gen(2, 40.0, 42.4, 1.045),
        _gen(3, 0.0, 23.4, 1.01),
        _gen(6, 0.0, 12.2, 1.07),
        _gen(8, 0.0, 17.4, 1.09),
    ]
    branch = [
        _br(1, 2, 0.01938, 0.05917, 0.0528),
        _br(1, 5, 0.05403, 0.22304, 0.0492),
        _br(2, 3, 0.04699, 0.19797, 0.0438),
        _br(2, 4, 0.05811, 0.17632, 0.0340),
        _br(2, 5, 0.05695, 0.17388, 0.0346),
        _br(3, 4, 0.06701, 0.17103, 0.0128),
        _br(4, 5, 0.01335, 0.04211, 0.0),
        _br(4, 7, 0.0, 0.20912, 0.0, tap=0.978),
        _br(4, 9, 0.0, 0.55618, 0.0, tap=0.969),
        _br(5, 6, 0.0, 0.25202, 0.0, tap=0.932),
        _br(6, 11, 0.09498, 0.19890, 0.0),
        _br(6, 12, 0.12291, 0.25581, 0.0),
        _br(6, 13, 0.06615, 0.13027, 0.0),
        _br(7, 8, 0.0, 0.17615, 0.0),
        _br(7, 9, 0.0, 0.11001, 0.0),
        _br(9, 10, 0.03181, 0.08450, 0.0),
        _br(9, 14, 0.12711, 0.27038, 0.0),
        _br(10, 11, 0.08205, 0.19207, 0.0),
        _br(12, 13, 0.22092, 0.19988, 0.0),
        _br(13, 14, 0.17093, 0.34802, 0.0),
    ]
    return {"baseMVA": 100.0, "bus": bus, "gen": gen, "branch": branch}


def synthetic_case(n, gen_every, chord_step, chord_every, load_scale, kv=230.0,
                   ring_x=0.04, chord_x=0.06):
    """Deterministic meshed system: ring 1..n plus chords, PV generation
    every `gen_every` buses, slack generation balancing the total load."""
    bus, gen, branch = [], [], []
    total_load = 0.0
    gen_buses = [1] + [b for b in range(gen_every, n + 1, gen_every)]
    for i in range(1, n + 1):
        if i in gen_buses:
            bus.append(_bus(i, SLACK if i == 1 else PV, 0.0, 0.0,
                            vm=1.02 if i == 1 else 1.01, kv=kv))
        else:
            pd = load_scale * (1.0 + 0.5 * math.sin(0.7 * i))
            qd = 0.35 * pd
            total_load += pd
            bus.append(_bus(i, PQ, round(pd, 2), round(qd, 2), kv=kv))
    n_pv = len(gen_buses) - 1
    pv_share = 0.8 * total_load / max(n_pv, 1)
    for b in gen_buses:
        if b == 1:
            gen.append(_gen(1, round(total_load - n_pv * round(pv_share, 1), 1),
                            0.0, 1.02))
        else:
            gen.append(_gen(b, round(pv_share, 1), 0.0, 1.01))
    for i in range(1, n + 1):
        j = i % n + 1
        branch.append(_br(i, j, ring_x / 10, ring_x, 0.02))
    for i in range(1, n + 1, chord_every):
        j = (i - 1 + chord_step) % n + 1
        branch.append(_br(i, j, chord_x / 10, chord_x, 0.03))
    return {"baseMVA": 100.0, "bus": bus, "gen": gen, "branch": branch}


def case30():
    return synthetic_case(30, gen_every=6, chord_step=9, chord_every=5, load_scale=11.0)


def case118():
    return synthetic_case(118, gen_every=10, chord_step=17, chord_every=4, load_scale=32.0,
                          ring_x=0.02, chord_x=0.03)
