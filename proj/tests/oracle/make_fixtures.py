"""Writes the .m / .json fixtures consumed by the C++ test suites."""

import json
import os

import cases

OUT = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def fmt(x):
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def rows(mat):
    return "\n".join("\t" + "\t".join(fmt(v) for v in row) + ";" for row in mat)


def write_case(name, case):
    bus = [[b["id"], b["type"], b["pd"], b["qd"], b["gs"], b["bs"], 1,
            b["vm"], b["va"], b["base_kv"], 1, 1.1, 0.9] for b in case["bus"]]
    gen = [[g["bus"], g["pg"], g["qg"], 9999, -9999, g["vg"], case["baseMVA"],
            g.get("status", 1), 9999, -9999] + [0] * 11 for g in case["gen"]]
    branch = [[br["from"], br["to"], br["r"], br["x"], br["b"], 0, 0, 0,
               br.get("tap", 0.0), br.get("shift", 0.0), br.get("status", 1),
               -360, 360] for br in case["branch"]]
    text = (f"function mpc = {name}\n"
            "mpc.version = '2';\n"
            f"mpc.baseMVA = {fmt(case['baseMVA'])};\n\n"
            "%% bus data\n"
            "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n"
            "mpc.bus = [\n" + rows(bus) + "\n];\n\n"
            "%% generator data\n"
            "mpc.gen = [\n" + rows(gen) + "\n];\n\n"
            "%% branch data\n"
            "mpc.branch = [\n" + rows(branch) + "\n];\n")
    with open(os.path.join(OUT, name + ".m"), "w") as f:
        f.write(text)


def write_conn(name, master, conns):
    doc = {"master": master,
           "connections": [{"from": [fr, fb], "to": [tr, tb]}
                           for (fr, fb, tr, tb) in conns]}
    with open(os.path.join(OUT, name), "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def main():
    os.makedirs(OUT, exist_ok=True)
    write_case("case9", cases.case9())
    write_case("case14", cases.case14())
    write_case("case30", cases.case30())
    write_case("case118", cases.case118())
    write_conn("conn53.json", 1, [(1, 2, 2, 2), (1, 3, 3, 6), (2, 6, 3, 12)])
    write_conn("conn354.json", 1, [(1, 10, 2, 20), (1, 30, 3, 40), (2, 50, 3, 60),
                                   (1, 70, 2, 80), (2, 90, 3, 100)])
    write_conn("conn826.json", 1, [(1, 10, 2, 20), (1, 30, 3, 40), (2, 50, 4, 60),
                                   (2, 70, 5, 80), (3, 90, 6, 100), (3, 110, 7, 10),
                                   (4, 20, 5, 30)])


if __name__ == "__main__":
    main()
