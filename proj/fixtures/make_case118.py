#!/usr/bin/env python3
"""Generates fixtures/case118.m, a synthetic 118-bus transmission system.

The network is built deterministically (fixed seed): 118 buses on a 2D
layout, a locality-respecting spanning tree plus local chords up to 186
branches, 54 generators with quadratic costs, and a load profile of about
3.8 GW. A Newton power flow at a proportional dispatch validates that the
case is electrically sane before the file is written.
"""

import math
import random

import numpy as np

SEED = 20240118
N_BUS = 118
N_BRANCH = 186
SLACK = 69

GEN_BUSES = [
    1, 4, 6, 8, 10, 12, 15, 18, 19, 24, 25, 26, 27, 31, 32, 34, 36, 40, 42, 46,
    49, 54, 55, 56, 59, 61, 62, 65, 66, 69, 70, 72, 73, 74, 76, 77, 80, 85, 87,
    89, 90, 91, 92, 99, 100, 103, 104, 105, 107, 110, 111, 112, 113, 116,
]


def build_topology(rng):
    # Buses on a jittered 12 x 10 grid; edges prefer short distances.
    coords = {}
    for b in range(1, N_BUS + 1):
        gx, gy = (b - 1) % 12, (b - 1) // 12
        coords[b] = (gx + 0.35 * rng.uniform(-1, 1), gy + 0.35 * rng.uniform(-1, 1))

    def dist(a, b):
        ax, ay = coords[a]
        bx, by = coords[b]
        return math.hypot(ax - bx, ay - by)

    edges = set()
    # Spanning tree: connect each bus to the closest already-connected bus.
    connected = [1]
    for b in range(2, N_BUS + 1):
        target = min(connected, key=lambda c: dist(b, c))
        edges.add((min(b, target), max(b, target)))
        connected.append(b)
    # Chords: closest non-neighbours first, with some randomness.
    candidates = []
    for a in range(1, N_BUS + 1):
        for b in range(a + 1, N_BUS + 1):
            if (a, b) not in edges and dist(a, b) < 2.2:
                candidates.append((dist(a, b) * rng.uniform(0.8, 1.25), a, b))
    candidates.sort()
    for _, a, b in candidates:
        if len(edges) >= N_BRANCH:
            break
        edges.add((a, b))
    assert len(edges) == N_BRANCH, len(edges)
    return sorted(edges)


def build_case(rng):
    edges = build_topology(rng)

    branches = []
    transformer_slots = set(rng.sample(range(len(edges)), 9))
    for idx, (a, b) in enumerate(edges):
        x = rng.uniform(0.02, 0.12)
        r = x * rng.uniform(0.08, 0.30)
        if idx in transformer_slots:
            tap, chg = rng.choice([0.95, 0.96, 0.97, 0.98, 1.0, 1.02]), 0.0
        else:
            tap, chg = 0.0, rng.uniform(0.01, 0.08)
        branches.append((a, b, round(r, 5), round(x, 5), round(chg, 4), tap))

    load_buses = [b for b in range(1, N_BUS + 1) if rng.random() < 0.72]
    loads = {}
    for b in load_buses:
        p = rng.uniform(12.0, 72.0)
        loads[b] = (round(p, 1), round(p * rng.uniform(0.18, 0.45), 1))
    total_load = sum(p for p, _ in loads.values())

    shunt_buses = rng.sample([b for b in range(1, N_BUS + 1) if b not in GEN_BUSES], 10)
    shunts = {b: rng.choice([6.0, 10.0, 15.0, 20.0]) for b in shunt_buses}

    gens = []
    for i, b in enumerate(GEN_BUSES):
        if i % 9 == 0:
            pmax = rng.uniform(400.0, 620.0)
        elif i % 3 == 0:
            pmax = rng.uniform(150.0, 350.0)
        else:
            pmax = rng.uniform(50.0, 150.0)
        if b == SLACK:
            pmax = max(pmax, 550.0)
        qmax = 0.45 * pmax
        qmin = -0.35 * pmax
        c2 = rng.uniform(0.008, 0.06)
        c1 = rng.uniform(15.0, 40.0)
        c0 = rng.uniform(0.0, 400.0)
        gens.append((b, round(pmax, 1), round(qmin, 1), round(qmax, 1),
                     round(c2, 5), round(c1, 3), round(c0, 2)))
    total_pmax = sum(g[1] for g in gens)
    scale = 1.62 * total_load / total_pmax
    gens = [(b, round(pmax * scale, 1), round(qmin * scale, 1), round(qmax * scale, 1), c2, c1, c0)
            for (b, pmax, qmin, qmax, c2, c1, c0) in gens]

    return branches, loads, shunts, gens, total_load


def newton_power_flow(branches, loads, shunts, gens, dispatch):
    """Polar Newton PF; all generator buses PV at 1.0 pu, slack at 1.0."""
    base = 100.0
    n = N_BUS
    Y = np.zeros((n, n), dtype=complex)
    for (a, b, r, x, chg, tap) in branches:
        t = tap if tap else 1.0
        y = 1.0 / complex(r, x)
        ysh = 1j * chg / 2
        i, j = a - 1, b - 1
        Y[i, i] += (y + ysh) / (t * t)
        Y[j, j] += y + ysh
        Y[i, j] -= y / t
        Y[j, i] -= y / t
    for b, mvar in shunts.items():
        Y[b - 1, b - 1] += 1j * mvar / base

    p_inj = np.zeros(n)
    q_inj = np.zeros(n)
    for b, (p, q) in loads.items():
        p_inj[b - 1] -= p / base
        q_inj[b - 1] -= q / base
    for (b, _, _, _, _, _, _), p in zip(gens, dispatch):
        p_inj[b - 1] += p / base

    pv = sorted({g[0] - 1 for g in gens} - {SLACK - 1})
    pq = sorted(set(range(n)) - set(pv) - {SLACK - 1})
    vm = np.ones(n)
    va = np.zeros(n)

    for _ in range(40):
        v = vm * np.exp(1j * va)
        s = v * np.conj(Y @ v)
        dp = p_inj - s.real
        dq = q_inj - s.imag
        mis = np.concatenate([dp[pv + pq], dq[pq]])
        if np.max(np.abs(mis)) < 1e-8:
            return True, vm, np.max(np.abs(mis))
        # numeric Jacobian (small system, clarity over speed)
        unknowns = [("a", b) for b in pv + pq] + [("m", b) for b in pq]
        J = np.zeros((len(mis), len(unknowns)))
        h = 1e-6
        for k, (kind, b) in enumerate(unknowns):
            vm2, va2 = vm.copy(), va.copy()
            if kind == "a":
                va2[b] += h
            else:
                vm2[b] += h
            v2 = vm2 * np.exp(1j * va2)
            s2 = v2 * np.conj(Y @ v2)
            dp2 = p_inj - s2.real
            dq2 = q_inj - s2.imag
            J[:, k] = (np.concatenate([dp2[pv + pq], dq2[pq]]) - mis) / h
        upd = np.linalg.solve(J, -mis)
        for k, (kind, b) in enumerate(unknowns):
            if kind == "a":
                va[b] += upd[k]
            else:
                vm[b] += upd[k]
    v = vm * np.exp(1j * va)
    s = v * np.conj(Y @ v)
    mis = np.concatenate([(p_inj - s.real)[pv + pq], (q_inj - s.imag)[pq]])
    return False, vm, np.max(np.abs(mis))


def main():
    rng = random.Random(SEED)
    branches, loads, shunts, gens, total_load = build_case(rng)

    # Proportional dispatch covering load plus a loss margin.
    total_pmax = sum(g[1] for g in gens)
    dispatch = [g[1] * (1.035 * total_load / total_pmax) for g in gens]
    ok, vm, mis = newton_power_flow(branches, loads, shunts, gens, dispatch)
    print(f"power flow converged={ok} mismatch={mis:.2e} "
          f"vm∈[{vm.min():.3f},{vm.max():.3f}] load={total_load:.0f}MW")
    assert ok and 0.90 < vm.min() and vm.max() < 1.10, "fixture is not electrically sane"

    lines = ["function mpc = case118",
             "% Synthetic 118-bus transmission system test case (deterministic fixture).",
             "mpc.version = '2';",
             "mpc.baseMVA = 100;",
             "",
             "% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin",
             "mpc.bus = ["]
    for b in range(1, N_BUS + 1):
        btype = 3 if b == SLACK else (2 if b in GEN_BUSES else 1)
        p, q = loads.get(b, (0.0, 0.0))
        bs = shunts.get(b, 0.0)
        lines.append(f"\t{b}\t{btype}\t{p}\t{q}\t0\t{bs}\t1\t1\t0\t138\t1\t1.06\t0.94;")
    lines.append("];")
    lines.append("")
    lines.append("% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin")
    lines.append("mpc.gen = [")
    for (b, pmax, qmin, qmax, _, _, _) in gens:
        lines.append(f"\t{b}\t0\t0\t{qmax}\t{qmin}\t1\t100\t1\t{pmax}\t0;")
    lines.append("];")
    lines.append("")
    lines.append("% fbus tbus r x b rateA rateB rateC ratio angle status")
    lines.append("mpc.branch = [")
    for (a, b, r, x, chg, tap) in branches:
        lines.append(f"\t{a}\t{b}\t{r}\t{x}\t{chg}\t0\t0\t0\t{tap}\t0\t1;")
    lines.append("];")
    lines.append("")
    lines.append("% model startup shutdown n c2 c1 c0")
    lines.append("mpc.gencost = [")
    for (_, _, _, _, c2, c1, c0) in gens:
        lines.append(f"\t2\t0\t0\t3\t{c2}\t{c1}\t{c0};")
    lines.append("];")
    with open("case118.m", "w") as f:
        f.write("\n".join(lines) + "\n")
    print("wrote case118.m")


if __name__ == "__main__":
    main()
