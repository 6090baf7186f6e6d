#!/usr/bin/env python3
"""How slow can the round-robin refresh run before held voltages drift?

Sweeps the refresh period, runs two full refresh cycles on all 32 cells
holding -1.1 V, and reports the worst deviation from target seen while
floating.  The drift bound is roughly |V| * leak_rate * period, so the
table doubles as a sanity check of the leak model.
"""
import argparse

from clfgsim import engine, fsm


def run_once(period_s: int, leak_rate: float) -> float:
    duration = 2.0 * period_s
    raw = {
        "schema_version": 1,
        "name": f"refresh-{period_s}s",
        "analog": {"leak_rate": leak_rate},
        "rails": {"v_hold": -1.101},
        "cell_targets": {str(i): -1.1 for i in range(32)},
        "schedule": [
            {"t": 0.0, "write": ["CTRL", 2]},
            {"t": 0.0, "write": ["LOCK_MASK_LO", 0xFFFF]},
            {"t": 0.0, "write": ["LOCK_MASK_HI", 0xFFFF]},
            {"t": 0.0, "write": ["REFRESH_PERIOD", period_s]},
            {"t": 0.0, "exec": True},
        ],
        "duration_s": duration,
        "traces": {
            "sample_rate_hz": max(0.1, 64.0 / period_s),
            "kinds": ["cells"],
            "cells": list(range(32)),
        },
    }
    bundle = engine.run_generic(engine.build_scenario(raw))
    closed: dict[int, float] = {}
    intervals: dict[int, list[tuple[float, float]]] = {i: [] for i in range(32)}
    for ev in bundle.events:
        if ev.lock_action == fsm.LockAction.CLOSE:
            closed[ev.cell] = ev.time_s
        elif ev.lock_action == fsm.LockAction.OPEN:
            intervals[ev.cell].append((closed.pop(ev.cell), ev.time_s))
    for cell, t in closed.items():
        intervals[cell].append((t, float("inf")))
    worst = 0.0
    for t, c, v in bundle.tables["cells"].rows:
        if t < period_s:  # first pass still bringing cells onto target
            continue
        if any(a <= t < b for a, b in intervals[c]):
            continue
        worst = max(worst, abs(v + 1.1))
    return worst


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--leak-rate", type=float, default=1e-8,
                        help="per-second relaxation rate of held voltages")
    parser.add_argument("--periods", default="60,120,300,600,1200",
                        help="comma-separated refresh periods in seconds")
    args = parser.parse_args()
    periods = [int(p) for p in args.periods.split(",")]
    print(f"# 32 cells at -1.1 V, leak_rate={args.leak_rate:g}/s")
    print("period_s,worst_floating_error_uv,bound_uv")
    for period in periods:
        worst = run_once(period, args.leak_rate)
        bound = 1.1 * args.leak_rate * period * 1e6
        print(f"{period},{worst * 1e6:.3f},{bound:.3f}")


if __name__ == "__main__":
    main()
