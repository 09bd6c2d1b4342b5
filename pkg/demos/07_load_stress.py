#!/usr/bin/env python3
"""Capacity searches: how many users fit through a 1 Gb/s edge egress.

Each full-HD user demands 99.53 Mb/s, so ten fit (995.3 Mb/s) and eleven do
not (1094.9 Mb/s). The load search scans upward for the largest user count
inside the latency and loss budgets; the stress search finds the smallest
count that congests the shared queue.
"""

import json
from pathlib import Path

from epicsim import orchestrator

scenario = json.loads((Path(__file__).resolve().parent.parent /
                       "scenarios" / "shared-egress.json").read_text())
cfg = orchestrator.parse_scenario(scenario)

print("per-user demand: 99.53 Mb/s, shared egress: 1000 Mb/s\n")
print(f"{'users':>5} {'loss':>8} {'rtt p95':>9} {'queue drops':>12}")
for n in range(8, 13):
    result = orchestrator.run_scenario(orchestrator.scale_clients(cfg, n))
    r = result.report
    qdrops = result.trace.queue_drop_timeline[-1] if result.trace.queue_drop_timeline else 0
    print(f"{n:>5} {r.loss_rate:>8.4f} {r.rtt_p95:>7}us {qdrops:>12}")

best = orchestrator.load_search(cfg, rtt_budget_us=7_000, loss_budget=0.02, n_max=16)
first_bad = orchestrator.stress_search(cfg, n_max=16)
print(f"\nload_search  -> {best} users meet the budgets")
print(f"stress_search -> congestion first appears at {first_bad} users")
