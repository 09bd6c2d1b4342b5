#!/usr/bin/env python3
"""Squeeze a streaming session mid-run and watch the controller walk down.

The downlink drops from 700 Mb/s to 30 Mb/s at t=3s. Full HD demands
99.5 Mb/s, so the stream must back off; the controller needs two consecutive
bad windows per downgrade with a cooldown in between, and settles on the
highest rung whose demand fits in 90% of the link.
"""

from epicsim import (
    BandwidthStep,
    ClientSpec,
    DEFAULT_LADDER,
    NetworkProfile,
    NodeSpec,
    SessionSettings,
    SessionTopology,
    bitrate,
    run_session,
)

profile = NetworkProfile(one_way_latency=2_000, bandwidth=700_000_000, mtu=1400)
node = NodeSpec(node_id=1, pixel_throughput=5_000_000_000, encode_throughput=4_000_000_000)
topology = SessionTopology("edge_hosted", (ClientSpec(0, profile),), host_node=node)
settings = SessionSettings(bandwidth_steps=(BandwidthStep(time_us=3_000_000,
                                                          bandwidth=30_000_000),))

trace = run_session(topology, DEFAULT_LADDER, duration_us=8_000_000,
                    settings=settings, seed=3)

print("bandwidth step at t=3.000s: 700 Mb/s -> 30 Mb/s\n")
print(f"{'time':>8}  window  change        cause")
for ch in trace.level_changes:
    print(f"{ch.time / 1e6:>7.2f}s  w{ch.window_index:<5} "
          f"L{ch.old_level} -> L{ch.new_level}      {', '.join(ch.causes)}")

final = trace.final_levels[0]
print(f"\nsettled at L{final}: demands {bitrate(DEFAULT_LADDER[final]) / 1e6:.2f} Mb/s "
      f"<= 0.9 x 30 Mb/s = 27.00 Mb/s")
f = trace.frames
print(f"frames: {f.sent} sent, {f.delivered} delivered, {f.dropped} dropped "
      f"(drops happen while the queue overflows, before the walk completes)")
