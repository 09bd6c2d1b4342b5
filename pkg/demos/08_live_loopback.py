#!/usr/bin/env python3
"""Measure real RTT over UDP loopback with the same wire format.

An in-process echo server answers PINGs; the prober paces 1000 of them and
computes percentiles from the shared monotonic clock. This validates the
protocol outside the simulator and gives an (optimistic) RTT floor.

The same thing is available from the command line:
    epicsim live-echo --port 9400 &
    epicsim live-probe --addr 127.0.0.1:9400 --count 1000
"""

from epicsim.livenet import EchoServer, live_probe

with EchoServer() as server:
    print(f"echo server on 127.0.0.1:{server.port}")
    result = live_probe(("127.0.0.1", server.port), count=1_000, interval_us=500)

print(f"sent {result.sent}, received {result.received}, loss {result.loss_rate:.4f}")
print(f"rtt p50={result.rtt_percentile(50)}us p95={result.rtt_percentile(95)}us "
      f"p99={result.rtt_percentile(99)}us")
print(f"first ping on the wire: {result.first_ping.hex(' ')}")
print("the header layout is byte-identical to the simulator's golden encoding")
