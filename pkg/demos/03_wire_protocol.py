#!/usr/bin/env python3
"""Inspect the wire format: golden header bytes, fragmentation, reassembly.

The 24-byte big-endian header is shared bit-exactly by the simulator and the
UDP loopback mode; a full-HD frame fans out into MTU-sized fragments that
survive arbitrary arrival order.
"""

import random

from epicsim import DEFAULT_LADDER, Reassembler, WireHeader, frame_bytes, fragment
from epicsim.transport import MsgType, encode_message, fragment_capacity

ping = encode_message(WireHeader(MsgType.PING, session_id=1, sequence=7, timestamp=1_000))
print("PING wire bytes (session 1, seq 7, t=1000us):")
print(" ", ping.hex(" "))

size = frame_bytes(DEFAULT_LADDER[0])
payload = random.Random(0).randbytes(size)
frags = fragment(frame_id=1, payload=payload, mtu=1_400)
print(f"\nfull-HD frame: {size:,} B at MTU 1400 "
      f"(capacity {fragment_capacity(1400)} B/fragment)")
print(f"  -> {len(frags)} fragments, last carries {len(frags[-1].payload)} B")

order = list(range(len(frags)))
random.Random(1).shuffle(order)
reassembler = Reassembler()
rebuilt = None
for i in order:
    event = reassembler.offer(frags[i], now=0)
    if event.completed:
        rebuilt = event.completed[1]
print(f"  shuffled delivery reassembles intact: {rebuilt == payload}")

reassembler = Reassembler()
for frag in frags[:-1]:
    reassembler.offer(frag, now=0)
print(f"  one missing fragment -> still pending; after the 250 ms timeout: "
      f"abandoned={reassembler.sweep(250_001)}")
