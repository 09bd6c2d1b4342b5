#!/usr/bin/env python3
"""Walk the default quality ladder and show what each rung demands.

The adaptive controller picks among these operating points; the bitrate of a
rung is width * height * bits-per-pixel * fps, and the encoded frame size is
the per-frame slice of that budget.
"""

from epicsim import DEFAULT_LADDER, bitrate, frame_bytes

print(f"{'level':>5} {'resolution':>12} {'fps':>4} {'bpp':>5} "
      f"{'frame bytes':>12} {'bitrate':>14}")
for lv in DEFAULT_LADDER:
    print(f"L{lv.level_index:<4} {lv.width:>6}x{lv.height:<5} {lv.fps:>4} "
          f"{str(lv.bpp):>5} {frame_bytes(lv):>12,} {bitrate(lv) / 1e6:>11.2f} Mb/s")

print()
top, bottom = DEFAULT_LADDER[0], DEFAULT_LADDER[-1]
print(f"the ladder spans {bitrate(top) / bitrate(bottom):.0f}x in demanded bandwidth, "
      f"so a congested path always has somewhere to go")
