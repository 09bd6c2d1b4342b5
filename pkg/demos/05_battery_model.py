#!/usr/bin/env python3
"""Compare device battery life: render on the headset vs decode a stream.

A low-spec headset renders full HD at its thermal limit; a thin client only
pays for the radio and the hardware decoder. Battery life is capacity over
average power, so the offload gain is the power ratio.
"""

from epicsim import DEFAULT_LADDER, EnergyConfig, EnergyMode, PowerProfile, average_power
from epicsim.power import battery_life_gain, battery_life_hours

profile = PowerProfile()  # 3.0 W idle, 4.5 W render, 1.2 W radio, 0.8 W decode, 7.6 Wh

print(f"{'level':>5} {'local render':>14} {'offloaded':>11} {'life local':>11} "
      f"{'life offl':>10} {'gain':>8}")
for level in DEFAULT_LADDER:
    local = EnergyConfig(EnergyMode.LOCAL_RENDER, profile, level)
    off = EnergyConfig(EnergyMode.OFFLOADED, profile, level)
    gain = battery_life_gain(local, off)
    print(f"L{level.level_index:<4} {average_power(local):>12.2f} W {average_power(off):>9.2f} W "
          f"{battery_life_hours(local):>9.2f} h {battery_life_hours(off):>8.2f} h {gain:>7.1f}%")

print("\nat full HD the offloaded headset lasts 50% longer, clearing the 30% target")

hot_radio = PowerProfile(p_radio=2.7)
local = EnergyConfig(EnergyMode.LOCAL_RENDER, hot_radio, DEFAULT_LADDER[0])
off = EnergyConfig(EnergyMode.OFFLOADED, hot_radio, DEFAULT_LADDER[0])
print(f"with a power-hungry 2.7 W radio the gain collapses to "
      f"{battery_life_gain(local, off):.1f}% and the verdict flips")
