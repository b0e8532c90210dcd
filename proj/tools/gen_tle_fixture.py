#!/usr/bin/env python3
"""Regenerates data/starlink_50.tle.

The first five records are the published STARLINK-1008..1013 element sets.
The remaining 45 are synthetic LEO element sets (SYNTH-LEO-nnn) spread over
several Starlink-like shells so that the 50-satellite scenario has realistic
ground-visibility churn. Output is deterministic.
"""
import random
import sys

PUBLISHED = """STARLINK-1008
1 44714U 19074B   25112.58592294  .00005641  00000+0  39726-3 0  9991
2 44714  53.0538 188.1053 0001311  93.0175 267.0964 15.06401971300352
STARLINK-1010
1 44716U 19074D   25112.59326790 -.00012419  00000+0 -81623-3 0  9996
2 44716  53.0539 188.0720 0001737  85.8677 274.2511 15.06401699300336
STARLINK-1011
1 44717U 19074E   25113.71935023  .00027243  00000+0  18386-2 0  9991
2 44717  53.0549 203.0208 0001205  56.7504 303.3600 15.06443130300242
STARLINK-1012
1 44718U 19074F   25113.69169776 -.00005321  00000+0 -33866-3 0  9999
2 44718  53.0540 183.1402 0001426  87.0797 273.0355 15.06391628300518
STARLINK-1013
1 44719U 19074G   25112.43846484 -.00001219  00000+0 -62926-4 0  9991
2 44719  53.0540 188.7692 0001399 105.2021 254.9122 15.06400452301453
"""

# (inclination deg, mean motion rev/day, count)
SHELLS = [(53.05, 15.064, 25), (43.00, 15.103, 10), (70.00, 14.985, 5), (97.60, 15.212, 5)]


def checksum(body):
    total = 0
    for ch in body[:68]:
        if ch.isdigit():
            total += int(ch)
        elif ch == "-":
            total += 1
    return str(total % 10)


def make_record(idx, catnum, incl, raan, ecc, argp, mean_anom, mean_motion):
    name = f"SYNTH-LEO-{idx:03d}"
    designator = f"25900{chr(ord('A') + idx % 26)}"
    l1 = (f"1 {catnum:05d}U {designator:<8} 25112.50000000 "
          f" .00000000  00000+0  00000+0 0  999")
    l2 = (f"2 {catnum:05d} {incl:8.4f} {raan:8.4f} {round(ecc * 1e7):07d} "
          f"{argp:8.4f} {mean_anom:8.4f} {mean_motion:11.8f}10000")
    assert len(l1) == 68 and len(l2) == 68, (len(l1), len(l2))
    return f"{name}\n{l1}{checksum(l1)}\n{l2}{checksum(l2)}\n"


def main():
    rng = random.Random(20250424)
    out = [PUBLISHED]
    idx = 1
    catnum = 90001
    for incl, mm, count in SHELLS:
        for _ in range(count):
            raan = rng.uniform(0.0, 360.0)
            mean_anom = rng.uniform(0.0, 360.0)
            argp = rng.uniform(0.0, 360.0)
            ecc = rng.uniform(0.0001, 0.0003)
            out.append(make_record(idx, catnum, incl, raan, ecc, argp, mean_anom,
                                   mm + rng.uniform(-0.002, 0.002)))
            idx += 1
            catnum += 1
    sys.stdout.write("".join(out))


if __name__ == "__main__":
    main()
