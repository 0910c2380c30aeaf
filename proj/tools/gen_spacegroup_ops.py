#!/usr/bin/env python3
"""Regenerate data/spacegroup_ops.txt from the spglib Hall-symbol database.

Setting choices per space-group number:
  * monoclinic groups: unique axis b, cell choice 1 (spglib's first entry)
  * groups with two origin choices: origin choice 2 (inversion at origin)
  * rhombohedral groups: hexagonal axes

Only needed when the table has to be rebuilt; the library reads the
generated text file and has no runtime dependency on spglib.

Usage: python3 tools/gen_spacegroup_ops.py > data/spacegroup_ops.txt
"""
from fractions import Fraction

import spglib


def pick_hall_numbers():
    chosen = {}
    for hall in range(1, 531):
        sgt = spglib.get_spacegroup_type(hall)
        number, choice = sgt.number, sgt.choice
        if number not in chosen:
            chosen[number] = (hall, sgt)
        elif choice == "2" and chosen[number][1].choice == "1":
            chosen[number] = (hall, sgt)
    return chosen


def fmt_frac(x):
    f = Fraction(x).limit_denominator(24)
    if abs(float(f) - x) > 1e-9:
        raise ValueError(f"translation {x} is not a multiple of 1/24")
    f = f - (f.numerator // f.denominator)
    return f"{f.numerator}/{f.denominator}"


def main():
    chosen = pick_hall_numbers()
    print("# symflow space-group operator table, format version 1")
    print(f"# generated by tools/gen_spacegroup_ops.py from spglib {spglib.__version__}")
    print("# block header: spacegroup <number> <op count> <hall number> <hall symbol>")
    print("# op line: r11 r12 r13 r21 r22 r23 r31 r32 r33 t1 t2 t3 (fractional basis)")
    for number in range(1, 231):
        hall, sgt = chosen[number]
        sym = spglib.get_symmetry_from_database(hall)
        rots, trans = sym["rotations"], sym["translations"]
        print(f"spacegroup {number} {len(rots)} {hall} {sgt.hall_symbol.replace(' ', '_')}")
        for r, t in zip(rots, trans):
            ints = " ".join(str(int(v)) for v in r.reshape(-1))
            fr = " ".join(fmt_frac(float(v)) for v in t)
            print(f"{ints} {fr}")


if __name__ == "__main__":
    main()
