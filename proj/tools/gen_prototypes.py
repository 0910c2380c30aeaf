#!/usr/bin/env python3
"""Regenerate the bundled prototype CIFs under data/prototypes/.

Each prototype is given by its space group, conventional cell parameters and
asymmetric unit; the full conventional cell is expanded with the operator
table in data/spacegroup_ops.txt and written as a P1 atom listing.

Usage: python3 tools/gen_prototypes.py
"""
from fractions import Fraction
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
THIRD, TWO_THIRDS = "0.3333333333333333", "0.6666666666666666"

# name, sg, (a, b, c, alpha, beta, gamma), [(symbol, x, y, z)], training
PROTOTYPES = [
    ("rocksalt_NaCl", 225, (5.640, 5.640, 5.640, 90, 90, 90),
     [("Na", "0", "0", "0"), ("Cl", "0.5", "0.5", "0.5")], True),
    ("cesium_chloride_CsCl", 221, (4.123, 4.123, 4.123, 90, 90, 90),
     [("Cs", "0", "0", "0"), ("Cl", "0.5", "0.5", "0.5")], True),
    ("perovskite_SrTiO3", 221, (3.905, 3.905, 3.905, 90, 90, 90),
     [("Sr", "0", "0", "0"), ("Ti", "0.5", "0.5", "0.5"), ("O", "0.5", "0.5", "0")], True),
    ("fluorite_CaF2", 225, (5.463, 5.463, 5.463, 90, 90, 90),
     [("Ca", "0", "0", "0"), ("F", "0.25", "0.25", "0.25")], True),
    ("rutile_TiO2", 136, (4.594, 4.594, 2.959, 90, 90, 90),
     [("Ti", "0", "0", "0"), ("O", "0.3053", "0.3053", "0")], True),
    ("wurtzite_ZnO", 186, (3.250, 3.250, 5.207, 90, 90, 120),
     [("Zn", THIRD, TWO_THIRDS, "0"), ("O", THIRD, TWO_THIRDS, "0.382")], False),
]


def load_ops(sg):
    ops, lines = [], (ROOT / "data" / "spacegroup_ops.txt").read_text().splitlines()
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if parts and parts[0] == "spacegroup" and int(parts[1]) == sg:
            for line in lines[i + 1:i + 1 + int(parts[2])]:
                f = line.split()
                rot = np.array([int(v) for v in f[:9]]).reshape(3, 3)
                trans = np.array([float(Fraction(v)) for v in f[9:]])
                ops.append((rot, trans))
            return ops
        i += 1
    raise KeyError(sg)


def fmt(v):
    for text in ("0", "0.5", "0.25", "0.75", THIRD, TWO_THIRDS):
        if abs(v - float(text)) < 1e-12:
            return text
    return repr(float(v))


def expand(ops, site):
    x = np.array([float(c) for c in site[1:]])
    out = []
    for rot, trans in ops:
        y = (rot @ x + trans) % 1.0
        y[np.isclose(y, 1.0, atol=1e-12)] = 0.0
        d = [np.abs((y - o + 0.5) % 1.0 - 0.5).max() for o in out]
        if not d or min(d) > 1e-6:
            out.append(y)
    return sorted(out, key=tuple)


def main():
    index = ["# name sg file asymmetric_unit_size cell_atom_count training"]
    for name, sg, cell, sites, training in PROTOTYPES:
        ops = load_ops(sg)
        lines = [f"# space_group: {sg}", f"data_{name}"]
        for tag, v in zip(("length_a", "length_b", "length_c",
                           "angle_alpha", "angle_beta", "angle_gamma"), cell):
            lines.append(f"_cell_{tag} {v:.3f}")
        lines += ["loop_", "_atom_site_label", "_atom_site_type_symbol",
                  "_atom_site_fract_x", "_atom_site_fract_y", "_atom_site_fract_z"]
        count = 0
        for site in sites:
            for y in expand(ops, site):
                count += 1
                lines.append(f"{site[0]}{count} {site[0]} " + " ".join(fmt(c) for c in y))
        (ROOT / "data" / "prototypes" / f"{name}.cif").write_text("\n".join(lines) + "\n")
        index.append(f"{name} {sg} {name}.cif {len(sites)} {count} {'yes' if training else 'no'}")
    (ROOT / "data" / "prototypes" / "index.txt").write_text("\n".join(index) + "\n")


if __name__ == "__main__":
    main()
