"""Run the bundled reference cooler and print its steady axial profile.

Usage: python3 demos/reference_cooler.py [output_dir]
"""
import sys

import numpy as np

from clinkercooler import reference_scenario
from clinkercooler.simulation import export, run
from clinkercooler.thermo import SOLIDS

KELVIN = 273.15


def main(out=None):
    bundle = run(reference_scenario(), "steady")
    prof = bundle.model.segment_profiles(bundle.trajectory.x[-1], bundle.trajectory.y[-1])
    print(f"{'seg':>3} {'z[m]':>6} {'T_s[C]':>8} {'T_a[C]':>8} {'P[Pa]':>10}")
    for k, z in enumerate(prof["z"]):
        print(f"{k + 1:3d} {z:6.1f} {prof['T_s'][k] - KELVIN:8.1f} "
              f"{prof['T_a'][k] - KELVIN:8.1f} {prof['P'][k]:10.1f}")
    print(f"outlet clinker (extrapolated): {prof['T_out_extrapolated'] - KELVIN:.1f} degC")
    out_flow = prof["mass_flow"][-1]
    for name in ("C3S", "C2S", "CaO"):
        print(f"outflow {name}: {out_flow[SOLIDS.index(name)]:.4f} kg/s")
    st = bundle.meta.get("settling_s")
    if st and st["whole"] is not None:
        print(f"whole-cooler settling at 1 %: {st['whole'] / 60:.0f} min")
    print(f"wall time {bundle.meta['wall_time_s']:.1f} s")
    if out:
        for p in export(bundle, out):
            print("wrote", p)
    return prof


if __name__ == "__main__":
    np.set_printoptions(precision=3)
    main(sys.argv[1] if len(sys.argv) > 1 else None)
