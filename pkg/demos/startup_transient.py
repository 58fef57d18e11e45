"""Start-up of the reference cooler: temperatures every 10 min and settling times."""
import numpy as np

from clinkercooler import reference_scenario
from clinkercooler.simulation import run

KELVIN = 273.15


def main():
    bundle = run(reference_scenario(), "dynamic")
    m, tr = bundle.model, bundle.trajectory
    print(f"{'t[min]':>7} {'T_s1[C]':>8} {'T_a1[C]':>8} {'T_s10[C]':>9} {'mass[t]':>8}")
    for t, x, y in zip(tr.times, tr.x, tr.y):
        if t % 600.0:
            continue
        p = m.segment_profiles(x, y)
        C_s = m.unpack(x, y)[0]
        mass = float(m.V @ (np.maximum(C_s, 0) @ m.solid.molar_mass)) / 1000.0
        print(f"{t / 60:7.0f} {p['T_s'][0] - KELVIN:8.1f} {p['T_a'][0] - KELVIN:8.1f} "
              f"{p['T_s'][-1] - KELVIN:9.1f} {mass:8.1f}")
    st = bundle.meta["settling_s"]
    segs = ", ".join("-" if s is None else f"{s / 60:.0f}" for s in st["segments"])
    print(f"settling at 1 % per segment [min]: {segs}")
    if st["whole"] is not None:
        print(f"whole cooler: {st['whole'] / 60:.0f} min")


if __name__ == "__main__":
    main()
