"""Print the gas property closures over a temperature sweep.

Shows pure-gas viscosities, the Wilke mixture viscosity of a flue-gas-like
mixture and the WSGG emissivity of that mixture for a few path lengths.
"""
import numpy as np

from clinkercooler import thermo
from clinkercooler.thermo import DEFAULT_TABLE, P0

GAS = DEFAULT_TABLE.gas


def main():
    T = np.array([300.0, 600.0, 900.0, 1200.0, 1500.0])
    print("viscosity [1e-6 Pa s]")
    print(f"{'T[K]':>8}" + "".join(f"{s:>8}" for s in GAS.species))
    for t in T:
        print(f"{t:8.0f}" + "".join(f"{thermo.sutherland_viscosity(s, t) * 1e6:8.2f}"
                                    for s in GAS.species))

    x = GAS.vector({"N2": 0.72, "CO2": 0.12, "H2O": 0.10, "O2": 0.06})
    mu = thermo.mixture_viscosity(np.broadcast_to(x, (len(T), GAS.n)), T)
    print("\nmixture N2/CO2/H2O/O2 = 0.72/0.12/0.10/0.06")
    print(f"{'T[K]':>8}{'mu[1e-6]':>10}" + "".join(f"{'eps(' + str(L) + 'm)':>11}"
                                                   for L in (0.5, 1.5, 3.0)))
    for t, m in zip(T, mu):
        eps = [float(thermo.gas_emissivity(0.10, 0.12, t, P0, L)) for L in (0.5, 1.5, 3.0)]
        print(f"{t:8.0f}{m * 1e6:10.2f}" + "".join(f"{e:11.4f}" for e in eps))


if __name__ == "__main__":
    main()
