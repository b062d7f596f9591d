"""
Outage probability
==================

The ZF post-processing SNR is Gamma(M - K + 1) distributed and the JML one
Gamma(M), so both outage curves are regularized incomplete gamma functions.
"""

import numpy as np

from noma_isac import SystemParams, analytic, dbm_to_watt, sim

rates = (5.0, 7.0, 9.0)
for point, dbm in enumerate(np.arange(-40, -15, 5)):
    p = SystemParams(P_com=dbm_to_watt(dbm))
    mc = sim.run_outage(p, rates, 200_000, seed=2, point=point)
    for C in rates:
        zf = analytic.outage_zf(p, 1, C)
        jml = analytic.outage_jml(p, 1, C)
        print(
            f"P_com {dbm:4d} dBm  C {C:g}  zf {zf:.3e} (mc {mc[('zf', 1, C)].probability:.3e})"
            f"  jml {jml:.3e} (mc {mc[('jml', 1, C)].probability:.3e})"
        )
