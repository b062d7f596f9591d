"""
Conditional BER for a fixed noise power
=======================================

For a given post-ZF noise power the MSB error probability is an integral of
the Gaussian density over the wrong half of the decision plane. Three
independent evaluations: the region-by-region closed form, a row-exact
grid oracle and plain Monte Carlo.
"""

from noma_isac import analytic, sim

for P_N in (0.02, 0.1, 0.5, 2.0):
    exact = analytic.conditional_ber_zf(P_N)
    oracle = analytic.conditional_ber_oracle(P_N)
    errors, n = sim.conditional_ber_mc(P_N, 1_000_000, seed=4)
    print(f"P_N {P_N:5.2f}  formula {exact:.6f}  grid {oracle:.6f}  mc {errors / n:.6f}")

###############################################################################
# Averaging over the Gamma law of the ZF noise enhancement gives the
# semi-analytic BER.
from noma_isac import SystemParams, dbm_to_watt

p = SystemParams(P_com=dbm_to_watt(-28))
print("semi-analytic BER, UE1:", analytic.semi_analytic_ber_zf(p, 1))
