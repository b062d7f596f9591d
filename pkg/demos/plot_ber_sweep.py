"""
BER of the ZF and JML receivers
===============================

Monte Carlo against the semi-analytic ZF curve and both union bounds, at
the default geometry (d1 = 50 m, d2 = 60 m, alpha = 3.5).
"""

from noma_isac import SystemParams, analytic, dbm_to_watt, sim

trials = 50_000
print(f"{'P_com':>6} {'ue':>2} {'mc zf':>10} {'semi zf':>10} {'bound zf':>10} {'mc jml':>10} {'bound jml':>10}")
for point, dbm in enumerate((-36, -32, -28, -24)):
    p = SystemParams(P_com=dbm_to_watt(dbm))
    res = sim.run_ber(p, trials, seed=1, point=point)
    for ue in (1, 2):
        print(
            f"{dbm:6d} {ue:2d} {res[('zf', ue)].ber:10.3e} {analytic.semi_analytic_ber_zf(p, ue):10.3e}"
            f" {analytic.upper_ber_zf(p, ue).clamped:10.3e} {res[('jml', ue)].ber:10.3e}"
            f" {analytic.upper_ber_jml(p, ue).clamped:10.3e}"
        )

###############################################################################
# The JML bound sums 128 x 256 pairwise terms but only a few hundred
# distinct distances occur, so it is evaluated over the grouped table.
table = analytic.jml_eta_table(SystemParams(), 1)
print(len(table), "distinct terms covering", sum(n for _, n in table), "pairs")
