"""
Correlation fronts in the two integrable limits
===============================================

Both limits have closed forms, so the whole analysis chain can be run
without the engine: tabulate G_d(tau), find the fronts, fit their speed
and amplitude decay, and watch the CTD exponent creep toward one.
"""

import numpy as np

from bosecorr import analysis, oracles
from bosecorr.table import table_from_grid

# %%
# Free bosons (gamma -> infinity) and hard-core doublon-holon pairs
# (gamma -> 0). The strong-coupling limit keeps gamma as an amplitude scale.
limits = {"gamma -> inf": oracles.GAMMA_INF, "gamma -> 0": oracles.gamma_to_zero(0.0063)}
tau = np.round(np.arange(0, 10.0001, 0.01), 10)
d = np.arange(1, 41)

for name, limit in limits.items():
    table = table_from_grid(tau, oracles.correlation_grid(limit, tau, d))
    front = analysis.detect_front(table)
    vel = analysis.fit_front_velocity(front)
    dec = analysis.fit_front_decay(front)
    print(f"{name}: {len(front)} visible fronts")
    print(f"  v_cf = {vel.params['v']:.3f} +- {vel.stderr['v']:.3f} over d in {vel.window}"
          f" (asymptote {oracles.asymptotic_front_velocity(limit):g})")
    print(f"  eta  = {dec.params['eta']:.3f} (large-d value {oracles.front_decay_reference(limit):.3f})")
    # the Airy estimate of tau_d improves as d grows
    for k in (5, 20, 35):
        i = front.at(k)
        print(f"  d={k:2d}: tau_d = {front.tau[i]:.3f}, Airy estimate {oracles.front_time(limit, k):.3f}")

# %%
# CTD growth. The free limit is ballistic from the start; the strong-coupling
# limit approaches beta = 1 only slowly as the fit window grows.
lz = limits["gamma -> 0"]
t_long = np.round(np.arange(0, 50.0001, 0.05), 10)
ell = oracles.ctd_closed_form(lz, t_long)
for t_end in (5.5, 10, 20, 50):
    fit = analysis.fit_power_law(t_long, ell, (2.2, t_end))
    print(f"gamma -> 0, window [2.2, {t_end:g}]: beta = {fit.params['beta']:.4f}")
t_inf = np.round(np.arange(0, 3.9001, 0.05), 10)
fit = analysis.fit_power_law(t_inf, oracles.ctd_closed_form(oracles.GAMMA_INF, t_inf), (2.2, 3.9))
print(f"gamma -> inf, window [2.2, 3.9]: beta = {fit.params['beta']:.4f}")

# %%
# The norm sum_d G_d saturates: to 1 in the free limit, to 8 gamma^2 in the
# strong-coupling limit.
for t in (1.0, 5.0, 10.0, 40.0):
    print(f"tau={t:4.0f}: N_inf = {oracles.norm_closed_form(oracles.GAMMA_INF, t):.4f}, "
          f"N_0 / 8 gamma^2 = {oracles.norm_closed_form(lz, t) / (8 * 0.0063 ** 2):.4f}")
