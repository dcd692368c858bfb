"""
How long can a finite bond dimension be trusted?
================================================

Truncation noise leaks into distances the physical signal has not reached.
Its ratio to the largest correlation, Q(tau), marks the end of the usable
time window once it exceeds 2e-4.
"""

import numpy as np

from bosecorr import analysis, convergence
from bosecorr.runner import run_simulation

# %%
# Two runs that differ only in the bond-dimension cap.
base = convergence.parameter_table(1.0, tau_end=2.0)
reports, tables = {}, {}
for chi in (16, 48):
    tables[chi] = run_simulation(base.with_(chi_max=chi), stop_on_q=convergence.Q_THRESHOLD).table
    reports[chi] = convergence.q_ratio(tables[chi])
    r = reports[chi]
    print(f"chi_max={chi:3d}: tau_max={r.tau_max:.2f} ({r.trigger}), Q at the end {r.Q[-1]:.1e}")
convergence.check_tau_max_monotone(reports)

# %%
# The cheaper run is compared against the better one up to its own tau_max.
# A very small cap can still pass the Q test while its CTD is already off by
# more than 0.5 %, which is why both checks are applied.
lo, hi = tables[16], tables[48]
first = convergence.compare_tables(lo, hi, t_max=reports[16].tau_max)
print(f"first 0.5% CTD disagreement before tau_max(16): {first}")

# %%
# Inside the trusted window the norm and normalised CTD are well defined.
conv = hi.window(0, reports[48].tau_max)
N, ell_n = analysis.compute_norm_and_normalized_ctd(conv, reports[48].sigma.max())
for k in range(0, len(conv.tau), 8):
    print(f"tau={conv.tau[k]:.2f}  N={N[k]:.4f}  ell_N={ell_n[k]:.4f}")
