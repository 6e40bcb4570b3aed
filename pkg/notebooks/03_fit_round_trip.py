# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Fitting kappa_o^T / C_s from polarisation ratios
#
# A synthetic absorption band stands in for measured data. Its mirror image
# is the fluorescence proxy; the Hilbert transform gives the complex A. We
# calibrate g_N^2 to a Rabi splitting of 4, plant kappa_o^T / C_s = 3, add
# 1% noise to the lower-branch ratio curve and fit it back.

# %%
import numpy as np

from vibropol import fitting
from vibropol.molecular import absorption_A
from vibropol.polariton import PlasmonParams
from vibropol.vibronic import n_thermal, skellam_comb

# %%
S, km, wm = 0.5, 0.3, 10.0
wmt = wm - S
e = np.linspace(wmt - 15, wmt + 15, 6001)
A_model = absorption_A(e - wmt, skellam_comb(S, n_thermal(1.0, 0.5)), km)
absorption = fitting.ExperimentalSpectrum(e, -A_model.real, "absorption", "synthetic")
fluor = fitting.mirror_fluorescence(absorption, wmt)
plasmon = PlasmonParams(wm, 0.1, 0.05)

A = fitting.effective_A_from_absorption(absorption)
A = A.with_scale(fitting.calibrate_gN(A, plasmon, 4.0))
Fp = fitting.fluorescence_proxy(fluor, A)
print(f"g_N^2 scale = {A.scale:.4f}")

# %%
wc = np.linspace(wm - 3, wm + 1.5, 12)
truth = fitting.polarization_ratio_curve(plasmon, A, Fp, wc, "LP", 3.0).ratio
rng = np.random.default_rng(7)
data = fitting.ExperimentalSpectrum(wc, truth * (1 + 0.01 * rng.standard_normal(len(wc))),
                                    "polarization_ratio_LP")
curve = lambda rho, w: fitting.polarization_ratio_curve(plasmon, A, Fp, w, "LP", rho).ratio
res = fitting.fit_coupling_ratio(curve, data)
print(f"recovered {res.ratio_kappa_o_over_Cs:.4f}, residual {res.residual:.3g}, "
      f"converged {res.converged}")
for w, m, p in res.diagnostics:
    print(f"  omega_c = {w:6.3f}  measured {m:.4f}  model {p:.4f}")
