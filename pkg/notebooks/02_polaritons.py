# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Vibronic polaritons
#
# A plasmon (kappa = 0.1) coupled to a vibronic molecule (S = 1, kT = 1,
# kappa_m = 0.5) with g_N = 2. We look at the |r|^2 map against the plasmon
# frequency, compare the peak positions with the perturbative formulas, and
# show the suppressed upper-polariton emission.

# %%
import math

import numpy as np

from vibropol import (
    MolecularParams,
    PlasmonParams,
    PolaritonSystem,
    VibronicParams,
    elastic_emission_curves,
    l_comb_gamma0,
    pe_function,
    polariton_frequencies_perturbative,
    polariton_linewidths_perturbative,
    response_map,
    response_peaks,
)

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

# %%
vib = VibronicParams(1.0, 0.0, 1.0, 1.0)
mol = MolecularParams.with_total_linewidth(10.0, 0.5, vib, T=0.5 / 3)
plasmon = PlasmonParams(10.0, 0.1, 0.05, kappa_o_T=0.05, beta=math.pi / 12)
system = PolaritonSystem(plasmon, mol, g_N=2.0)
pe, L = pe_function(vib), l_comb_gamma0(vib.huang_rhys, vib.n_th)

wc = np.linspace(7, 13, 61)
wd = np.linspace(6, 14, 1601)
rmap = response_map(wc, wd, system, pe)
print("map shape", rmap.shape, "max |r|^2", rmap.max())

# %% [markdown]
# ## Perturbative check at small S

# %%
for S in (0.05, 0.1, 0.2):
    v = VibronicParams(1.0, 0.0, S, 0.0)
    m = MolecularParams.with_total_linewidth(10.0, 0.5, v)
    sys_ = PolaritonSystem(PlasmonParams(10.0, 0.1, 0.05), m, 2.0)
    pos, _ = response_peaks(np.linspace(6, 14, 8001), sys_, pe_function(v))
    wp, wm = polariton_frequencies_perturbative(10.0, 2.0, S, 1.0)
    gp, gm = polariton_linewidths_perturbative(0.1, 0.5, S, 1.0, 2.0)
    print(f"S={S}: numeric {pos[0]:.4f} {pos[-1]:.4f}  perturbative {wm:.4f} {wp:.4f}  "
          f"widths {gm:.4f} {gp:.4f}")

# %% [markdown]
# ## Elastic emission along the drive axis

# %%
s_el, p_el = elastic_emission_curves(wd, system, pe, L)
lower = wd < 10
print(f"LP/UP peak ratio (s): {s_el[lower].max() / s_el[~lower].max():.2f}")
print(f"LP/UP peak ratio (p): {p_el[lower].max() / p_el[~lower].max():.2f}")

# %%
if plt is not None:
    fig, ax = plt.subplots(1, 2, figsize=(10, 4))
    ax[0].pcolormesh(wd, wc, rmap, shading="auto")
    ax[0].set(xlabel="omega_d", ylabel="omega_c")
    ax[1].semilogy(wd, s_el, label="s")
    ax[1].semilogy(wd, p_el, label="p")
    ax[1].set(xlabel="omega_d")
    ax[1].legend()
    fig.tight_layout()
