# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # A single vibronic molecule
#
# Phonon weights P(E) for a lossless mode at S = 2, kT = 0.5 (units of
# omega_v), then the absorption and emission of a molecule with
# kappa_m = 0.5 driven at the relaxed frequency. Figures are drawn when
# matplotlib is installed; otherwise the numbers are printed.

# %%
import numpy as np

from vibropol import (
    MolecularParams,
    VibronicParams,
    absorption_spectrum,
    l_comb_gamma0,
    pe_function,
    pe_moments,
    stokes_spectra_incoherent,
)

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

# %%
vib = VibronicParams(omega_v=1.0, gamma=0.0, huang_rhys=2.0, kT=0.5)
pe = pe_function(vib)
mean, var = pe_moments(pe)
print(f"n_th = {vib.n_th:.4f}, mean = {mean:.6f}, variance = {var:.6f}")
for k, w in zip(pe.ks, pe.weights):
    if w > 1e-4:
        print(f"  k = {k:+d}  {w:.5f}")

# %% [markdown]
# The anti-Stokes side (k < 0) is suppressed by exp(-omega_v/kT) relative to
# its mirror image, as detailed balance requires.

# %%
km = 0.5
mol = MolecularParams.with_total_linewidth(10.0, km, vib, ext=km / 10, T=km / 10, R=km / 10)
L = l_comb_gamma0(vib.huang_rhys, vib.n_th)
wd = np.linspace(5, 15, 1001)
s_abs = absorption_spectrum(mol, pe, L, wd)
spec = stokes_spectra_incoherent(mol, pe, L, mol.omega_m_tilde)["T"]
print(f"absorption maximum at {wd[np.argmax(s_abs)]:.3f}")
print(f"elastic weight {spec.elastic_weight:.4g}")
i = np.argmax(spec.weights)
print(f"inelastic maximum at omega = {spec.frequencies[i]:.3f}")

# %%
if plt is not None:
    fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
    ax[0].bar(pe.energies, pe.weights, width=0.3)
    ax[0].set(xlabel="E / omega_v", ylabel="P(E) weight")
    ax[1].plot(wd, s_abs / s_abs.max(), label="absorption")
    ax[1].vlines(spec.frequencies, 0, spec.weights / spec.weights.max(), color="C1",
                 label="emission (T)")
    ax[1].set(xlabel="omega", xlim=(5, 15))
    ax[1].legend()
    fig.tight_layout()
