"""Vibronic response of molecules coupled to a surface plasmon.

Vibrations enter through the correlation function J(t), its Franck-Condon
distribution P(E) and, for undamped modes, the three-frequency comb L that
fixes the fluorescence. These feed the bare-molecule absorption and Stokes
spectra and the polarised emission of the plasmon-molecule system.
"""
from .molecular import (
    Channel,
    MolecularParams,
    Polarization,
    Spectrum,
    absorption_A,
    absorption_spectrum,
    chi,
    fluorescence_comb,
    stokes_spectra_coherent,
    stokes_spectra_incoherent,
)
from .multimode import MultimodeParams, convolve_l, convolve_pe
from .polariton import (
    PlasmonParams,
    PolaritonSystem,
    coupling_coefficients,
    elastic_emission_curves,
    emission_spectra_coherent,
    emission_spectra_incoherent,
    ensemble_g_N,
    polariton_frequencies_perturbative,
    polariton_linewidths_perturbative,
    response_map,
    response_peaks,
    response_r,
)
from .validity import consistency_parameter, validity_report
from .vibronic import (
    LComb,
    PEComb,
    PESampled,
    VibrationModel,
    VibronicParams,
    j_function,
    kms_violation,
    l_comb_gamma0,
    pe_from_j,
    pe_function,
    pe_moments,
    skellam_comb,
)

__version__ = "0.1.0"
