"""Driven plasmon coupled to N molecules: response r(omega_d), polarised
emission in the incoherent and coherent limits, and perturbative polariton
frequencies and linewidths.

Orientation and position averages are done in closed form: the collective
coupling is ``g_N^2 = N g^2 / 3`` and the s/p channel weights are the
coefficients returned by :func:`coupling_coefficients`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .molecular import (
    Channel,
    MolecularParams,
    Polarization,
    Spectrum,
    _comb_spectrum,
    absorption_A,
    fluorescence_weights,
)
from .optimize import local_maxima, refine_maximum
from .vibronic import LComb, PEFunction

DEFAULT_BETA = math.pi / 12


@dataclass(frozen=True)
class PlasmonParams:
    omega_c: float
    kappa: float
    kappa_ext: float
    kappa_o_T: float = 0.0
    kappa_o_R: float = 0.0
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")
        if not 0 <= self.kappa_ext <= self.kappa:
            raise ValueError("need 0 <= kappa_ext <= kappa")
        if not 0 <= self.beta < math.pi / 2:
            raise ValueError("beta must lie in [0, pi/2)")

    def at(self, omega_c: float) -> "PlasmonParams":
        return PlasmonParams(omega_c, self.kappa, self.kappa_ext, self.kappa_o_T,
                             self.kappa_o_R, self.beta)


@dataclass(frozen=True)
class CouplingCoefficients:
    C_s: float
    C_p: float
    C_tilde_s: float
    C_tilde_p: float


def ensemble_g_N(g: float, N: int) -> float:
    """Collective coupling ``g sqrt(N / 3)`` for randomly oriented dipoles."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return g * math.sqrt(N / 3)


def coupling_coefficients(kappa_m_out: float, g_N: float, beta: float,
                          N: int = 1) -> CouplingCoefficients:
    """Channel coefficients for one output channel (T or R)."""
    c_s = kappa_m_out * g_N**2 / 5
    return CouplingCoefficients(
        C_s=c_s,
        C_p=c_s * (2 - math.cos(2 * beta)),
        C_tilde_s=0.0,
        C_tilde_p=g_N * math.sqrt(N * kappa_m_out / 3) * math.sin(beta),
    )


@dataclass(frozen=True)
class PolaritonSystem:
    plasmon: PlasmonParams
    molecule: MolecularParams
    g_N: float
    N: int = 1

    def coefficients(self, channel: str = "T") -> CouplingCoefficients:
        k = self.molecule.kappa_m_T if channel == "T" else self.molecule.kappa_m_R
        return coupling_coefficients(k, self.g_N, self.plasmon.beta, self.N)

    def with_omega_c(self, omega_c: float) -> "PolaritonSystem":
        return PolaritonSystem(self.plasmon.at(omega_c), self.molecule, self.g_N, self.N)


def response_r(omega_d, plasmon: PlasmonParams, A_of_delta, g_N: float):
    """Elastic plasmon response

    ``r = sqrt(kappa_ext) / [i (omega_d - omega_c) - kappa / 2 + g_N^2 A(delta)]``.

    ``A_of_delta`` is A already evaluated at ``delta = omega_d - omega_m_tilde``.
    """
    wd = np.asarray(omega_d, dtype=float)
    bracket = 1j * (wd - plasmon.omega_c) - 0.5 * plasmon.kappa + g_N**2 * np.asarray(A_of_delta)
    return math.sqrt(plasmon.kappa_ext) / bracket


def system_response(omega_d, system: PolaritonSystem, pe: PEFunction):
    A = absorption_A(system.molecule.detuning(omega_d), pe, system.molecule.kappa_m)
    return response_r(omega_d, system.plasmon, A, system.g_N)


def response_map(omega_c_grid, omega_d_grid, system: PolaritonSystem, pe: PEFunction):
    """``|r(omega_d)|^2`` on a (omega_c, omega_d) grid; rows follow ``omega_c``."""
    wc = np.asarray(omega_c_grid, dtype=float)
    wd = np.asarray(omega_d_grid, dtype=float)
    for g in (wc, wd):
        if len(g) > 1 and not np.all(np.diff(g) > 0):
            raise ValueError("grids must be strictly increasing")
    mol = system.molecule
    A = absorption_A(mol.detuning(wd), pe, mol.kappa_m)
    p = system.plasmon
    bracket = (1j * (wd[None, :] - wc[:, None]) - 0.5 * p.kappa
               + system.g_N**2 * A[None, :])
    return p.kappa_ext / np.abs(bracket) ** 2


def _emission(omega_d, system, pe, l_comb, alpha, coherent):
    mol = system.molecule
    delta = float(mol.detuning(omega_d))
    A = complex(absorption_A(delta, pe, mol.kappa_m))
    r = complex(response_r(omega_d, system.plasmon, A, system.g_N))
    m_min, f = fluorescence_weights(delta, l_comb, mol.kappa_m)
    f0 = f[-m_min] if 0 <= -m_min < len(f) else 0.0
    amp2 = abs(alpha * r) ** 2
    co = system.coefficients("T")
    k_o = system.plasmon.kappa_o_T
    if coherent:
        f_el = f0 - abs(A) ** 2
        p_direct = k_o * abs(1 + 1j * co.C_tilde_p / math.sqrt(k_o) * A) ** 2 if k_o > 0 \
            else abs(co.C_tilde_p * A) ** 2
    else:
        f_el = f0
        p_direct = k_o
    spacing = l_comb.spacing
    s = _comb_spectrum(omega_d, amp2 * co.C_s * f_el, spacing, m_min, amp2 * co.C_s * f,
                       Channel.T, Polarization.S)
    p = _comb_spectrum(omega_d, amp2 * (p_direct + co.C_p * f_el), spacing, m_min,
                       amp2 * co.C_p * f, Channel.T, Polarization.P)
    return {"s": s, "p": p}


def emission_spectra_incoherent(omega_d: float, system: PolaritonSystem, pe: PEFunction,
                                l_comb: LComb, alpha: complex = 1.0) -> dict[str, Spectrum]:
    """Transmitted s/p spectra for randomly placed molecules.

    ``S_s = |alpha r|^2 C_s F`` and ``S_p = |alpha r|^2 (kappa_o^T delta + C_p F)``.
    """
    return _emission(omega_d, system, pe, l_comb, alpha, coherent=False)


def emission_spectra_coherent(omega_d: float, system: PolaritonSystem, pe: PEFunction,
                              l_comb: LComb, alpha: complex = 1.0) -> dict[str, Spectrum]:
    """Transmitted s/p spectra when the plasmon drives all molecules in phase.

    The incoherent elastic ``|A|^2`` part of F is removed and the p channel
    gains the interference term ``kappa_o |1 + i C~_p A / sqrt(kappa_o)|^2``.
    """
    return _emission(omega_d, system, pe, l_comb, alpha, coherent=True)


def elastic_emission_curves(omega_d_grid, system: PolaritonSystem, pe: PEFunction,
                            l_comb: LComb, coherent: bool = False, alpha: complex = 1.0):
    """Elastic s and p weights over a drive grid (vectorised)."""
    mol = system.molecule
    wd = np.asarray(omega_d_grid, dtype=float)
    delta = mol.detuning(wd)
    A = absorption_A(delta, pe, mol.kappa_m)
    r = response_r(wd, system.plasmon, A, system.g_N)
    m_min, f = fluorescence_weights(delta, l_comb, mol.kappa_m)
    f0 = f[:, -m_min]
    amp2 = np.abs(alpha * r) ** 2
    co = system.coefficients("T")
    k_o = system.plasmon.kappa_o_T
    if coherent:
        f_el = f0 - np.abs(A) ** 2
        if k_o > 0:
            direct = k_o * np.abs(1 + 1j * co.C_tilde_p / math.sqrt(k_o) * A) ** 2
        else:
            direct = np.abs(co.C_tilde_p * A) ** 2
    else:
        f_el = f0
        direct = k_o
    return amp2 * co.C_s * f_el, amp2 * (direct + co.C_p * f_el)


def _check_regime(g_N, omega_v):
    if abs(g_N - omega_v) <= 1e-12 * omega_v:
        raise ValueError("g_N = omega_v is singular; the expansion needs g_N > omega_v")
    if g_N < omega_v:
        warnings.warn("perturbative polariton formulas assume g_N > omega_v", stacklevel=3)


def polariton_frequencies_perturbative(omega_m, g_N, S, omega_v):
    """``omega_pm = omega_m +- g_N + (S omega_v / 2) / (+-g_N / omega_v - 1)``."""
    _check_regime(g_N, omega_v)
    shift = 0.5 * S * omega_v
    plus = omega_m + g_N + shift / (g_N / omega_v - 1)
    minus = omega_m - g_N + shift / (-g_N / omega_v - 1)
    return plus, minus


def polariton_linewidths_perturbative(kappa, kappa_m, S, omega_v, g_N):
    """First-order-in-kappa_m linewidths ``(Gamma_+, Gamma_-)``."""
    _check_regime(g_N, omega_v)
    out = []
    for sgn in (+1, -1):
        d = g_N - sgn * omega_v
        out.append(0.5 * kappa + 0.5 * kappa_m * (1 + S * omega_v**2 / d**2
                                                  + S * omega_v**2 / (g_N * d)))
    return tuple(out)


def response_peaks(omega_d_grid, system: PolaritonSystem, pe: PEFunction):
    """Local maxima of ``|r|^2`` refined by golden-section search.

    Returns ``(positions, heights)`` sorted by frequency.
    """
    wd = np.asarray(omega_d_grid, dtype=float)
    r2 = np.abs(system_response(wd, system, pe)) ** 2
    f = lambda w: float(np.abs(system_response(w, system, pe)) ** 2)
    pos, hts = [], []
    for i in local_maxima(r2):
        x, y = refine_maximum(f, wd, i)
        pos.append(x)
        hts.append(y)
    return np.array(pos), np.array(hts)


def nearest_peak(positions, heights, target):
    i = int(np.argmin(np.abs(np.asarray(positions) - target)))
    return positions[i], heights[i]
