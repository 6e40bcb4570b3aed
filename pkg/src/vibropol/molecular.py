"""Bare-molecule response: chi, absorption kernel A, fluorescence comb F, and
the driven-molecule (Stokes shift) spectra in the incoherent and coherent
limits.

The molecule is driven at ``omega_d`` with total input power ``|alpha|^2``;
``delta = omega_d - omega_m_tilde`` throughout.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .vibronic import LComb, PEComb, PEFunction, PESampled

PRUNE_RELATIVE = 1e-14


class Channel(str, enum.Enum):
    T = "T"
    R = "R"


class Polarization(str, enum.Enum):
    S = "s"
    P = "p"
    UNPOLARIZED = "unpolarized"


@dataclass(frozen=True)
class MolecularParams:
    """Electronic transition and its couplings.

    ``vibration`` is a :class:`~vibropol.vibronic.VibronicParams` or a
    :class:`~vibropol.multimode.MultimodeParams`; it supplies the Stokes
    energy ``sum S_j omega_j`` and the damping ``sum gamma_j S_j``.
    """

    omega_m: float
    kappa_tilde: float
    kappa_m_ext: float
    kappa_m_T: float
    kappa_m_R: float
    vibration: object

    def __post_init__(self):
        for name in ("kappa_tilde", "kappa_m_ext", "kappa_m_T", "kappa_m_R"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.kappa_m > 0:
            raise ValueError("kappa_m = kappa_tilde + gamma*S must be > 0")
        if self.kappa_m_T + self.kappa_m_R > self.kappa_m * (1 + 1e-12):
            raise ValueError("kappa_m_T + kappa_m_R cannot exceed kappa_m")

    @property
    def kappa_m(self) -> float:
        return self.kappa_tilde + self.vibration.vibrational_damping

    @property
    def omega_m_tilde(self) -> float:
        return self.omega_m - self.vibration.reorganization_energy

    def detuning(self, omega_d):
        return np.asarray(omega_d) - self.omega_m_tilde

    @classmethod
    def with_total_linewidth(cls, omega_m, kappa_m, vibration, *, ext=0.0, T=0.0, R=0.0):
        """Build from the total ``kappa_m`` rather than the bare linewidth."""
        return cls(omega_m, kappa_m - vibration.vibrational_damping, ext, T, R, vibration)


@dataclass(frozen=True)
class FluorescenceComb:
    """``F(delta; omega - omega_d) = sum_m f_m delta(omega - omega_d - m * spacing)``."""

    delta: float
    spacing: float
    m_min: int
    weights: np.ndarray

    @property
    def ms(self) -> np.ndarray:
        return self.m_min + np.arange(len(self.weights))

    def weight(self, m: int) -> float:
        i = m - self.m_min
        return float(self.weights[i]) if 0 <= i < len(self.weights) else 0.0

    def total(self) -> float:
        return float(np.sum(self.weights))

    def peak_offset(self) -> int:
        return int(self.ms[np.argmax(self.weights)])

    def as_dict(self) -> dict[int, float]:
        return {int(m): float(w) for m, w in zip(self.ms, self.weights)}


@dataclass(frozen=True)
class Spectrum:
    """Output power spectral density for one drive frequency.

    ``elastic_weight`` multiplies ``delta(omega - omega_d)``. The inelastic
    part is a comb ``weights[i]`` at ``omega_d + (m_min + i) * spacing`` (its
    ``m = 0`` entry is always zero) and/or a sampled ``baseline`` on
    ``omega_grid``.
    """

    omega_d: float
    elastic_weight: float
    channel: Channel = Channel.T
    polarization: Polarization = Polarization.UNPOLARIZED
    spacing: float = 1.0
    m_min: int = 0
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    omega_grid: np.ndarray | None = None
    baseline: np.ndarray | None = None

    @property
    def ms(self) -> np.ndarray:
        return self.m_min + np.arange(len(self.weights))

    @property
    def frequencies(self) -> np.ndarray:
        return self.omega_d + self.ms * self.spacing

    def inelastic_power(self) -> float:
        total = float(np.sum(self.weights))
        if self.baseline is not None:
            total += float(np.trapezoid(self.baseline, self.omega_grid))
        return total

    def total_power(self) -> float:
        return self.elastic_weight + self.inelastic_power()

    def weight_at(self, m: int) -> float:
        if m == 0:
            return self.elastic_weight
        i = m - self.m_min
        return float(self.weights[i]) if 0 <= i < len(self.weights) else 0.0

    def rows(self):
        """(omega, is_elastic, weight) rows for CSV output."""
        out = [(self.omega_d, 1, self.elastic_weight)]
        out += [(float(w_), 0, float(v)) for w_, v, m in
                zip(self.frequencies, self.weights, self.ms) if m != 0]
        return out


def _comb_spectrum(omega_d, elastic, spacing, m_min, inelastic, channel, pol):
    inelastic = np.array(inelastic, dtype=float)
    if len(inelastic):
        i0 = -m_min
        if 0 <= i0 < len(inelastic):
            inelastic[i0] = 0.0
        peak = np.max(np.abs(inelastic))
        if peak > 0:
            inelastic[np.abs(inelastic) < PRUNE_RELATIVE * peak] = 0.0
        nz = np.nonzero(inelastic)[0]
        if len(nz):
            inelastic = inelastic[nz[0]: nz[-1] + 1]
            m_min += int(nz[0])
        else:
            inelastic, m_min = np.zeros(0), 0
    return Spectrum(float(omega_d), float(elastic), Channel(channel), Polarization(pol),
                    float(spacing), int(m_min), inelastic)


def chi(delta, kappa_m):
    """Bare Lorentzian response ``1 / (i delta - kappa_m / 2)``."""
    return 1.0 / (1j * np.asarray(delta) - 0.5 * kappa_m)


def absorption_A(delta, pe: PEFunction, kappa_m):
    """``A(delta) = int dE P(E) chi(delta - E)``; vectorised over ``delta``.

    Combs are summed exactly; sampled densities use the trapezoid rule on
    their grid (the zero-phonon bin then carries its full weight).
    """
    d = np.asarray(delta, dtype=float)
    if isinstance(pe, PEComb):
        e, w = pe.energies, pe.weights
        out = chi(d[..., None] - e, kappa_m) @ w
    elif isinstance(pe, PESampled):
        e, rho = pe.energies, pe.density
        wts = np.full(len(e), pe.de)
        wts[0] = wts[-1] = 0.5 * pe.de
        out = chi(d[..., None] - e, kappa_m) @ (rho * wts)
    else:
        raise TypeError(f"unsupported P(E) type {type(pe).__name__}")
    return out[()] if out.ndim == 0 else out


def fluorescence_weights(delta, l_comb: LComb, kappa_m):
    """Vectorised F comb: returns ``(m_min, weights)`` with
    ``weights.shape == delta.shape + (n_m,)``.

    ``f_m = sum_{m1 + m2 = -m} sum_{m3} L[m1, m2, m3] chi(m1 w_v - delta) chi(m3 w_v + delta)``.
    """
    d = np.atleast_1d(np.asarray(delta, dtype=float))
    wv = l_comb.spacing
    r1, r2, r3 = l_comb.index_ranges()
    x1 = chi(r1[None, :] * wv - d[:, None], kappa_m)        # (nd, n1)
    x3 = chi(r3[None, :] * wv + d[:, None], kappa_m)        # (nd, n3)
    g = np.einsum("ijk,dk->dij", l_comb.weights, x3)        # (nd, n1, n2)
    g *= x1[:, :, None]
    n1, n2 = len(r1), len(r2)
    # sum along anti-diagonals i + j = s
    s_idx = (np.arange(n1)[:, None] + np.arange(n2)[None, :]).ravel()
    sums = np.zeros((len(d), n1 + n2 - 1), dtype=complex)
    flat = g.reshape(len(d), -1)
    for row in range(len(d)):
        sums[row] = np.bincount(s_idx, weights=flat[row].real, minlength=n1 + n2 - 1) \
            + 1j * np.bincount(s_idx, weights=flat[row].imag, minlength=n1 + n2 - 1)
    # s = (m1 + m2) - (r1[0] + r2[0]); m = -(m1 + m2), so reverse order
    f = sums[:, ::-1]
    m_min = -(r1[-1] + r2[-1])
    scale = np.max(np.abs(f.real), axis=-1, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    if np.any(np.abs(f.imag) > 1e-8 * scale):
        raise ArithmeticError("F comb has a non-negligible imaginary part")
    w = f.real
    if np.any(w < -1e-9 * scale):
        raise ArithmeticError(
            "F comb has negative weights beyond tolerance; the L comb truncation is inconsistent"
        )
    w = np.clip(w, 0.0, None)
    if np.ndim(delta) == 0:
        w = w[0]
    return int(m_min), w


def fluorescence_comb(delta: float, l_comb: LComb, kappa_m: float) -> FluorescenceComb:
    """Fluorescence function F at one detuning as a comb in ``omega - omega_d``."""
    m_min, w = fluorescence_weights(float(delta), l_comb, kappa_m)
    nz = np.nonzero(w > PRUNE_RELATIVE * w.max())[0] if w.max() > 0 else np.array([0])
    lo, hi = nz[0], nz[-1]
    return FluorescenceComb(float(delta), l_comb.spacing, m_min + int(lo), w[lo:hi + 1].copy())


def _f_elastic_and_comb(params, l_comb, delta):
    if l_comb is None:
        raise ValueError("F needs an L comb (lossless vibrations only)")
    return fluorescence_comb(delta, l_comb, params.kappa_m)


def stokes_spectra_incoherent(params: MolecularParams, pe: PEFunction, l_comb: LComb,
                              omega_d: float, alpha: complex = 1.0) -> dict[str, Spectrum]:
    """Molecule-only output spectra with random drive phases.

    ``S^X / |alpha|^2 = kT_X k_ext F + [X == R] (1 + 2 sqrt(k_R k_ext) Re A) delta(omega - omega_d)``
    for ``X`` in ``T, R``.
    """
    a2 = abs(alpha) ** 2
    delta = float(params.detuning(omega_d))
    A = complex(absorption_A(delta, pe, params.kappa_m))
    F = _f_elastic_and_comb(params, l_comb, delta)
    out = {}
    for ch, k_out in (("T", params.kappa_m_T), ("R", params.kappa_m_R)):
        pref = a2 * k_out * params.kappa_m_ext
        elastic = pref * F.weight(0)
        if ch == "R":
            elastic += a2 * (1 + 2 * np.sqrt(k_out * params.kappa_m_ext) * A.real)
        out[ch] = _comb_spectrum(omega_d, elastic, F.spacing, F.m_min, pref * F.weights,
                                 ch, Polarization.UNPOLARIZED)
    return out


def stokes_spectra_coherent(params: MolecularParams, pe: PEFunction, l_comb: LComb,
                            omega_d: float, alpha: complex = 1.0, N: int = 1) -> dict[str, Spectrum]:
    """Molecule-only output spectra with a common drive phase on ``N`` molecules."""
    if N < 1:
        raise ValueError("N must be >= 1")
    a2 = abs(alpha) ** 2
    delta = float(params.detuning(omega_d))
    A = complex(absorption_A(delta, pe, params.kappa_m))
    F = _f_elastic_and_comb(params, l_comb, delta)
    out = {}
    for ch, k_out in (("T", params.kappa_m_T), ("R", params.kappa_m_R)):
        pref = a2 * k_out * params.kappa_m_ext
        delta_T = 1.0 if ch == "T" else 0.0
        elastic = pref * (F.weight(0) / N + (delta_T - 1.0 / N) * abs(A) ** 2)
        if ch == "R":
            elastic += a2 * abs(1 + np.sqrt(k_out * params.kappa_m_ext) * A) ** 2
        out[ch] = _comb_spectrum(omega_d, elastic, F.spacing, F.m_min, pref * F.weights / N,
                                 ch, Polarization.UNPOLARIZED)
    return out


def absorption_spectrum(params: MolecularParams, pe: PEFunction, l_comb: LComb | None,
                        omega_d, alpha: complex = 1.0, coherent_N: int | None = None):
    """Absorbed power ``S^A = I_in - S^T - S^R`` (total output powers).

    Vectorised over ``omega_d``. Without an L comb the integrated
    fluorescence is replaced by ``-2 Re A / kappa_m``, which equals the full
    comb sum for any P(E).
    """
    a2 = abs(alpha) ** 2
    delta = params.detuning(omega_d)
    A = absorption_A(delta, pe, params.kappa_m)
    if l_comb is None:
        f_total = -2 * np.real(A) / params.kappa_m
    else:
        _, w = fluorescence_weights(delta, l_comb, params.kappa_m)
        f_total = np.sum(w, axis=-1)
    kT, kR, ke = params.kappa_m_T, params.kappa_m_R, params.kappa_m_ext
    if coherent_N is None:
        out_T = kT * ke * f_total
        out_R = kR * ke * f_total + 1 + 2 * np.sqrt(kR * ke) * np.real(A)
    else:
        N = coherent_N
        absA2 = np.abs(A) ** 2
        out_T = kT * ke * (f_total / N + (1 - 1 / N) * absA2)
        out_R = kR * ke * (f_total - absA2) / N + np.abs(1 + np.sqrt(kR * ke) * A) ** 2
    s_a = a2 * (1 - out_T - out_R)
    if np.any(s_a < -1e-6 * a2):
        raise ArithmeticError("absorbed power is negative: output exceeds input")
    return s_a[()] if np.ndim(s_a) == 0 else s_a
