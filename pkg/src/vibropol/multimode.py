"""Several independent vibrational modes per molecule.

For diagonal, position-coupled modes the vibronic kernels factorise, so the
total P(E) and L are convolutions of the single-mode ones. Combs with
different spacings are placed on their common lattice, which requires the
spacing ratio to be rational.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy import signal

from .vibronic import (
    DEFAULT_EPSILON,
    LComb,
    PEComb,
    PEFunction,
    PESampled,
    VibrationModel,
    VibronicParams,
    l_comb_gamma0,
    pe_function,
)

COMMENSURATE_TOL = 1e-6
MAX_DENOMINATOR = 1000
L_PRUNE_RELATIVE = 1e-14
GRID_TOL = 1e-9


class IncommensurateError(ValueError):
    """Comb spacings have no common lattice within tolerance."""


@dataclass(frozen=True)
class MultimodeParams:
    """Ordered list of independent modes sharing one electronic transition."""

    modes: tuple[VibronicParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ValueError("at least one mode is required")
        for m in self.modes:
            if not isinstance(m, VibronicParams):
                raise TypeError("modes must be VibronicParams")

    @property
    def reorganization_energy(self) -> float:
        return sum(m.reorganization_energy for m in self.modes)

    @property
    def vibrational_damping(self) -> float:
        return sum(m.vibrational_damping for m in self.modes)

    def omega_m_tilde(self, omega_m: float) -> float:
        return omega_m - self.reorganization_energy

    def pe_function(self, epsilon: float = DEFAULT_EPSILON, **kwargs) -> PEFunction:
        return convolve_pe([pe_function(m, epsilon=epsilon, **kwargs) for m in self.modes])

    def l_comb(self, epsilon: float = DEFAULT_EPSILON) -> LComb:
        for m in self.modes:
            if m.model is not VibrationModel.LOSSLESS and m.gamma != 0:
                raise ValueError("L combs exist only for lossless modes")
        return convolve_l([
            l_comb_gamma0(m.huang_rhys, m.n_th, epsilon=epsilon, omega_v=m.omega_v)
            for m in self.modes
        ])


def common_spacing(a: float, b: float) -> tuple[float, int, int]:
    """Lattice ``u`` with ``a = p u`` and ``b = q u``; returns ``(u, p, q)``."""
    if a <= 0 or b <= 0:
        raise ValueError("spacings must be positive")
    ratio = a / b
    frac = Fraction(ratio).limit_denominator(MAX_DENOMINATOR)
    if abs(float(frac) - ratio) > COMMENSURATE_TOL * ratio:
        raise IncommensurateError(
            f"comb spacings {a!r} and {b!r} are not commensurate (ratio {ratio:.9g}); "
            "use sampled P(E) representations instead"
        )
    p, q = frac.numerator, frac.denominator
    return a / p, p, q


def _dilate(weights: np.ndarray, factor: int) -> np.ndarray:
    """Insert ``factor - 1`` zeros between entries along every axis."""
    if factor == 1:
        return weights
    shape = tuple((n - 1) * factor + 1 for n in weights.shape)
    out = np.zeros(shape, dtype=weights.dtype)
    out[tuple(slice(None, None, factor) for _ in shape)] = weights
    return out


def _convolve_combs(a: PEComb, b: PEComb) -> PEComb:
    u, p, q = common_spacing(a.spacing, b.spacing)
    w = np.convolve(_dilate(a.weights, p), _dilate(b.weights, q))
    return PEComb(u, a.k_min * p + b.k_min * q, w)


def _check_grid(s: PESampled, de: float):
    if abs(s.de - de) > GRID_TOL * de:
        return False
    off = s.e_min / de
    return abs(off - round(off)) < 1e-6


def _resample(s: PESampled, de: float) -> PESampled:
    """Linear resampling onto a grid of step ``de`` aligned with ``E = 0``.

    The zero-phonon spike is lifted out before interpolation and put back in
    the new ``E = 0`` bin.
    """
    e = s.energies
    raw = s.raw_density.copy()
    zi = s.zero_index()
    if zi is not None and s.zero_phonon_weight:
        raw[zi] -= s.zero_phonon_weight / s.de
    lo = math.ceil(e[0] / de - 1e-9)
    hi = math.floor(e[-1] / de + 1e-9)
    new_e = de * np.arange(lo, hi + 1)
    new = np.interp(new_e, e, raw)
    if zi is not None and s.zero_phonon_weight:
        new[-lo] += s.zero_phonon_weight / de
    return PESampled(lo * de, de, new, s.zero_phonon_weight)


def _convolve_sampled(a: PESampled, b: PESampled) -> PESampled:
    de = min(a.de, b.de)
    if not _check_grid(a, de):
        a = _resample(a, de)
    if not _check_grid(b, de):
        b = _resample(b, de)
    raw = signal.convolve(a.raw_density, b.raw_density, method="auto") * de
    return PESampled(a.e_min + b.e_min, de, raw, a.zero_phonon_weight * b.zero_phonon_weight)


def _convolve_mixed(comb: PEComb, s: PESampled) -> PESampled:
    """Comb lines become shifted copies of the sampled density.

    When the comb spacing is not a multiple of the sampling step, the sampled
    function is first resampled to ``spacing / ceil(spacing / de)``.
    """
    ratio = comb.spacing / s.de
    step = round(ratio)
    if step < 1 or abs(ratio - step) > COMMENSURATE_TOL * ratio:
        step = math.ceil(ratio)
        s = _resample(s, comb.spacing / step)
    elif not _check_grid(s, s.de):
        s = _resample(s, s.de)
    kernel = _dilate(comb.weights, step)
    raw = np.convolve(s.raw_density, kernel)
    e_min = s.e_min + comb.k_min * step * s.de
    zpl = s.zero_phonon_weight * comb.weight(0)
    return PESampled(e_min, s.de, raw, zpl)


def _convolve_pair(a: PEFunction, b: PEFunction) -> PEFunction:
    if isinstance(a, PEComb) and isinstance(b, PEComb):
        return _convolve_combs(a, b)
    if isinstance(a, PESampled) and isinstance(b, PESampled):
        return _convolve_sampled(a, b)
    if isinstance(a, PEComb):
        return _convolve_mixed(a, b)
    return _convolve_mixed(b, a)


def convolve_pe(pes) -> PEFunction:
    """Total P(E) of independent modes, ``P_1 * P_2 * ... * P_M``.

    Combs stay combs (on the common lattice); any sampled input makes the
    result sampled. Sampled inputs on different steps are linearly resampled
    to the finest step.
    """
    pes = list(pes)
    if not pes:
        raise ValueError("need at least one P(E)")
    return reduce(_convolve_pair, pes)


def _trim(weights: np.ndarray, offset):
    nz = np.nonzero(weights)
    if len(nz[0]) == 0:
        return np.zeros((1, 1, 1)), (0, 0, 0)
    lo = [int(ix.min()) for ix in nz]
    hi = [int(ix.max()) + 1 for ix in nz]
    sl = tuple(slice(l, h) for l, h in zip(lo, hi))
    return weights[sl], tuple(o + l for o, l in zip(offset, lo))


def _convolve_l_pair(a: LComb, b: LComb) -> LComb:
    u, p, q = common_spacing(a.spacing, b.spacing)
    w = signal.convolve(_dilate(a.weights, p), _dilate(b.weights, q), method="auto")
    peak = np.max(np.abs(w))
    if peak > 0:
        w[np.abs(w) < L_PRUNE_RELATIVE * peak] = 0.0
    offset = tuple(oa * p + ob * q for oa, ob in zip(a.offset, b.offset))
    w, offset = _trim(w, offset)
    # absolute tail errors add up to first order in the truncation
    err = (a.truncation_error * abs(b.total()) + b.truncation_error * abs(a.total())
           + L_PRUNE_RELATIVE * peak * w.size)
    return LComb(u, offset, w, err)


def convolve_l(l_combs) -> LComb:
    """Three-index discrete convolution of L combs, folded left to right.

    Entries below ``1e-14`` of the running maximum are dropped after each
    pairwise step.
    """
    l_combs = list(l_combs)
    if not l_combs:
        raise ValueError("need at least one L comb")
    return reduce(_convolve_l_pair, l_combs)
