r"""Vibrational kernels: J(t), P(t), P(E) and the four-point L comb.

All energies share one unit with :math:`\hbar = k_B = 1`. ``P(E)`` is the
probability density of handing energy ``E`` to the vibrations (``E > 0``) or
taking it from them (``E < 0``), normalised so that

.. math::
    P(E) = \frac{1}{2\pi} \int dt\, e^{iEt} P(t), \qquad P(t) = e^{J(t) - J(0)}.

Three vibration models are supported. ``LOSSLESS`` gives a delta comb with
Skellam weights, ``WHITE_NOISE`` and ``CALDEIRA_LEGGETT`` give sampled
densities obtained by FFT of ``P(t)``.
"""
from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-12
DEFAULT_CUTOFF_FACTOR = 50.0
DECAY_TOLERANCE = 1e-6
L_EPSILON_FLOOR = 1e-250
# below this S * n_th, skellam_comb convolves two Poisson laws
SMALL_ABSORPTION = 1e-4
QUAD_RTOL = 1e-8


class VibrationModel(str, enum.Enum):
    LOSSLESS = "lossless"
    WHITE_NOISE = "white_noise"
    CALDEIRA_LEGGETT = "caldeira_leggett"


class QuadratureError(RuntimeError):
    """Adaptive quadrature of the J(t) integrand did not converge."""

    def __init__(self, t, message):
        super().__init__(f"J(t) quadrature failed at t={t!r}: {message}")
        self.t = t


class InsufficientDecayError(ValueError):
    """P(t) has not relaxed to its long-time value at the edge of the grid."""

    def __init__(self, t_max, residual, required_t_max):
        super().__init__(
            f"|P(t_max) - P(inf)| = {residual:.3g} at t_max={t_max:.6g} exceeds "
            f"{DECAY_TOLERANCE:g}; use a time grid reaching at least "
            f"t_max ~ {required_t_max:.6g}"
        )
        self.t_max = t_max
        self.required_t_max = required_t_max


class TruncationError(ValueError):
    """Index truncation of the L comb lost too much weight."""


@dataclass(frozen=True)
class VibronicParams:
    """One vibrational mode coupled to the molecular transition.

    Parameters
    ----------
    omega_v : float
        Vibration frequency, > 0.
    gamma : float
        Vibrational linewidth, >= 0. Must be exactly 0 for ``LOSSLESS``.
    huang_rhys : float
        Huang-Rhys factor S, >= 0.
    kT : float
        Bath temperature in energy units, >= 0.
    model : VibrationModel
    uv_cutoff : float, optional
        Hard frequency cutoff for the Caldeira-Leggett integral. Defaults to
        ``50 * omega_v``. J(0) grows logarithmically with it.
    """

    omega_v: float
    gamma: float = 0.0
    huang_rhys: float = 0.0
    kT: float = 0.0
    model: VibrationModel = VibrationModel.LOSSLESS
    uv_cutoff: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "model", VibrationModel(self.model))
        if not self.omega_v > 0:
            raise ValueError(f"omega_v must be > 0, got {self.omega_v}")
        if self.gamma < 0 or self.huang_rhys < 0 or self.kT < 0:
            raise ValueError("gamma, huang_rhys and kT must be >= 0")
        if self.model is VibrationModel.LOSSLESS and self.gamma != 0:
            raise ValueError("LOSSLESS vibrations require gamma == 0")
        if self.uv_cutoff is None:
            object.__setattr__(self, "uv_cutoff", DEFAULT_CUTOFF_FACTOR * self.omega_v)
        if not self.uv_cutoff > self.omega_v:
            raise ValueError("uv_cutoff must exceed omega_v")

    @property
    def n_th(self) -> float:
        return n_thermal(self.omega_v, self.kT)

    @property
    def reorganization_energy(self) -> float:
        """S * omega_v, the shift between omega_m and the zero-phonon line."""
        return self.huang_rhys * self.omega_v

    @property
    def vibrational_damping(self) -> float:
        """gamma * S, the vibrational contribution to kappa_m."""
        return self.gamma * self.huang_rhys


@dataclass(frozen=True)
class PEComb:
    """Delta comb ``P(E) = sum_k p_k delta(E - k * spacing)``.

    Weights are stored contiguously for ``k = k_min, k_min + 1, ...``.
    """

    spacing: float
    k_min: int
    weights: np.ndarray

    @property
    def ks(self) -> np.ndarray:
        return self.k_min + np.arange(len(self.weights))

    @property
    def energies(self) -> np.ndarray:
        return self.ks * self.spacing

    @property
    def k_max(self) -> int:
        return self.k_min + len(self.weights) - 1

    def total(self) -> float:
        return float(np.sum(self.weights))

    def weight(self, k: int) -> float:
        i = k - self.k_min
        if 0 <= i < len(self.weights):
            return float(self.weights[i])
        return 0.0

    def as_dict(self) -> dict[int, float]:
        return {int(k): float(p) for k, p in zip(self.ks, self.weights)}


@dataclass(frozen=True)
class PESampled:
    """Uniformly sampled density ``P(E_i)`` with ``E_i = e_min + i * de``.

    ``raw_density`` keeps the FFT output including tiny negative noise;
    :attr:`density` clamps it to zero. A zero-phonon delta line, when
    present, sits in the bin at ``E = 0`` with height ``weight / de``;
    ``zero_phonon_weight`` records that weight.
    """

    e_min: float
    de: float
    raw_density: np.ndarray
    zero_phonon_weight: float = 0.0

    @property
    def density(self) -> np.ndarray:
        return np.clip(self.raw_density, 0.0, None)

    @property
    def energies(self) -> np.ndarray:
        return self.e_min + self.de * np.arange(len(self.raw_density))

    def total(self) -> float:
        return float(self.de * np.sum(self.density))

    def zero_index(self) -> int | None:
        i = int(round(-self.e_min / self.de))
        if 0 <= i < len(self.raw_density) and abs(self.e_min + i * self.de) < 1e-9 * self.de:
            return i
        return None


PEFunction = PEComb | PESampled


@dataclass(frozen=True)
class JFunction:
    t_grid: np.ndarray
    values: np.ndarray
    j0: complex
    params: VibronicParams | None = field(default=None, compare=False)


@dataclass(frozen=True)
class LComb:
    """Net weights of the gamma = 0 L function on integer frequency triples.

    ``weights[i, j, l]`` is the coefficient of
    ``delta(w1 - m1 * spacing) delta(w2 - m2 * spacing) delta(w3 - m3 * spacing)``
    with ``(m1, m2, m3) = offset + (i, j, l)``. Weights may be negative.
    """

    spacing: float
    offset: tuple[int, int, int]
    weights: np.ndarray
    truncation_error: float = 0.0

    def total(self) -> float:
        return float(np.sum(self.weights))

    def index_ranges(self):
        return tuple(
            o + np.arange(n) for o, n in zip(self.offset, self.weights.shape)
        )

    def marginal(self, axis: int) -> PEComb:
        """Sum over the other two indices, keeping ``m_axis``."""
        others = tuple(a for a in range(3) if a != axis)
        return PEComb(self.spacing, self.offset[axis], self.weights.sum(axis=others))

    def as_dict(self) -> dict[tuple[int, int, int], float]:
        out = {}
        for idx in zip(*np.nonzero(self.weights)):
            m = tuple(int(o + i) for o, i in zip(self.offset, idx))
            out[m] = float(self.weights[idx])
        return out


def n_thermal(omega_v: float, kT: float) -> float:
    """Bose occupation ``1 / (exp(omega_v / kT) - 1)``; 0 at ``kT = 0``."""
    if kT == 0:
        return 0.0
    return float(1.0 / math.expm1(omega_v / kT))


def time_grid(t_max: float, dt: float) -> np.ndarray:
    """Odd-length grid ``-t_max..t_max`` with ``t = 0`` at the centre."""
    m = int(math.ceil(t_max / dt))
    return dt * np.arange(-m, m + 1)


# --- J(t) -----------------------------------------------------------------


def _j_closed_form(params: VibronicParams, t: np.ndarray) -> np.ndarray:
    S, wv, n = params.huang_rhys, params.omega_v, params.n_th
    env = np.exp(-0.5 * params.gamma * np.abs(t))
    return S * (n + 1) * np.exp(-1j * wv * t) * env + S * n * np.exp(1j * wv * t) * env


class _CLIntegrand:
    """Even and odd parts of the Caldeira-Leggett J(t) integrand on w >= 0.

    J(t) = (2 S gamma / pi omega_v) [ int_0^L even(w) cos(wt) - i int_0^L odd(w) sin(wt) ]
    with even = w^3 coth(w / 2kT) / D(w), odd = w^3 / D(w).
    """

    def __init__(self, params: VibronicParams):
        self.wv = params.omega_v
        self.g = params.gamma
        self.kT = params.kT
        self.cutoff = params.uv_cutoff
        self.prefactor = 2 * params.huang_rhys * params.gamma / (math.pi * params.omega_v)
        wv, g = self.wv, self.g
        pts = {0.0, wv, self.cutoff, max(0.0, wv - 20 * g), min(self.cutoff, wv + 20 * g)}
        pts = sorted(p for p in pts if 0 <= p <= self.cutoff)
        self.intervals = list(zip(pts[:-1], pts[1:]))

    def denominator(self, w):
        return (w * w - self.wv**2) ** 2 + (w * self.g) ** 2

    def even(self, w):
        if self.kT == 0:
            c = w
        else:
            # w * coth(w / 2kT) -> 2kT as w -> 0
            x = w / (2 * self.kT)
            c = w / math.tanh(x) if x > 1e-8 else 2 * self.kT
        return w * w * c / self.denominator(w)

    def odd(self, w):
        return w**3 / self.denominator(w)

    def _quad(self, f, t, weight, epsabs):
        total = 0.0
        for a, b in self.intervals:
            if weight is None:
                res = integrate.quad(f, a, b, epsrel=QUAD_RTOL, epsabs=epsabs,
                                     limit=2000, full_output=1)
            else:
                res = integrate.quad(f, a, b, weight=weight, wvar=t, epsrel=QUAD_RTOL,
                                     epsabs=epsabs, limit=2000, full_output=1)
            if len(res) > 3:
                raise QuadratureError(t, res[3])
            total += res[0]
        return total

    def j0(self):
        return self.prefactor * self._quad(self.even, 0.0, None, 0.0)

    def __call__(self, t, scale):
        if t == 0:
            return complex(self.j0())
        epsabs = 1e-10 * scale
        re = self._quad(self.even, t, "cos", epsabs)
        im = self._quad(self.odd, t, "sin", epsabs)
        return self.prefactor * complex(re, -im)


def _cl_chunk(params, ts, scale):
    f = _CLIntegrand(params)
    return [f(t, scale) for t in ts]


def j_function(params: VibronicParams, t_grid, workers: int = 1) -> JFunction:
    """Evaluate J(t) on ``t_grid`` for the model selected in ``params``.

    Lossless and white-noise models use their closed forms. The
    Caldeira-Leggett integral is evaluated by adaptive quadrature on
    ``0 <= w <= uv_cutoff`` (QAWO for the oscillatory factor); negative
    times use ``J(-t) = conj(J(t))``.

    Parameters
    ----------
    workers : int
        Processes used for the Caldeira-Leggett quadrature. The result does
        not depend on it.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if params.model is not VibrationModel.CALDEIRA_LEGGETT or params.huang_rhys == 0:
        if params.huang_rhys == 0:
            values = np.zeros(t_grid.shape, dtype=complex)
        else:
            values = _j_closed_form(params, t_grid)
        j0 = complex(params.huang_rhys * (2 * params.n_th + 1))
        return JFunction(t_grid, values, j0, params)

    integrand = _CLIntegrand(params)
    j0 = integrand.j0()
    abs_t = np.abs(t_grid)
    uniq, inverse = np.unique(abs_t, return_inverse=True)
    if workers > 1 and len(uniq) > 64:
        from concurrent.futures import ProcessPoolExecutor

        chunks = np.array_split(uniq, workers * 4)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = ex.map(_cl_chunk, [params] * len(chunks), chunks, [j0] * len(chunks))
            vals = np.concatenate([np.asarray(p, dtype=complex) for p in parts])
    else:
        vals = np.array([integrand(t, j0) for t in uniq], dtype=complex)
    values = vals[inverse]
    values = np.where(t_grid < 0, np.conj(values), values)
    return JFunction(t_grid, values, complex(j0), params)


# --- P(E) -----------------------------------------------------------------


def _check_symmetric(t):
    n = len(t)
    if n < 3:
        raise ValueError("time grid too short")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("time grid must be uniform")
    c = n // 2
    if abs(t[c]) > 1e-9 * dt:
        raise ValueError("time grid must have t = 0 at index len(t) // 2")
    return dt, c


def pe_from_j(j: JFunction) -> PESampled:
    """FFT ``P(t) = exp(J(t) - J(0))`` into a sampled density.

    The long-time limit ``P(inf) = exp(-J(0))`` (the zero-phonon line) is
    subtracted before the transform and returned as a single-bin spike at
    ``E = 0``. The remainder must have decayed below 1e-6 at the grid edges.
    """
    t = np.asarray(j.t_grid, dtype=float)
    dt, c = _check_symmetric(t)
    p_t = np.exp(j.values - j.j0)
    p_inf = complex(np.exp(-j.j0))
    resid = p_t - p_inf
    edge = max(abs(resid[0]), abs(resid[-1]))
    if edge > DECAY_TOLERANCE:
        t_max = float(t[-1])
        mid = abs(resid[c + (len(t) - c) // 2])
        if mid > edge:
            rate = math.log(mid / edge) / (t_max / 2)
            required = t_max + math.log(edge / DECAY_TOLERANCE) / rate
        else:
            required = 2 * t_max
        raise InsufficientDecayError(t_max, edge, required)

    n = len(t)
    spec = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(resid))) * n * dt / (2 * math.pi)
    de = 2 * math.pi / (n * dt)
    e = np.fft.fftshift(np.fft.fftfreq(n, dt)) * 2 * math.pi
    peak = np.max(np.abs(spec.real)) if n else 0.0
    imag = np.max(np.abs(spec.imag))
    scale = max(peak, abs(p_inf) / de)
    if imag > 1e-9 * scale:
        raise ValueError(f"P(E) has imaginary residue {imag:.3g} (max {scale:.3g})")
    density = spec.real.copy()
    zi = int(np.argmin(np.abs(e)))
    density[zi] += p_inf.real / de

    floor = -1e-9 * np.max(density)
    n_neg = int(np.sum(density < floor))
    if n_neg:
        warnings.warn(
            f"{n_neg} P(E) samples below the FFT noise floor (min "
            f"{density.min():.3g}); clamped to zero on read",
            RuntimeWarning,
            stacklevel=2,
        )
    return PESampled(float(e[0]), float(de), density, float(p_inf.real))


def auto_time_grid(params: VibronicParams, e_max: float | None = None) -> np.ndarray:
    """Time grid sized for :func:`pe_from_j` on a damped model."""
    if params.gamma <= 0:
        raise ValueError("sampled P(E) needs gamma > 0; use skellam_comb for gamma = 0")
    if e_max is None:
        e_max = params.uv_cutoff
    dt = math.pi / e_max
    amp = max(params.huang_rhys * (2 * params.n_th + 1), 1e-300)
    t_max = 2.0 / params.gamma * max(math.log(amp / 1e-8), 1.0)
    return time_grid(t_max, dt)


def skellam_comb(S: float, n_th: float, epsilon: float = DEFAULT_EPSILON,
                 omega_v: float = 1.0) -> PEComb:
    r"""Gamma = 0 P(E): Skellam weights

    .. math::
        p_k = e^{-S(2n+1)} (1 + 1/n)^{k/2} I_k(2S\sqrt{n(n+1)}),

    Poisson ``e^{-S} S^k / k!`` at ``n = 0``. Weights with
    ``p_k < epsilon * max p`` are dropped; no renormalisation.
    """
    if S < 0 or n_th < 0:
        raise ValueError("S and n_th must be >= 0")
    if S == 0:
        return PEComb(omega_v, 0, np.array([1.0]))
    sd = math.sqrt(S * (2 * n_th + 1))
    kmax = int(math.ceil(S + 12 * sd + 10 * math.log10(1 / epsilon) + 20))
    if n_th == 0:
        k = np.arange(0, kmax + 1)
        p = _poisson(S, k)
    elif S * n_th < SMALL_ABSORPTION:
        # the Bessel argument underflows; use the exact two-Poisson convolution
        up = _poisson(S * (n_th + 1), np.arange(0, kmax + 1))
        down = _poisson(S * n_th, np.arange(0, kmax + 1))
        p = np.convolve(up, down[::-1])
        k = np.arange(-kmax, kmax + 1)
    else:
        k = np.arange(-kmax, kmax + 1)
        x = 2 * S * math.sqrt(n_th * (n_th + 1))
        with np.errstate(divide="ignore", under="ignore"):
            logp = -S * (2 * n_th + 1) + x + 0.5 * k * math.log1p(1 / n_th) \
                + np.log(special.ive(np.abs(k), x))
        p = np.exp(logp)
    keep = np.nonzero(p >= epsilon * p.max())[0]
    lo, hi = keep[0], keep[-1]
    return PEComb(omega_v, int(k[lo]), p[lo:hi + 1].copy())


def _poisson(mean: float, k: np.ndarray) -> np.ndarray:
    return np.exp(-mean + k * math.log(mean) - special.gammaln(k + 1))


def pe_function(params: VibronicParams, epsilon: float = DEFAULT_EPSILON,
                t_grid=None, workers: int = 1) -> PEFunction:
    """P(E) for ``params``: a comb for gamma = 0, otherwise FFT-sampled."""
    if params.gamma == 0:
        return skellam_comb(params.huang_rhys, params.n_th, epsilon, params.omega_v)
    if t_grid is None:
        t_grid = auto_time_grid(params)
    return pe_from_j(j_function(params, t_grid, workers=workers))


def pe_moments(pe: PEFunction) -> tuple[float, float]:
    """Mean and variance of the energy distribution."""
    if isinstance(pe, PEComb):
        e, w = pe.energies, pe.weights
        norm = w.sum()
    else:
        e, w = pe.energies, pe.density
        norm = w.sum()
    mean = float(np.sum(w * e) / norm)
    var = float(np.sum(w * (e - mean) ** 2) / norm)
    return mean, var


def kms_violation(pe: PEFunction, kT: float) -> float:
    """Largest detailed-balance defect ``|P(-E) - exp(-E/kT) P(E)| / max P``.

    Only ``E > 0`` points with ``P(E) > 1e-8 max P`` are compared. For a
    sampled density the zero-phonon bin is left out of ``max P`` because its
    height scales with ``1 / de``.
    """
    if not kT > 0:
        raise ValueError("kms_violation needs kT > 0")
    if isinstance(pe, PEComb):
        ks = np.arange(1, max(pe.k_max, -pe.k_min) + 1)
        pos = np.array([pe.weight(k) for k in ks])
        neg = np.array([pe.weight(-k) for k in ks])
        energies = ks * pe.spacing
        pmax = pe.weights.max()
    else:
        d = pe.density
        zi = pe.zero_index()
        if zi is None:
            raise ValueError("sampled P(E) grid has no E = 0 point")
        m = min(zi, len(d) - 1 - zi)
        pos = d[zi + 1: zi + m + 1]
        neg = d[zi - 1: zi - m - 1 if zi - m - 1 >= 0 else None: -1]
        energies = pe.de * np.arange(1, m + 1)
        rest = np.delete(d, zi)
        pmax = rest.max() if rest.size else d.max()
    if pmax <= 0 or len(pos) == 0:
        return 0.0
    mask = pos > 1e-8 * pmax
    if not np.any(mask):
        return 0.0
    defect = np.abs(neg[mask] - np.exp(-energies[mask] / kT) * pos[mask])
    return float(defect.max() / pmax)


# --- L function -----------------------------------------------------------

# (m1, m2, m3) = (k1 + k3 + k4, k2 - k3 + k5, -(k2 + k4 + k6)); k1, k2 carry 1/P(t).
_L_DIRECTIONS = (
    ((1, 0, 0), True),
    ((0, 1, -1), True),
    ((1, -1, 0), False),
    ((1, 0, -1), False),
    ((0, 1, 0), False),
    ((0, 0, -1), False),
)


def _add_line(w, offset, line, k_min, direction):
    """Convolve a 3-D array with a 1-D measure laid along ``direction``."""
    k_max = k_min + len(line) - 1
    new_off = tuple(
        o + min(d * k_min, d * k_max) for o, d in zip(offset, direction)
    )
    new_shape = tuple(
        s + abs(d) * (k_max - k_min) for s, d in zip(w.shape, direction)
    )
    out = np.zeros(new_shape, dtype=float)
    for i, c in enumerate(line):
        if c == 0:
            continue
        k = k_min + i
        start = [o + d * k - no for o, d, no in zip(offset, direction, new_off)]
        sl = tuple(slice(s, s + n) for s, n in zip(start, w.shape))
        out[sl] += c * w
    return out, new_off


def l_comb_gamma0(S: float, n_th: float, epsilon: float = DEFAULT_EPSILON,
                  omega_v: float = 1.0, max_error: float = 1e-6) -> LComb:
    """Frequency-domain L function for lossless vibrations.

    The six-fold sum over Skellam indices is aggregated by six successive
    line convolutions on the integer lattice, two of them with the inverse
    weights ``(-1)^k exp(2S(2n+1)) p_k``. The result is identical to the
    term-by-term sum. ``truncation_error`` bounds the weight lost by
    dropping ``p_k < epsilon * max p``; ``epsilon`` is tightened by factors
    of 1e-3 until that bound is below ``max_error``.
    """
    if S == 0:
        return LComb(omega_v, (0, 0, 0), np.ones((1, 1, 1)))
    growth = math.exp(4 * S * (2 * n_th + 1))
    # inverse and forward weights cancel; float roundoff scales with the growth
    roundoff = growth * np.finfo(float).eps
    if roundoff > max_error:
        raise TruncationError(
            f"L comb loses precision to cancellation (~{roundoff:.1e}) for "
            f"S(2n+1) = {S * (2 * n_th + 1):.3g}; lossless L is limited to S(2n+1) below "
            f"~{math.log(max_error / np.finfo(float).eps) / 4:.2f}"
        )
    eps = epsilon
    while True:
        pe = skellam_comb(S, n_th, eps, omega_v)
        err = 6 * max(0.0, _skellam_tail(S, n_th, pe)) * growth + roundoff
        if err <= max_error:
            break
        if eps < L_EPSILON_FLOOR:
            raise TruncationError(
                f"L comb truncation error ~{err:.2e} exceeds {max_error:g} even at "
                f"epsilon={eps:g}; S(2n+1) = {S * (2 * n_th + 1):g} is too large"
            )
        eps *= 1e-3
    p = pe.weights
    ks = pe.ks
    q = np.where(ks % 2 == 0, 1.0, -1.0) * math.exp(2 * S * (2 * n_th + 1)) * p

    w = np.ones((1, 1, 1))
    off = (0, 0, 0)
    for direction, inverse in _L_DIRECTIONS:
        w, off = _add_line(w, off, q if inverse else p, pe.k_min, direction)
    w[np.abs(w) < 1e-300] = 0.0
    return LComb(omega_v, off, w, err)


def _skellam_tail(S, n_th, kept: PEComb) -> float:
    """Weight outside the retained index window."""
    wide = skellam_comb(S, n_th, 1e-300, kept.spacing)
    lo = kept.k_min - wide.k_min
    hi = lo + len(kept.weights)
    return float(np.sum(wide.weights[:lo]) + np.sum(wide.weights[hi:]))
