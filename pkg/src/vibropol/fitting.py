"""Comparison with measured spectra.

Measured absorption gives Re A up to a scale; Im A follows from the
Kramers-Kronig relation (A is analytic in the upper half plane of the
detuning). The scale of ``g_N^2 A`` is then fixed by a target Rabi
splitting, and the plasmon-to-molecule coupling ratio ``kappa_o^T / C_s``
is fitted to measured polarisation ratios of one polariton branch.

Energies in this module are whatever the input files use (eV for the
bundled presets); no unit conversion is done.
"""
from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, signal

from .molecular import Spectrum
from .optimize import golden_section_min, local_maxima, refine_maximum
from .polariton import PlasmonParams

HILBERT_PAD_FACTOR = 8
EDGE_WARN_FRACTION = 0.05
BRACKET_DOUBLINGS = 20
LOG_RATIO_BOUNDS = (math.log(1e-6), math.log(1e6))


class SpectrumKind(str, enum.Enum):
    ABSORPTION = "absorption"
    FLUORESCENCE = "fluorescence"
    RATIO_LP = "polarization_ratio_LP"
    RATIO_UP = "polarization_ratio_UP"


class Branch(str, enum.Enum):
    LP = "LP"
    UP = "UP"


@dataclass(frozen=True)
class ExperimentalSpectrum:
    energies: np.ndarray
    intensities: np.ndarray
    kind: SpectrumKind
    label: str = ""

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        y = np.asarray(self.intensities, dtype=float)
        if e.shape != y.shape or e.ndim != 1:
            raise ValueError("energies and intensities must be 1-D arrays of equal length")
        if len(e) > 1 and not np.all(np.diff(e) > 0):
            raise ValueError("energies must be strictly increasing")
        if not np.all(np.isfinite(y)):
            raise ValueError("intensities must be finite")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "intensities", y)
        object.__setattr__(self, "kind", SpectrumKind(self.kind))

    @classmethod
    def from_points(cls, points, kind, label=""):
        """Build from ``(energy, value)`` pairs, sorting them if needed."""
        arr = np.asarray(points, dtype=float).reshape(-1, 2)
        e, y = arr[:, 0], arr[:, 1]
        if len(e) > 1 and not np.all(np.diff(e) > 0):
            warnings.warn(f"{label or 'spectrum'}: energies not increasing; sorting",
                          stacklevel=2)
            order = np.argsort(e, kind="stable")
            e, y = e[order], y[order]
            if np.any(np.diff(e) == 0):
                raise ValueError("duplicate energies in spectrum")
        return cls(e, y, kind, label)


def read_spectrum_csv(path, kind, label: str | None = None) -> ExperimentalSpectrum:
    """Two-column CSV (energy, value); an optional header row is skipped."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            row = [c.strip() for c in row if c.strip()]
            if not row or row[0].startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ValueError(f"{path}:{i + 1}: cannot parse row {row!r}") from None
                # header row
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return ExperimentalSpectrum.from_points(rows, kind, label or path.stem)


@dataclass(frozen=True)
class EffectiveA:
    """Unit-normalised complex A on an energy grid.

    ``values`` has peak ``|Re A| = 1``; ``scale`` (set by calibration)
    multiplies it to give ``g_N^2 A``. Outside the grid A is taken as 0.
    """

    energies: np.ndarray
    values: np.ndarray
    scale: float | None = None
    diagnostics: tuple[str, ...] = ()

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        re = np.interp(w, self.energies, self.values.real, left=0.0, right=0.0)
        im = np.interp(w, self.energies, self.values.imag, left=0.0, right=0.0)
        return re + 1j * im

    def coupled(self, omega, scale: float | None = None):
        s = self.scale if scale is None else scale
        if s is None:
            raise ValueError("A is not calibrated; pass a scale or run calibrate_gN")
        return s * self(omega)

    def with_scale(self, scale: float) -> "EffectiveA":
        return EffectiveA(self.energies, self.values, float(scale), self.diagnostics)


def hilbert_imag(re_part, pad_factor: int = HILBERT_PAD_FACTOR) -> np.ndarray:
    """Im A from Re A on a uniform grid via the FFT analytic signal.

    The record is centred in a zero-padded buffer ``pad_factor`` times its
    length so the periodic transform does not wrap the slow tails.
    """
    x = np.asarray(re_part, dtype=float)
    n = len(x)
    total = pad_factor * n
    left = (total - n) // 2
    buf = np.zeros(total)
    buf[left:left + n] = x
    return np.imag(signal.hilbert(buf))[left:left + n]


def _uniform(spec: ExperimentalSpectrum):
    e = spec.energies
    steps = np.diff(e)
    if np.allclose(steps, steps[0], rtol=1e-6, atol=0):
        return e, spec.intensities
    grid = np.linspace(e[0], e[-1], int(math.ceil((e[-1] - e[0]) / steps.min())) + 1)
    return grid, np.interp(grid, e, spec.intensities)


def effective_A_from_absorption(spec: ExperimentalSpectrum,
                                pad_factor: int = HILBERT_PAD_FACTOR) -> EffectiveA:
    """Effective A from a measured absorption lineshape.

    Re A is the negated lineshape normalised to unit peak; Im A is its
    discrete Hilbert transform. Non-uniform grids are resampled to the
    finest step first.
    """
    if spec.kind is not SpectrumKind.ABSORPTION:
        raise ValueError(f"expected an absorption spectrum, got {spec.kind.value}")
    e, y = _uniform(spec)
    peak = np.max(np.abs(y))
    if peak == 0:
        raise ValueError("absorption spectrum is identically zero")
    diag = []
    edge = max(abs(y[0]), abs(y[-1])) / peak
    if edge > EDGE_WARN_FRACTION:
        msg = f"absorption tails do not decay: edge value is {edge:.1%} of the peak"
        warnings.warn(msg, stacklevel=2)
        diag.append(msg)
    re = -y / peak
    im = hilbert_imag(re, pad_factor)
    return EffectiveA(e, re + 1j * im, None, tuple(diag))


def mirror_fluorescence(absorption: ExperimentalSpectrum,
                        omega_m_tilde: float) -> ExperimentalSpectrum:
    """Fluorescence proxy: the absorption reflected about ``omega_m_tilde``."""
    e = absorption.energies
    src = 2 * omega_m_tilde - e
    inside = (src >= e[0]) & (src <= e[-1])
    if not np.all(inside):
        warnings.warn("mirrored fluorescence leaves the input grid; truncated to zero",
                      stacklevel=2)
    y = np.where(inside, np.interp(src, e, absorption.intensities), 0.0)
    return ExperimentalSpectrum(e, y, SpectrumKind.FLUORESCENCE,
                                f"mirror({absorption.label})")


def fluorescence_proxy(fluorescence: ExperimentalSpectrum, A: EffectiveA):
    """F(omega) proxy scaled so its peak equals ``max |A|^2`` (the S = 0 limit).

    Returns a callable of the emission frequency.
    """
    peak = np.max(fluorescence.intensities)
    if peak <= 0:
        raise ValueError("fluorescence spectrum has no positive values")
    norm = np.max(np.abs(A.values) ** 2) / peak
    e, y = fluorescence.energies, fluorescence.intensities * norm
    return lambda w: np.interp(np.asarray(w, dtype=float), e, y, left=0.0, right=0.0)


# ---------------------------------------------------------------- calibration


def _r2(omega_d, plasmon: PlasmonParams, coupled_A):
    b = 1j * (omega_d - plasmon.omega_c) - 0.5 * plasmon.kappa + coupled_A
    return plasmon.kappa_ext / np.abs(b) ** 2


def _two_peaks(f, grid):
    """Two highest refined local maxima of ``f`` on ``grid``, sorted."""
    y = f(grid)
    idx = local_maxima(y)
    if len(idx) < 2:
        return None
    top = idx[np.argsort(y[idx])[-2:]]
    pos = sorted(refine_maximum(lambda w: float(f(w)), grid, i)[0] for i in top)
    return pos


def rabi_splitting(A: EffectiveA, plasmon: PlasmonParams, scale: float, grid) -> float:
    """Distance between the two main ``|r|^2`` peaks; 0 when unresolved."""
    f = lambda w: _r2(w, plasmon, A.coupled(w, scale))
    pk = _two_peaks(f, grid)
    return 0.0 if pk is None else pk[1] - pk[0]


def absorption_peak(A: EffectiveA) -> float:
    return float(A.energies[np.argmax(-A.values.real)])


def calibrate_gN(A: EffectiveA, plasmon: PlasmonParams, target_rabi: float,
                 n_grid: int = 4001, rtol: float = 1e-10) -> float:
    """Scale ``s`` with ``g_N^2 A = s A_unit`` giving the target splitting.

    The plasmon is tuned to the absorption peak. The splitting grows
    monotonically with ``s``; the bracket is widened by doublings (up to
    ``2**20``) around a first guess and then bisected in ``log s``.
    """
    if not target_rabi > 0:
        raise ValueError("target_rabi must be > 0")
    pl = plasmon.at(absorption_peak(A))
    grid = np.linspace(A.energies[0], A.energies[-1], n_grid)
    split = lambda s: rabi_splitting(A, pl, s, grid)

    # for a unit-peak Lorentzian of width w, g_N^2 = s w / 2 and the splitting is ~2 g_N
    half = np.nonzero(-A.values.real >= 0.5)[0]
    width = max(A.energies[half[-1]] - A.energies[half[0]], A.energies[1] - A.energies[0])
    s0 = 2 * (target_rabi / 2) ** 2 / width
    lo = hi = s0
    for _ in range(BRACKET_DOUBLINGS):
        if split(hi) >= target_rabi:
            break
        hi *= 2
    for _ in range(BRACKET_DOUBLINGS):
        if split(lo) < target_rabi:
            break
        lo /= 2
    s_lo, s_hi = split(lo), split(hi)
    if not s_lo < target_rabi <= s_hi:
        raise ValueError(
            f"cannot reach Rabi splitting {target_rabi:g}: achievable range is "
            f"[{s_lo:g}, {s_hi:g}] for scales in [{lo:g}, {hi:g}]"
        )
    if s_hi == target_rabi:
        return hi
    u = optimize.bisect(lambda x: split(math.exp(x)) - target_rabi,
                        math.log(lo), math.log(hi), xtol=rtol, rtol=rtol)
    return math.exp(u)


# ---------------------------------------------------------- ratio curves


@dataclass(frozen=True)
class RatioCurve:
    omega_c: np.ndarray
    ratio: np.ndarray
    skipped: tuple[str, ...] = ()


def polarization_ratio_curve(plasmon: PlasmonParams, A: EffectiveA, F_proxy, omega_c_grid,
                             branch: str | Branch, ratio: float,
                             omega_d_grid=None, inelastic=None,
                             scale: float | None = None) -> RatioCurve:
    """Peak-intensity ratio ``P_p / P_s`` of one branch versus ``omega_c``.

    Elastic spectra per unit ``C_s`` are ``|r|^2 F`` (s) and
    ``|r|^2 (rho + (2 - cos 2 beta) F)`` (p) with ``F`` the fluorescence
    proxy at ``omega = omega_d`` and ``rho = kappa_o^T / C_s``. The branch
    is the part of the drive axis below (LP) or above (UP) the ``|r|^2``
    minimum between its two main peaks. Points where the two peaks are not
    resolved are skipped and reported as NaN.

    ``inelastic``, if given, is a callable ``omega -> pedestal`` (per unit
    ``C_s``) added to the s spectrum and, times ``2 - cos 2 beta``, to p.
    """
    branch = Branch(branch)
    if ratio < 0:
        raise ValueError("ratio must be >= 0")
    wd = (np.linspace(A.energies[0], A.energies[-1], 4001) if omega_d_grid is None
          else np.asarray(omega_d_grid, dtype=float))
    cp = 2 - math.cos(2 * plasmon.beta)
    gA = A.coupled(wd, scale)
    Fw = F_proxy(wd)
    bg = inelastic(wd) if inelastic is not None else 0.0
    out, skipped = [], []
    for wc in np.asarray(omega_c_grid, dtype=float):
        pl = plasmon.at(wc)
        r2 = _r2(wd, pl, gA)
        idx = local_maxima(r2)
        if len(idx) < 2:
            skipped.append(f"omega_c={wc:.6g}: branches not resolved")
            out.append(np.nan)
            continue
        i1, i2 = sorted(idx[np.argsort(r2[idx])[-2:]])
        split = i1 + int(np.argmin(r2[i1:i2 + 1]))
        sl = slice(0, split + 1) if branch is Branch.LP else slice(split, len(wd))
        s_spec = r2 * (Fw + bg)
        p_spec = r2 * (ratio + cp * (Fw + bg))

        def peak(spec_fn, y):
            seg = np.arange(len(wd))[sl]
            i = int(seg[np.argmax(y[sl])])
            return refine_maximum(spec_fn, wd, i)[1]

        def s_fn(w):
            a = A.coupled(w, scale)
            b = inelastic(w) if inelastic is not None else 0.0
            return float(_r2(w, pl, a) * (F_proxy(w) + b))

        def p_fn(w):
            a = A.coupled(w, scale)
            b = inelastic(w) if inelastic is not None else 0.0
            return float(_r2(w, pl, a) * (ratio + cp * (F_proxy(w) + b)))

        ps = peak(s_fn, s_spec)
        if ps <= 0:
            skipped.append(f"omega_c={wc:.6g}: no s-polarised emission on branch")
            out.append(np.nan)
            continue
        out.append(peak(p_fn, p_spec) / ps)
    return RatioCurve(np.asarray(omega_c_grid, dtype=float), np.array(out), tuple(skipped))


@dataclass(frozen=True)
class FitResult:
    ratio_kappa_o_over_Cs: float
    residual: float
    branch: Branch
    converged: bool
    diagnostics: list = field(default_factory=list)


def fit_coupling_ratio(curve_fn, data: ExperimentalSpectrum, branch: str | Branch | None = None,
                       tol: float = 1e-8) -> FitResult:
    """Least-squares ``kappa_o^T / C_s`` for one branch.

    Parameters
    ----------
    curve_fn
        ``curve_fn(rho, omega_c) -> predicted ratios`` (NaN for skipped
        points, which are left out of the residual).
    data
        Measured ratios; ``energies`` hold ``omega_c``.
    branch
        Taken from ``data.kind`` when not given.

    The search is golden-section in ``log rho`` on ``[1e-6, 1e6]``. A
    minimum within tolerance of either end is reported as unconverged.
    """
    if branch is None:
        if data.kind is SpectrumKind.RATIO_LP:
            branch = Branch.LP
        elif data.kind is SpectrumKind.RATIO_UP:
            branch = Branch.UP
        else:
            raise ValueError("branch not given and data is not a polarisation-ratio spectrum")
    branch = Branch(branch)
    if len(data.energies) < 3:
        raise ValueError("need at least 3 data points on the branch")
    wc, meas = data.energies, data.intensities

    def residual(log_rho):
        pred = np.asarray(curve_fn(math.exp(log_rho), wc), dtype=float)
        ok = np.isfinite(pred)
        if not np.any(ok):
            return math.inf
        return float(np.sum((pred[ok] - meas[ok]) ** 2))

    a, b = LOG_RATIO_BOUNDS
    x, res = golden_section_min(residual, a, b, tol=tol)
    edge = 1e3 * tol * (b - a)
    converged = (x - a > edge) and (b - x > edge) and math.isfinite(res)
    rho = math.exp(x)
    pred = np.asarray(curve_fn(rho, wc), dtype=float)
    diag = [(float(w), float(m), float(p)) for w, m, p in zip(wc, meas, pred)]
    return FitResult(rho, res, branch, converged, diag)


# ------------------------------------------------------- broadband drive


def observed_spectrum(spectra_fn, omega_d_grid, rho=None, omega_grid=None,
                      uniform: bool = False) -> Spectrum:
    """Spectrum seen under a distribution of drive frequencies.

    Parameters
    ----------
    spectra_fn
        ``omega_d -> Spectrum`` for a single drive.
    omega_d_grid
        Drive frequencies (uniform step).
    rho
        Nonnegative drive weights on ``omega_d_grid`` summing to one. A
        single nonzero weight returns that drive's spectrum directly when
        ``omega_grid`` is not given.
    omega_grid
        Uniform emission grid for the sampled result.
    uniform
        Flat broadband drive of unit spectral density. The elastic kernel is
        then evaluated at ``omega_d = omega`` and the inelastic lines are
        integrated over the drive, ``sum_m w_m(omega - m * spacing)``.
    """
    wd = np.asarray(omega_d_grid, dtype=float)
    if uniform:
        if omega_grid is None:
            raise ValueError("uniform drive needs an omega_grid")
        w = np.asarray(omega_grid, dtype=float)
        specs = [spectra_fn(x) for x in wd]
        sp = specs[0].spacing
        m_lo = min(s.m_min for s in specs)
        m_hi = max(s.m_min + len(s.weights) - 1 for s in specs)
        lo_need, hi_need = w[0] - max(m_hi, 0) * sp, w[-1] - min(m_lo, 0) * sp
        if wd[0] > lo_need + 1e-12 or wd[-1] < hi_need - 1e-12:
            raise ValueError(
                f"drive grid [{wd[0]:g}, {wd[-1]:g}] does not cover the required "
                f"range [{lo_need:g}, {hi_need:g}]"
            )
        table = np.array([[s.weight_at(m) if m != 0 else 0.0 for m in range(m_lo, m_hi + 1)]
                          for s in specs])
        el = np.array([spectra_fn(x).elastic_weight for x in w])
        inel = np.zeros_like(w)
        for j, m in enumerate(range(m_lo, m_hi + 1)):
            if m != 0:
                inel += np.interp(w - m * sp, wd, table[:, j])
        return Spectrum(math.nan, 0.0, specs[0].channel, specs[0].polarization, sp,
                        omega_grid=w, baseline=el + inel)

    if rho is None:
        raise ValueError("give drive weights rho or set uniform=True")
    rho = np.asarray(rho, dtype=float)
    if rho.shape != wd.shape:
        raise ValueError("rho must match omega_d_grid")
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    total = rho.sum()
    if not math.isclose(total, 1.0, rel_tol=1e-9):
        raise ValueError(f"rho must sum to 1 (got {total:g})")
    nz = np.nonzero(rho)[0]
    if omega_grid is None:
        if len(nz) != 1:
            raise ValueError("several drive frequencies need an omega_grid")
        return spectra_fn(wd[nz[0]])
    w = np.asarray(omega_grid, dtype=float)
    dw = w[1] - w[0]
    edges = np.concatenate([w - dw / 2, [w[-1] + dw / 2]])
    dens = np.zeros_like(w)
    ref = None
    for i in nz:
        s = spectra_fn(wd[i])
        ref = ref or s
        freqs = np.concatenate([[s.omega_d], s.frequencies])
        vals = rho[i] * np.concatenate([[s.elastic_weight], s.weights])
        if freqs.min() < edges[0] or freqs.max() > edges[-1]:
            keep = vals[(freqs < edges[0]) | (freqs > edges[-1])]
            if np.any(keep > 0):
                raise ValueError("emission lines fall outside omega_grid")
        dens += np.histogram(freqs, bins=edges, weights=vals)[0] / dw
    return Spectrum(math.nan, 0.0, ref.channel, ref.polarization, ref.spacing,
                    omega_grid=w, baseline=dens)


# ------------------------------------------------------------ presets


@dataclass(frozen=True)
class FitPreset:
    """Molecule and plasmon settings for one measured dye (energies in eV).

    ``stokes_shift`` is the absorption-to-emission peak distance ``2 S omega_v``.
    """

    name: str
    omega_m: float
    stokes_shift: float
    target_rabi: float
    kappa: float
    beta: float = math.pi / 12

    @property
    def omega_m_tilde(self) -> float:
        return self.omega_m - self.stokes_shift / 2


PRESETS = {
    "TDBC": FitPreset("TDBC", omega_m=2.10, stokes_shift=0.005, target_rabi=0.167, kappa=0.250),
    "R6G": FitPreset("R6G", omega_m=2.27, stokes_shift=0.097, target_rabi=0.337, kappa=0.250),
}
