import math
import os
import warnings

import numpy as np
import pytest

from vibropol import fitting
from vibropol.fitting import (
    PRESETS,
    Branch,
    EffectiveA,
    ExperimentalSpectrum,
    calibrate_gN,
    effective_A_from_absorption,
    fit_coupling_ratio,
    fluorescence_proxy,
    hilbert_imag,
    mirror_fluorescence,
    observed_spectrum,
    polarization_ratio_curve,
    rabi_splitting,
    read_spectrum_csv,
)
from vibropol.molecular import MolecularParams, chi
from vibropol.polariton import PlasmonParams, PolaritonSystem, emission_spectra_incoherent
from vibropol.vibronic import VibronicParams, l_comb_gamma0, pe_function


def lorentzian_A(x, k=0.5):
    return chi(x, k)


def test_hilbert_lorentzian():
    x = np.linspace(-30, 30, 6001)
    A = lorentzian_A(x)
    im = hilbert_imag(A.real)
    assert np.max(np.abs(im - A.imag)) < 1e-3 * np.max(np.abs(A.real))


def test_hilbert_antisymmetric_and_translation_invariant():
    x = np.linspace(-20, 20, 2001)
    re = np.exp(-x**2) + 0.3 * np.exp(-(x / 3) ** 2)
    im = hilbert_imag(re)
    np.testing.assert_allclose(im, -im[::-1], atol=1e-6)
    a = effective_A_from_absorption(ExperimentalSpectrum(x, re, "absorption"))
    b = effective_A_from_absorption(ExperimentalSpectrum(x + 7.5, re, "absorption"))
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)


def test_effective_A_normalisation_and_edge_warning():
    x = np.linspace(-3, 3, 301)
    y = 3.0 / (1 + x**2)
    with pytest.warns(UserWarning, match="tails"):
        A = effective_A_from_absorption(ExperimentalSpectrum(x, y, "absorption"))
    assert np.max(np.abs(A.values.real)) == pytest.approx(1.0)
    assert A.diagnostics
    with pytest.raises(ValueError):
        effective_A_from_absorption(ExperimentalSpectrum(x, y, "fluorescence"))
    with pytest.raises(ValueError, match="calibrated"):
        A.coupled(0.0)
    assert A(100.0) == 0


def test_mirror_is_involution():
    e = np.linspace(0, 10, 1001)
    y = np.exp(-((e - 4.0) / 0.7) ** 2)
    spec = ExperimentalSpectrum(e, y, "absorption")
    m = mirror_fluorescence(spec, 5.0)
    assert m.energies[np.argmax(m.intensities)] == pytest.approx(6.0, abs=0.011)
    back = mirror_fluorescence(ExperimentalSpectrum(e, m.intensities, "absorption"), 5.0)
    np.testing.assert_allclose(back.intensities, y, atol=1e-12)


def test_mirror_warns_when_leaving_grid():
    e = np.linspace(0, 10, 101)
    with pytest.warns(UserWarning):
        mirror_fluorescence(ExperimentalSpectrum(e, np.ones_like(e), "absorption"), 8.0)


def _lorentz_A(k=0.5):
    e = np.linspace(-40, 40, 8001) + 10.0
    A = lorentzian_A(e - 10.0, k)
    return EffectiveA(e, A / np.max(np.abs(A.real)))


def test_calibration_reaches_target():
    A = _lorentz_A()
    pl = PlasmonParams(10.0, 0.1, 0.05)
    s = calibrate_gN(A, pl, 4.0)
    grid = np.linspace(A.energies[0], A.energies[-1], 20001)
    assert rabi_splitting(A, pl, s, grid) == pytest.approx(4.0, rel=0.01)
    # unit-peak Re A is chi kappa / 2, so g_N^2 = s kappa / 2; split ~ 2 g_N
    assert math.sqrt(s * 0.5 / 2) == pytest.approx(2.0, rel=0.02)
    with pytest.raises(ValueError):
        calibrate_gN(A, pl, -1.0)


def test_ratio_is_one_without_direct_channel():
    A = _lorentz_A()
    pl = PlasmonParams(10.0, 0.1, 0.05, beta=0.0)
    A = A.with_scale(calibrate_gN(A, pl, 4.0))
    Fp = fluorescence_proxy(ExperimentalSpectrum(A.energies, np.abs(A.values) ** 2,
                                                 "fluorescence"), A)
    for br in ("LP", "UP"):
        c = polarization_ratio_curve(pl, A, Fp, [9.0, 10.0, 11.0], br, 0.0)
        np.testing.assert_allclose(c.ratio, 1.0, rtol=1e-9)
    c = polarization_ratio_curve(pl, A, Fp, [9.0, 10.0], "LP", 1.0)
    assert np.all(c.ratio > 1)


def test_unresolved_branches_are_skipped():
    A = _lorentz_A()
    pl = PlasmonParams(10.0, 0.1, 0.05)
    A = A.with_scale(1e-6)
    Fp = lambda w: np.ones_like(np.asarray(w, dtype=float))
    c = polarization_ratio_curve(pl, A, Fp, [10.0], "LP", 1.0)
    assert np.isnan(c.ratio[0]) and c.skipped


def _synthetic(noise, seed=3):
    rng = np.random.default_rng(seed)
    wc = np.linspace(8.0, 12.0, 9)
    model = lambda rho, w: 1.0 + rho / (1.0 + (np.asarray(w) - 10.0) ** 2)
    meas = model(2.5, wc) * (1 + noise * rng.standard_normal(len(wc)))
    return model, ExperimentalSpectrum(wc, meas, "polarization_ratio_UP")


def test_fit_zero_noise_exact():
    model, data = _synthetic(0.0)
    res = fit_coupling_ratio(model, data)
    assert res.branch is Branch.UP and res.converged
    assert res.residual < 1e-10
    assert res.ratio_kappa_o_over_Cs == pytest.approx(2.5, rel=1e-4)
    assert len(res.diagnostics) == 9


def test_fit_residual_scales_with_noise_squared():
    model, d1 = _synthetic(0.01)
    _, d2 = _synthetic(0.02)
    r1 = fit_coupling_ratio(model, d1).residual
    r2 = fit_coupling_ratio(model, d2).residual
    assert r2 / r1 == pytest.approx(4.0, rel=0.1)


def test_fit_needs_branch_and_points():
    model, data = _synthetic(0.0)
    with pytest.raises(ValueError):
        fit_coupling_ratio(model, ExperimentalSpectrum(data.energies, data.intensities,
                                                       "absorption"))
    with pytest.raises(ValueError):
        fit_coupling_ratio(model, ExperimentalSpectrum([1.0, 2.0], [1.0, 1.0],
                                                       "polarization_ratio_LP"))


def test_fit_at_bound_is_unconverged():
    model = lambda rho, w: np.full(len(w), 1.0 + rho)
    data = ExperimentalSpectrum([1.0, 2.0, 3.0], [0.0, 0.0, 0.0], "polarization_ratio_LP")
    assert not fit_coupling_ratio(model, data).converged


def _spectra_fn():
    vib = VibronicParams(1.0, 0.0, 0.5, 0.3)
    mol = MolecularParams.with_total_linewidth(10.0, 0.5, vib, T=0.1)
    system = PolaritonSystem(PlasmonParams(10.0, 0.1, 0.05), mol, 1.0)
    pe, L = pe_function(vib), l_comb_gamma0(0.5, vib.n_th)
    return lambda w: emission_spectra_incoherent(w, system, pe, L)["s"]


def test_observed_single_drive_is_identity():
    fn = _spectra_fn()
    wd = np.array([9.0, 9.5, 10.0])
    s = observed_spectrum(fn, wd, rho=[0.0, 1.0, 0.0])
    ref = fn(9.5)
    assert s.elastic_weight == ref.elastic_weight
    np.testing.assert_array_equal(s.weights, ref.weights)


def test_observed_weighted_drive_conserves_power():
    fn = _spectra_fn()
    wd = np.array([9.0, 9.5, 10.0])
    rho = np.array([0.2, 0.5, 0.3])
    w = np.linspace(-40.0, 60.0, 10001)
    s = observed_spectrum(fn, wd, rho=rho, omega_grid=w)
    total = sum(r * (fn(x).elastic_weight + fn(x).weights.sum()) for r, x in zip(rho, wd))
    assert s.baseline.sum() * (w[1] - w[0]) == pytest.approx(total, rel=1e-9)


def test_observed_validation():
    fn = _spectra_fn()
    wd = np.array([9.0, 10.0])
    with pytest.raises(ValueError):
        observed_spectrum(fn, wd, rho=[0.5, 0.6])
    with pytest.raises(ValueError):
        observed_spectrum(fn, wd, rho=[-0.5, 1.5])
    with pytest.raises(ValueError):
        observed_spectrum(fn, wd, rho=[0.5, 0.5])
    with pytest.raises(ValueError):
        observed_spectrum(fn, wd, uniform=True)
    with pytest.raises(ValueError, match="cover"):
        observed_spectrum(fn, wd, uniform=True, omega_grid=np.linspace(9, 10, 11))


def test_observed_uniform_drive():
    fn = _spectra_fn()
    w = np.linspace(8.0, 12.0, 41)
    wd = np.linspace(-5.0, 40.0, 901)
    s = observed_spectrum(fn, wd, uniform=True, omega_grid=w)
    el = np.array([fn(x).elastic_weight for x in w])
    assert np.all(s.baseline >= el)


def test_csv_reader(tmp_path):
    p = tmp_path / "abs.csv"
    p.write_text("energy,value\n2.0,1.0\n1.0,0.5\n3.0,0.2\n")
    with pytest.warns(UserWarning, match="sorting"):
        spec = read_spectrum_csv(p, "absorption")
    np.testing.assert_array_equal(spec.energies, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(spec.intensities, [0.5, 1.0, 0.2])
    assert spec.label == "abs"
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0,2.0\nx,y\n")
    with pytest.raises(ValueError, match="bad.csv:2"):
        read_spectrum_csv(bad, "absorption")
    dup = tmp_path / "dup.csv"
    dup.write_text("2.0,1.0\n1.0,1.0\n2.0,3.0\n")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValueError, match="duplicate"):
            read_spectrum_csv(dup, "absorption")


def test_spectrum_validation():
    with pytest.raises(ValueError):
        ExperimentalSpectrum([1.0, 1.0], [0.0, 0.0], "absorption")
    with pytest.raises(ValueError):
        ExperimentalSpectrum([1.0, 2.0], [0.0, np.nan], "absorption")
    with pytest.raises(ValueError):
        ExperimentalSpectrum([1.0, 2.0], [0.0, 0.0], "raman")


def test_presets():
    assert PRESETS["TDBC"].omega_m_tilde == pytest.approx(2.0975)
    assert PRESETS["R6G"].stokes_shift > PRESETS["TDBC"].stokes_shift


def _fit_dye(name, directory):
    pre = PRESETS[name]
    absorption = read_spectrum_csv(os.path.join(directory, "absorption.csv"), "absorption")
    ratio = read_spectrum_csv(os.path.join(directory, "ratio_LP.csv"), "polarization_ratio_LP")
    fl_path = os.path.join(directory, "fluorescence.csv")
    fluor = (read_spectrum_csv(fl_path, "fluorescence") if os.path.exists(fl_path)
             else mirror_fluorescence(absorption, pre.omega_m_tilde))
    pl = PlasmonParams(pre.omega_m, pre.kappa, pre.kappa / 2, beta=pre.beta)
    A = effective_A_from_absorption(absorption)
    A = A.with_scale(calibrate_gN(A, pl, pre.target_rabi))
    Fp = fluorescence_proxy(fluor, A)
    fn = lambda rho, w: polarization_ratio_curve(pl, A, Fp, w, "LP", rho).ratio
    return fit_coupling_ratio(fn, ratio)


@pytest.mark.skipif(not (os.environ.get("VIBROPOL_TDBC_DIR") and os.environ.get("VIBROPOL_R6G_DIR")),
                    reason="digitised TDBC/R6G data not available")
def test_measured_dyes_ordering():
    tdbc = _fit_dye("TDBC", os.environ["VIBROPOL_TDBC_DIR"])
    r6g = _fit_dye("R6G", os.environ["VIBROPOL_R6G_DIR"])
    assert r6g.ratio_kappa_o_over_Cs > tdbc.ratio_kappa_o_over_Cs


def test_module_exports():
    assert fitting.SpectrumKind("polarization_ratio_LP") is fitting.SpectrumKind.RATIO_LP
