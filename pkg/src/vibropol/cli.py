"""Command-line front end: ``vibropol {pe,molecule,polariton,fit,validate} CONFIG``.

Each subcommand reads one INI config, writes CSV files into the output
directory and prints their paths. Exit codes: 0 ok, 1 computational
failure (or an invalid validity verdict without ``--force``), 2 usage or
config error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import fitting, polariton, validity
from .io import (
    ConfigError,
    RunConfig,
    grid_from_config,
    molecule_from_config,
    spectrum_rows,
    system_from_config,
    vibration_from_config,
    vibration_or_modes,
    write_csv,
)
from .molecular import absorption_A, absorption_spectrum, stokes_spectra_coherent, \
    stokes_spectra_incoherent
from .multimode import MultimodeParams
from .vibronic import (
    InsufficientDecayError,
    PEComb,
    QuadratureError,
    TruncationError,
    kms_violation,
    l_comb_gamma0,
    pe_function,
    pe_moments,
)

log = logging.getLogger("vibropol")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Run:
    """Shared state of one invocation: config, output paths, worker count."""

    def __init__(self, cfg: RunConfig, out: str | None, threads: int, force: bool):
        self.cfg = cfg
        self.force = force
        self.threads = max(1, threads)
        if out is not None:
            self.dir = Path(out)
        else:
            # relative to the config file, like the data paths
            self.dir = Path(cfg.get("output", "directory", "."))
            if not self.dir.is_absolute() and cfg.source != "<string>":
                self.dir = Path(cfg.source).parent / self.dir
        self.prefix = cfg.get("output", "prefix", "")
        self.header = cfg.resolved_lines()
        self.written: list[Path] = []

    def write(self, name, columns, rows, extra=()):
        path = write_csv(self.dir / f"{self.prefix}{name}.csv", columns, rows,
                         list(self.header) + list(extra))
        self.written.append(path)
        return path


def _pe_and_l(run: _Run, vib, need_l: bool):
    if isinstance(vib, MultimodeParams):
        pe = vib.pe_function()
        return pe, (vib.l_comb() if need_l else None)
    pe = pe_function(vib, workers=run.threads)
    l_comb = None
    if need_l and vib.gamma == 0:
        l_comb = l_comb_gamma0(vib.huang_rhys, vib.n_th, omega_v=vib.omega_v)
    return pe, l_comb


# ------------------------------------------------------------------ pe


def cmd_pe(run: _Run) -> int:
    vib = vibration_or_modes(run.cfg)
    pe, _ = _pe_and_l(run, vib, need_l=False)
    if isinstance(pe, PEComb):
        run.write("pe", ["k", "E", "weight"], zip(pe.ks, pe.energies, pe.weights))
    else:
        e = pe.energies
        rows = zip(e, pe.density)
        window = grid_from_config(run.cfg, "E")
        if window is not None:
            keep = (e >= window[0]) & (e <= window[-1])
            rows = zip(e[keep], pe.density[keep])
        run.write("pe", ["E", "density"], rows,
                  [f"zero_phonon_weight = {pe.zero_phonon_weight:.12g}"])
    mean, var = pe_moments(pe)
    kT = vib.modes[0].kT if isinstance(vib, MultimodeParams) else vib.kT
    kms = kms_violation(pe, kT) if kT > 0 else math.nan
    run.write("pe_summary", ["quantity", "value"],
              [("total", pe.total()), ("mean", mean), ("variance", var),
               ("kms_violation", kms)])
    return EXIT_OK


# ------------------------------------------------------------ molecule


def cmd_molecule(run: _Run) -> int:
    cfg = run.cfg
    vib = vibration_or_modes(cfg)
    mol = molecule_from_config(cfg, vib)
    lossless = isinstance(vib, MultimodeParams) or vib.gamma == 0
    pe, l_comb = _pe_and_l(run, vib, need_l=lossless)
    N = cfg.int("coupling", "N", None) if cfg.has("coupling") else None
    coherent = cfg.bool("drive", "coherent", False)
    alpha = cfg.float("drive", "alpha", 1.0)

    wd = grid_from_config(cfg, "omega_d")
    if wd is None:
        wd = mol.omega_m_tilde + np.linspace(-10, 10, 2001) * _spacing(vib)
    A = absorption_A(mol.detuning(wd), pe, mol.kappa_m)
    s_a = absorption_spectrum(mol, pe, l_comb, wd, alpha,
                              coherent_N=(N or 1) if coherent else None)
    run.write("absorption", ["omega_d", "S_A", "re_A", "im_A"],
              zip(wd, s_a, A.real, A.imag),
              [f"min_S_A = {float(np.min(s_a)):.12g}"])

    if l_comb is not None:
        omega_d = cfg.float("drive", "omega_d", mol.omega_m_tilde)
        if coherent:
            spectra = stokes_spectra_coherent(mol, pe, l_comb, omega_d, alpha, N=N or 1)
        else:
            spectra = stokes_spectra_incoherent(mol, pe, l_comb, omega_d, alpha)
        rows = []
        for ch in ("T", "R"):
            rows += spectrum_rows(ch, spectra[ch])
        run.write("emission", ["channel", "omega", "is_elastic", "weight"], rows,
                  [f"omega_d = {omega_d:.12g}"])
    else:
        log.warning("emission combs need lossless vibrations; only absorption written")
    return EXIT_OK


def _spacing(vib) -> float:
    if isinstance(vib, MultimodeParams):
        return min(m.omega_v for m in vib.modes)
    return vib.omega_v


# ----------------------------------------------------------- polariton


def cmd_polariton(run: _Run) -> int:
    cfg = run.cfg
    vib = vibration_or_modes(cfg)
    system = system_from_config(cfg, vib)
    mol, pl = system.molecule, system.plasmon
    lossless = isinstance(vib, MultimodeParams) or vib.gamma == 0
    pe, l_comb = _pe_and_l(run, vib, need_l=lossless)
    alpha = cfg.float("drive", "alpha", 1.0)
    coherent = cfg.bool("drive", "coherent", False)
    sp = _spacing(vib)

    wd = grid_from_config(cfg, "omega_d")
    if wd is None:
        wd = mol.omega_m + np.linspace(-6, 6, 2401) * sp
    wc = grid_from_config(cfg, "omega_c")
    if wc is not None:
        vals = polariton.response_map(wc, wd, system, pe)
        rows = ((c, d, vals[i, j]) for i, c in enumerate(wc) for j, d in enumerate(wd))
        run.write("response_map", ["omega_c", "omega_d", "r2"], rows)

    r2 = np.abs(polariton.system_response(wd, system, pe)) ** 2
    if l_comb is not None:
        s_el, p_el = polariton.elastic_emission_curves(wd, system, pe, l_comb, coherent, alpha)
        run.write("elastic", ["omega_d", "r2", "S_s", "S_p"], zip(wd, r2, s_el, p_el))
        omega_d = cfg.float("drive", "omega_d", None)
        if omega_d is not None:
            fn = (polariton.emission_spectra_coherent if coherent
                  else polariton.emission_spectra_incoherent)
            spectra = fn(omega_d, system, pe, l_comb, alpha)
            rows = spectrum_rows("s", spectra["s"]) + spectrum_rows("p", spectra["p"])
            run.write("emission", ["polarization", "omega", "is_elastic", "weight"], rows,
                      [f"omega_d = {omega_d:.12g}"])
    else:
        run.write("elastic", ["omega_d", "r2"], zip(wd, r2))

    pos, hts = polariton.response_peaks(wd, system, pe)
    rows = [("numeric", float(p), float(h)) for p, h in zip(pos, hts)]
    single = not isinstance(vib, MultimodeParams)
    if single and math.isclose(pl.omega_c, mol.omega_m) and system.g_N > vib.omega_v:
        wp, wm = polariton.polariton_frequencies_perturbative(
            mol.omega_m, system.g_N, vib.huang_rhys, vib.omega_v)
        gp, gm = polariton.polariton_linewidths_perturbative(
            pl.kappa, mol.kappa_m, vib.huang_rhys, vib.omega_v, system.g_N)
        rows += [("perturbative_plus", wp, gp), ("perturbative_minus", wm, gm)]
    run.write("peaks", ["kind", "omega", "height_or_width"], rows)
    return EXIT_OK


# ----------------------------------------------------------------- fit


def _data_path(run: _Run, key: str, required: bool):
    raw = run.cfg.get("fit", key)
    if raw is None:
        if required:
            raise ConfigError(f"{run.cfg.where('fit')}: missing key '{key}'")
        return None
    path = Path(raw)
    if not path.is_absolute():
        base = Path(run.cfg.source).parent if run.cfg.source != "<string>" else Path(".")
        path = base / path
    if not path.is_file():
        raise ConfigError(f"{run.cfg.where('fit', key)}: data file not found: {path}")
    return path


def cmd_fit(run: _Run, data_files: list[str] | None = None) -> int:
    cfg = run.cfg
    cfg.require("fit")
    preset = None
    name = cfg.get("fit", "preset")
    if name is not None:
        if name not in fitting.PRESETS:
            raise ConfigError(f"{cfg.where('fit', 'preset')}: unknown preset {name!r} "
                              f"(choose from {', '.join(fitting.PRESETS)})")
        preset = fitting.PRESETS[name]
    abs_path = _data_path(run, "absorption", True)
    absorption = fitting.read_spectrum_csv(abs_path, "absorption")
    fl_path = _data_path(run, "fluorescence", False)

    A = fitting.effective_A_from_absorption(absorption)
    peak = fitting.absorption_peak(A)
    stokes = cfg.float("fit", "stokes_shift", preset.stokes_shift if preset else None)
    if fl_path is not None:
        fluor = fitting.read_spectrum_csv(fl_path, "fluorescence")
        fluor = fitting.ExperimentalSpectrum(
            A.energies, np.interp(A.energies, fluor.energies, fluor.intensities, 0, 0),
            "fluorescence", fluor.label)
    else:
        if stokes is None:
            raise ConfigError(f"{cfg.where('fit')}: give 'fluorescence' or 'stokes_shift'")
        grid = fitting.ExperimentalSpectrum(A.energies, -A.values.real, "absorption")
        fluor = fitting.mirror_fluorescence(grid, peak - stokes / 2)
    kappa = cfg.float("plasmon", "kappa", preset.kappa if preset else None)
    if kappa is None:
        raise ConfigError(f"{cfg.where('plasmon')}: missing key 'kappa'")
    beta = cfg.float("plasmon", "beta", preset.beta if preset else polariton.DEFAULT_BETA)
    pl = polariton.PlasmonParams(peak, kappa, cfg.float("plasmon", "kappa_ext", kappa / 2),
                                 beta=beta)
    target = cfg.float("fit", "target_rabi", preset.target_rabi if preset else None)
    if target is None:
        raise ConfigError(f"{cfg.where('fit')}: missing key 'target_rabi'")
    scale = fitting.calibrate_gN(A, pl, target)
    A = A.with_scale(scale)
    Fp = fitting.fluorescence_proxy(fluor, A)

    keys = [("ratio_LP", "polarization_ratio_LP", "LP"),
            ("ratio_UP", "polarization_ratio_UP", "UP")]
    extra = list(data_files or [])
    status = EXIT_OK
    summary = [("scale_gN2", scale), ("target_rabi", target)]
    found = False
    for key, kind, branch in keys:
        path = _data_path(run, key, False)
        if path is None:
            continue
        found = True
        data = fitting.read_spectrum_csv(path, kind)
        curve = lambda rho, w, b=branch: fitting.polarization_ratio_curve(
            pl, A, Fp, w, b, rho).ratio
        res = fitting.fit_coupling_ratio(curve, data)
        run.write(f"fit_{branch}", ["omega_c", "measured", "predicted"], res.diagnostics,
                  [f"ratio_kappa_o_over_Cs = {res.ratio_kappa_o_over_Cs:.12g}",
                   f"residual = {res.residual:.12g}", f"converged = {res.converged}"])
        summary += [(f"ratio_{branch}", res.ratio_kappa_o_over_Cs),
                    (f"residual_{branch}", res.residual),
                    (f"converged_{branch}", int(res.converged))]
        print(f"{branch}: kappa_o^T/C_s = {res.ratio_kappa_o_over_Cs:.6g} "
              f"(residual {res.residual:.3g}, converged={res.converged})")
        if not res.converged:
            status = EXIT_FAIL
    if extra and not found:
        log.info("extra data files ignored: %s", ", ".join(extra))
    if not found:
        raise ConfigError(f"{cfg.where('fit')}: give 'ratio_LP' and/or 'ratio_UP' data")
    run.write("fit_summary", ["quantity", "value"], summary)
    return status


# ------------------------------------------------------------ validate


def cmd_validate(run: _Run) -> int:
    cfg = run.cfg
    vib = vibration_from_config(cfg)
    cfg.require("molecule")
    if cfg.get("molecule", "kappa_tilde") is not None:
        kt = cfg.float("molecule", "kappa_tilde")
    else:
        kt = cfg.float("molecule", "kappa_m", required=True) - vib.vibrational_damping
    if kt < 0:
        raise ConfigError(f"{cfg.where('molecule')}: kappa_m is smaller than gamma*S")
    rep = validity.validity_report(vib, kt)
    for line in rep.lines():
        print(line)
    run.write("validity", ["quantity", "value"],
              [("c_estimate", rep.c_estimate), ("c_full", rep.c_full),
               ("main_text_condition", int(rep.main_text_condition)),
               ("nth_condition", int(rep.nth_condition)), ("verdict", rep.verdict.value)])
    if rep.verdict is validity.Verdict.INVALID and not run.force:
        print("approximation invalid for these parameters (use --force to ignore)",
              file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


COMMANDS = {
    "pe": cmd_pe,
    "molecule": cmd_molecule,
    "polariton": cmd_polariton,
    "fit": cmd_fit,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vibropol", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", help="INI run configuration")
        s.add_argument("--out", help="output directory (overrides [output] directory)")
        s.add_argument("--force", action="store_true",
                       help="exit 0 even when validate reports an invalid regime")
        s.add_argument("--verbose", "-v", action="store_true")
        s.add_argument("--threads", type=int, default=1,
                       help="worker processes for J(t) quadrature")
        if name == "fit":
            s.add_argument("data", nargs="*", help="additional data files (informational)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        cfg = RunConfig.from_file(args.config)
        run = _Run(cfg, args.out, args.threads, args.force)
        if args.command == "fit":
            code = cmd_fit(run, args.data)
        else:
            code = COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InsufficientDecayError, TruncationError, QuadratureError, ArithmeticError,
            ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for path in run.written:
        print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
