"""Run configuration (INI) and CSV output."""
from __future__ import annotations

import configparser
import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .molecular import MolecularParams, Spectrum
from .multimode import MultimodeParams
from .polariton import DEFAULT_BETA, PlasmonParams, PolaritonSystem, ensemble_g_N
from .vibronic import DEFAULT_CUTOFF_FACTOR, VibrationModel, VibronicParams

SIG_DIGITS = 12
SECTIONS = ("vibration", "molecule", "plasmon", "coupling", "drive", "grids", "output", "fit")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{SIG_DIGITS}g}"
    return str(x)


def write_csv(path, columns, rows, header_lines=()) -> Path:
    """CSV with ``#`` comment header lines, a column row, then data rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Inverse of :func:`write_csv`: returns ``(columns, float array)``."""
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    cols = next(reader)
    data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    return cols, data


def spectrum_rows(label: str, spec: Spectrum):
    return [(label, w, el, v) for w, el, v in spec.rows()]


# ---------------------------------------------------------------- config


@dataclass
class RunConfig:
    """Parsed INI document plus key line numbers for error messages."""

    parser: configparser.ConfigParser
    source: str
    lines: dict

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_string(path.read_text(), str(path))

    @classmethod
    def from_string(cls, text: str, source: str = "<string>") -> "RunConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            cp.read_string(text, source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        for sec in cp.sections():
            if sec not in SECTIONS:
                raise ConfigError(f"{source}: unknown section [{sec}]")
        return cls(cp, source, _key_lines(text))

    def where(self, section, key=None) -> str:
        k = key.lower() if key else None
        line = self.lines.get((section, k)) or self.lines.get((section, None))
        loc = f"{self.source}:{line}" if line else self.source
        return f"{loc}: [{section}]" + (f" {key}" if key else "")

    def has(self, section) -> bool:
        return self.parser.has_section(section)

    def require(self, *sections):
        for s in sections:
            if not self.has(s):
                raise ConfigError(f"{self.source}: missing section [{s}]")

    def get(self, section, key, default=None):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        return default

    def float(self, section, key, default=None, *, required=False):
        raw = self.get(section, key)
        if raw is None:
            if required:
                raise ConfigError(f"{self.where(section)}: missing key '{key}'")
            return default
        try:
            val = float(raw)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: not a number: {raw!r}") from None
        if not math.isfinite(val):
            raise ConfigError(f"{self.where(section, key)}: must be finite")
        return val

    def int(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: not an integer: {raw!r}") from None

    def bool(self, section, key, default=False):
        if self.get(section, key) is None:
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: not a boolean") from None

    def floats(self, section, key):
        raw = self.get(section, key)
        if raw is None:
            return None
        try:
            return [float(v) for v in re.split(r"[,\s]+", raw) if v]
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: expected numbers") from None

    def resolved_lines(self) -> list[str]:
        """Sorted ``[section] key = value`` lines echoed into output headers."""
        out = []
        for sec in sorted(self.parser.sections()):
            for key in sorted(self.parser.options(sec)):
                out.append(f"[{sec}] {key} = {self.parser.get(sec, key).strip()}")
        return out


def _key_lines(text: str) -> dict:
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = no
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section:
            lines[(section, m.group(1).strip().lower())] = no
    return lines


def _guard(cfg: RunConfig, section: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg.where(section)}: {exc}") from None


def vibration_from_config(cfg: RunConfig, section: str = "vibration") -> VibronicParams:
    cfg.require(section)
    model = cfg.get(section, "model", "lossless").lower()
    try:
        model = VibrationModel(model)
    except ValueError:
        choices = ", ".join(m.value for m in VibrationModel)
        raise ConfigError(f"{cfg.where(section, 'model')}: unknown model {model!r} "
                          f"(choose from {choices})") from None
    omega_v = cfg.float(section, "omega_v", 1.0)
    cutoff = cfg.float(section, "cutoff", DEFAULT_CUTOFF_FACTOR * omega_v)
    return _guard(cfg, section, VibronicParams,
                  omega_v=omega_v,
                  gamma=cfg.float(section, "gamma", 0.0),
                  huang_rhys=cfg.float(section, "S", required=True),
                  kT=cfg.float(section, "kT", 0.0),
                  model=model,
                  uv_cutoff=cutoff)


def vibration_or_modes(cfg: RunConfig):
    """Single mode from [vibration], or several if ``S`` and ``omega_v`` are lists."""
    S = cfg.floats("vibration", "S")
    wv = cfg.floats("vibration", "omega_v") or [1.0]
    if S is None or len(S) == 1 and len(wv) == 1:
        return vibration_from_config(cfg)
    if len(wv) == 1:
        wv = wv * len(S)
    if len(wv) != len(S):
        raise ConfigError(f"{cfg.where('vibration', 'omega_v')}: needs one value per S entry")
    kT = cfg.float("vibration", "kT", 0.0)
    modes = [_guard(cfg, "vibration", VibronicParams, w, 0.0, s, kT) for s, w in zip(S, wv)]
    return MultimodeParams(modes)


def molecule_from_config(cfg: RunConfig, vibration) -> MolecularParams:
    cfg.require("molecule")
    sec = "molecule"
    omega_m = cfg.float(sec, "omega_m", required=True)
    ext = cfg.float(sec, "kappa_m_ext", 0.0)
    kT_ = cfg.float(sec, "kappa_m_T", 0.0)
    kR_ = cfg.float(sec, "kappa_m_R", 0.0)
    if cfg.get(sec, "kappa_m") is not None:
        return _guard(cfg, sec, MolecularParams.with_total_linewidth, omega_m,
                      cfg.float(sec, "kappa_m"), vibration, ext=ext, T=kT_, R=kR_)
    return _guard(cfg, sec, MolecularParams, omega_m,
                  cfg.float(sec, "kappa_tilde", required=True), ext, kT_, kR_, vibration)


def plasmon_from_config(cfg: RunConfig, omega_default: float | None = None) -> PlasmonParams:
    cfg.require("plasmon")
    sec = "plasmon"
    kappa = cfg.float(sec, "kappa", required=True)
    return _guard(cfg, sec, PlasmonParams,
                  omega_c=cfg.float(sec, "omega_c", omega_default, required=omega_default is None),
                  kappa=kappa,
                  kappa_ext=cfg.float(sec, "kappa_ext", kappa / 2),
                  kappa_o_T=cfg.float(sec, "kappa_o_T", 0.0),
                  kappa_o_R=cfg.float(sec, "kappa_o_R", 0.0),
                  beta=cfg.float(sec, "beta", DEFAULT_BETA))


def coupling_from_config(cfg: RunConfig) -> tuple[float, int]:
    """``(g_N, N)``; either ``g_N`` directly or ``g`` with ``N`` (``g sqrt(N/3)``)."""
    cfg.require("coupling")
    sec = "coupling"
    N = cfg.int(sec, "N", 1)
    if N < 1:
        raise ConfigError(f"{cfg.where(sec, 'N')}: N must be >= 1")
    if cfg.get(sec, "g_N") is not None:
        return cfg.float(sec, "g_N"), N
    g = cfg.float(sec, "g", required=True)
    if cfg.bool(sec, "aligned", False):
        return g * math.sqrt(N), N
    return ensemble_g_N(g, N), N


def system_from_config(cfg: RunConfig, vibration) -> PolaritonSystem:
    mol = molecule_from_config(cfg, vibration)
    pl = plasmon_from_config(cfg, mol.omega_m)
    g_N, N = coupling_from_config(cfg)
    return PolaritonSystem(pl, mol, g_N, N)


def grid_from_config(cfg: RunConfig, name: str, default=None):
    """``{name}_min``, ``{name}_max`` and ``{name}_step`` from [grids]."""
    sec = "grids"
    lo = cfg.float(sec, f"{name}_min")
    hi = cfg.float(sec, f"{name}_max")
    step = cfg.float(sec, f"{name}_step")
    if lo is None and hi is None:
        return default
    if lo is None or hi is None or step is None:
        raise ConfigError(f"{cfg.where(sec)}: {name} grid needs _min, _max and _step")
    if not (hi > lo and step > 0):
        raise ConfigError(f"{cfg.where(sec, name + '_step')}: need max > min and step > 0")
    n = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(n)
