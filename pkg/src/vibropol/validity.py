"""Consistency check for the polaron decoupling of molecular and
vibrational damping.

The first correction to the decoupled dynamics is controlled by

    C = (gamma S / 2) [(n + 1) chi(omega_v + delta) + n chi(-omega_v + delta)],

which must stay small compared with one. At ``delta = -omega_v`` and with
the off-resonant ``chi(-2 omega_v)`` term dropped, it reduces to the closed
estimate ``gamma S / (kappa_tilde + gamma S) * (n + 1) / 2``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .molecular import chi
from .vibronic import VibronicParams

VALID_BELOW = 0.1
INVALID_FROM = 0.5
# n_th within this of 1 counts as the boundary, not as satisfied
NTH_BOUNDARY_TOL = 1e-9


class Verdict(str, enum.Enum):
    VALID = "valid"
    MARGINAL = "marginal"
    INVALID = "invalid"


class CForm(str, enum.Enum):
    FULL = "full"
    ESTIMATE = "estimate"


def consistency_parameter(vib: VibronicParams, kappa_tilde: float, delta: float | None = None,
                          form: str | CForm = CForm.FULL) -> float:
    """Magnitude of the consistency parameter.

    Parameters
    ----------
    vib
        Single-mode vibration; ``gamma`` and ``huang_rhys`` set the damping
        ``gamma S`` and ``kappa_m = kappa_tilde + gamma S``.
    kappa_tilde
        Bare electronic linewidth, ``>= 0``.
    delta
        Detuning at which the bracket is evaluated. Defaults to
        ``-omega_v``, where the correction is largest.
    form
        ``"full"`` evaluates the bracket; ``"estimate"`` returns the closed
        form valid at ``delta = -omega_v`` and ignores ``delta``.

    Notes
    -----
    Evaluating the full bracket at ``delta = -omega_v`` and dropping the
    ``n chi(-2 omega_v)`` term gives ``gamma S (n + 1) / kappa_m``, twice
    the closed estimate. Both are exposed; the verdict uses the full form.
    """
    if kappa_tilde < 0:
        raise ValueError("kappa_tilde must be >= 0")
    form = CForm(form)
    gs = vib.gamma * vib.huang_rhys
    if gs == 0:
        return 0.0
    n = vib.n_th
    kappa_m = kappa_tilde + gs
    if form is CForm.ESTIMATE:
        return gs / kappa_m * (n + 1) / 2
    d = -vib.omega_v if delta is None else delta
    c = 0.5 * gs * ((n + 1) * chi(vib.omega_v + d, kappa_m) + n * chi(-vib.omega_v + d, kappa_m))
    return float(abs(c))


@dataclass(frozen=True)
class ValidityReport:
    c_estimate: float
    c_full: float
    main_text_condition: bool
    nth_condition: bool
    verdict: Verdict

    def lines(self) -> list[str]:
        return [
            f"C (estimate)        {self.c_estimate:.6g}",
            f"C (full, delta=-wv) {self.c_full:.6g}",
            f"omega_v/kT > gamma S / (2 kappa_m)  {self.main_text_condition}",
            f"n_th < 1            {self.nth_condition}",
            f"verdict             {self.verdict.value}",
        ]


def validity_report(vib: VibronicParams, kappa_tilde: float) -> ValidityReport:
    """Collect both forms of the parameter and the two simple conditions.

    The verdict is ``invalid`` when the full parameter reaches 0.5,
    ``marginal`` when it reaches 0.1 or either condition fails, and
    ``valid`` otherwise.
    """
    est = consistency_parameter(vib, kappa_tilde, form=CForm.ESTIMATE)
    full = consistency_parameter(vib, kappa_tilde, form=CForm.FULL)
    gs = vib.gamma * vib.huang_rhys
    kappa_m = kappa_tilde + gs
    if vib.kT == 0:
        main = True
    else:
        main = vib.omega_v / vib.kT > gs / (2 * kappa_m)
    nth_ok = vib.n_th < 1 - NTH_BOUNDARY_TOL
    if gs == 0:
        # without vibrational damping there is nothing to decouple
        verdict = Verdict.VALID
    elif full >= INVALID_FROM:
        verdict = Verdict.INVALID
    elif full >= VALID_BELOW or not (main and nth_ok):
        verdict = Verdict.MARGINAL
    else:
        verdict = Verdict.VALID
    return ValidityReport(est, full, main, nth_ok, verdict)


def boundary_temperature(omega_v: float) -> float:
    """Temperature ``omega_v / ln 2`` at which ``n_th = 1``."""
    return omega_v / math.log(2)
