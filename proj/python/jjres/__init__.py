"""Python access to the jjres C++ core."""

import json

from ._jjres import (
    ConvergenceError,
    DataError,
    DomainError,
    fit_linear,
    fr_vs_field,
    photon_number,
    run,
    s21_linear,
    single_photon_power,
    solve_photon_cubic,
)

__all__ = [
    "ConvergenceError",
    "DataError",
    "DomainError",
    "fit_linear",
    "fr_vs_field",
    "photon_number",
    "report",
    "run",
    "s21_linear",
    "single_photon_power",
    "solve_photon_cubic",
]


def report(*args):
    """Run a subcommand and return (exit_code, parsed JSON report)."""
    code, out, _ = run([str(a) for a in args])
    return code, (json.loads(out) if out.strip() else None)
