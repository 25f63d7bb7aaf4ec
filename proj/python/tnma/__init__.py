"""Python access to the tnma network meta-analysis core."""

import json
from pathlib import Path

from . import _core
from ._core import (
    DataError,
    NumericalError,
    UsageError,
    contrast_logprior,
    gp_condition,
    kernel_matrix,
    network,
    simulate,
)

__all__ = [
    "DataError",
    "NumericalError",
    "UsageError",
    "contrast_logprior",
    "gp_condition",
    "kernel_matrix",
    "network",
    "run_analysis",
    "run_simstudy",
    "schema_path",
    "simulate",
]


def run_analysis(input, out_dir, **options):
    """Fit one model and return the parsed summary.json.

    Keyword options mirror the ``tnma run`` flags: model, baseline,
    time_varying, chains, iters, burnin, thin, seed, grid, samples and
    effect_update.
    """
    return json.loads(_core.run_analysis(str(input), str(out_dir), **options))


def run_simstudy(skeleton, out_dir=None, **options):
    """Run the three-scenario simulation study and return its report."""
    out = None if out_dir is None else str(out_dir)
    return json.loads(_core.run_simstudy(str(skeleton), out, **options))


def schema_path():
    """Location of the summary.json schema matching this build."""
    here = Path(__file__).resolve().parent
    for candidate in (here / "schema", here.parents[1] / "schema"):
        path = candidate / f"summary.v{_core.summary_format_version}.schema.json"
        if path.exists():
            return path
    raise FileNotFoundError("summary schema not found next to the package")
