"""vidskit: validate, generate, score and export VIDS imaging datasets."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Outcome,
    Profile,
    RuleId,
    ValidationReport,
    provenance_minimum_ok,
    rule_catalog,
)
from .validator import render_report, scan_dataset, validate  # noqa: E402

__all__ = [
    "__version__",
    "Outcome",
    "Profile",
    "RuleId",
    "ValidationReport",
    "provenance_minimum_ok",
    "render_report",
    "rule_catalog",
    "scan_dataset",
    "validate",
]
