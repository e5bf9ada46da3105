"""Single-command experiment harness over cache, back end, viewer, collector."""

from corridor.orchestrator.config import RunConfig, parse_config
from corridor.orchestrator.runner import RunFailure, RunReport, compare_reports, run

__all__ = ["RunConfig", "RunFailure", "RunReport", "compare_reports", "parse_config", "run"]
