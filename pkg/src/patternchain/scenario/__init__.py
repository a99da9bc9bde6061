"""Scenario runner: DApp and Semi-DApp submission modes, JSON scripts and traces."""

from .bundle import bundled_scenarios, find_scenario, pattern_scenarios
from .runner import (AssertionFailed, ProviderUnavailable, Runner, ScenarioResult, Signer,
                     UserRejected, render_tx, run_scenario)
from .script import ParseError, ScenarioScript, load_script, parse_script
from .trace import TraceEvent, export_trace, load_trace, to_json_value, verify_trace

__all__ = [
    "AssertionFailed", "ParseError", "ProviderUnavailable", "Runner", "ScenarioResult",
    "ScenarioScript", "Signer", "TraceEvent", "UserRejected", "bundled_scenarios",
    "export_trace", "find_scenario", "load_script", "load_trace", "parse_script",
    "pattern_scenarios", "render_tx", "run_scenario", "to_json_value", "verify_trace",
]
