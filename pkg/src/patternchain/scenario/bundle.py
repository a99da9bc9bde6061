"""Scenario scripts shipped with the package."""

from pathlib import Path

BUNDLE_DIR = Path(__file__).parent / "bundled"


def bundled_scenarios() -> dict[str, Path]:
    return {p.stem: p for p in sorted(BUNDLE_DIR.glob("*.json"))}


def pattern_scenarios() -> dict[str, Path]:
    """The one-per-pattern scripts (numbered 01 to 19)."""
    return {k: v for k, v in bundled_scenarios().items() if k[:2].isdigit()}


def find_scenario(name: str) -> Path | None:
    scenarios = bundled_scenarios()
    if name in scenarios:
        return scenarios[name]
    matches = [p for k, p in scenarios.items() if k.split("-", 1)[-1] == name]
    return matches[0] if len(matches) == 1 else None
