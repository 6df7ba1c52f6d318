"""Session fixtures shared by the harness, plotting, and acceptance suites.

The three bundled case studies need their offline tables exactly once per
session; the receding-horizon results are cached alongside them because
several tests interrogate the same runs (cycle records, traces, plots).
"""

from dataclasses import replace

import pytest

from tubeplan.harness import prepare_tables, run
from tubeplan.scenario_io import load_scenario

CASE_STUDIES = ("narrow_gap", "angled_obstacle", "disturbance_gates")


@pytest.fixture(scope="session")
def cs_scenarios():
    return {name: load_scenario(name) for name in CASE_STUDIES}


@pytest.fixture(scope="session")
def cs_tables(cs_scenarios):
    return {name: prepare_tables(sc) for name, sc in cs_scenarios.items()}


@pytest.fixture(scope="session")
def cs_rax_results(cs_scenarios, cs_tables):
    return {
        name: run(sc, tables=cs_tables[name])
        for name, sc in cs_scenarios.items()
    }


@pytest.fixture(scope="session")
def cs_std_results(cs_scenarios, cs_tables):
    """Standard-mode counterparts; the gate course uses its worst-case
    realization since that is the configuration its claims are about."""
    out = {}
    for name, sc in cs_scenarios.items():
        overrides = {"mode": "standard_rtd"}
        if name == "disturbance_gates":
            overrides["realization"] = "corner"
        out[name] = run(replace(sc, **overrides), tables=cs_tables[name])
    return out


@pytest.fixture()
def announce(capsys):
    """Print a line that survives pytest capture (acceptance summaries)."""

    def emit(line: str) -> None:
        with capsys.disabled():
            print(line, flush=True)

    return emit
