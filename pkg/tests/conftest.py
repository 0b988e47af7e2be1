import copy
import functools
import json

import pytest

from pipefdi import ScenarioConfig, default_config, run_scenario

ONSET = 100.0
FLOW_NOISE = {"flow_std_percent": 1.0, "head_std": 1e-3}
REFERENCE = {
    "E1": {"kind": "E1", "onset": ONSET, "percent_of_nominal": 11.11},
    "E2": {"kind": "E2", "onset": ONSET, "percent_of_nominal": 11.11},
    "E3": {"kind": "E3", "onset": ONSET, "magnitude": 1.6e-3},
    "E4": {"kind": "E4", "onset": ONSET, "magnitude": 1.6e-3},
    "E5": {"kind": "E5", "onset": ONSET, "position": 118.365, "flow_loss": 0.05,
           "opening_time": 5.0},
}


def scenario_dict(kind=None, *, noise=None, seed=0, horizon=300.0, fault=None, **sections):
    """Config document for one reference fault (or nominal when ``kind`` is None)."""
    d = default_config(False)
    d["name"] = kind or "nominal"
    if kind is not None:
        f = copy.deepcopy(REFERENCE[kind])
        f.update(fault or {})
        d["faults"] = [f]
    if noise:
        d["noise"] = dict(noise, seed=seed)
    d["run"]["horizon"] = horizon
    for key, val in sections.items():
        d[key] = {**d.get(key, {}), **val} if isinstance(val, dict) else val
    return d


def scenario(kind=None, **kw) -> ScenarioConfig:
    return ScenarioConfig.from_dict(scenario_dict(kind, **kw))


@functools.lru_cache(maxsize=None)
def _cached(key):
    kind, kw = json.loads(key)
    return run_scenario(scenario(kind, **kw))


def cached_run(kind=None, **kw):
    """Run a scenario once per test session (reports are treated as read-only)."""
    return _cached(json.dumps([kind, kw], sort_keys=True))


@pytest.fixture
def run_cached():
    return cached_run


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
