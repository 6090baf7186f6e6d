"""Shared helpers for the test suite."""
from __future__ import annotations

import pytest

from clfgsim import analog, engine


@pytest.fixture
def default_cell() -> analog.ClfgCell:
    return analog.ClfgCell()


@pytest.fixture
def rails() -> analog.SupplyRails:
    return analog.SupplyRails(v_high=0.1, v_low=-0.1, v_hold=-1.1)


def make_scenario(**kwargs) -> engine.Scenario:
    """Build a scenario document with sensible test defaults."""
    raw = {
        "schema_version": 1,
        "name": kwargs.pop("name", "test"),
        "duration_s": kwargs.pop("duration_s", 1.0),
        "traces": kwargs.pop("traces", {"sample_rate_hz": 10.0}),
    }
    raw.update(kwargs)
    return engine.build_scenario(raw)


def lock_then_open_schedule(cell_mask: int, open_time_s: float) -> list[dict]:
    """Lock the masked cells at t=0, release them at `open_time_s`."""
    return [
        {"t": 0.0, "write": ["CTRL", 2]},
        {"t": 0.0, "write": ["LOCK_MASK_LO", cell_mask & 0xFFFF]},
        {"t": 0.0, "write": ["LOCK_MASK_HI", (cell_mask >> 16) & 0xFFFF]},
        {"t": 0.0, "exec": True},
        {"t": open_time_s, "write": ["LOCK_MASK_LO", 0]},
        {"t": open_time_s, "write": ["LOCK_MASK_HI", 0]},
        {"t": open_time_s, "exec": True},
    ]
