"""Power and thermal budget engine.

Per-cell pulsing dissipation follows the switched-capacitor law

    p_pulse = c_pulse * c_p / (c_p + c_pulse) * (v_high - v_low)**2 * f

(the full swing's worth of series-capacitance energy is burned in the
switch resistance each cycle, independent of its value).  Block powers
add linearly; power maps to temperature through a measured calibration
curve rather than a physical conductance model, because interpolating
measured points is exactly what the underlying measurement procedure
provides.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

from .errors import SimulationError


class NotConfigured(SimulationError):
    pass


@dataclass(frozen=True)
class PowerModel:
    """Coefficients for the dissipation blocks.

    The cell term is carried as the two capacitances so it scales exactly
    quadratically with drive swing.  FSM and clock energies default to 0:
    no trustworthy per-cycle numbers exist for those blocks, so non-zero
    values must come from configuration.  When `master_freq_hz` is set the
    clock block runs at that fixed rate; otherwise it follows the
    operating frequency.
    """

    c_pulse: float = 1e-12
    c_p: float = 1e-12
    fsm_energy_per_cycle: float = 0.0
    clock_energy_per_cycle: float = 0.0
    static_floor_w: float = 0.0
    master_freq_hz: float | None = None

    def __post_init__(self) -> None:
        if self.c_pulse <= 0 or self.c_p <= 0:
            raise ValueError("capacitances must be positive")
        if min(self.fsm_energy_per_cycle, self.clock_energy_per_cycle,
               self.static_floor_w) < 0:
            raise ValueError("power coefficients must be non-negative")

    @classmethod
    def from_cell_coefficient(
        cls, watts_per_hz_per_cell: float, ref_swing: float, **kwargs
    ) -> "PowerModel":
        """Build from a measured per-cell cost (W/Hz) at a reference swing.

        Example: 18 nW/MHz at 0.1 V pulsing is 18e-15 W/Hz, giving a
        1.8 pF series capacitance, split here as two equal capacitors.
        """
        if ref_swing <= 0:
            raise ValueError("ref_swing must be positive")
        c_series = watts_per_hz_per_cell / ref_swing**2
        return cls(c_pulse=2.0 * c_series, c_p=2.0 * c_series, **kwargs)

    def cell_energy_per_cycle(self, swing: float) -> float:
        """Energy one cell burns per pulse cycle at the given swing."""
        return pulse_power(self.c_pulse, self.c_p, swing, 0.0, 1.0)


@dataclass(frozen=True)
class ThermalCalibration:
    """Measured (power, temperature) points above a zero-power base."""

    points: tuple[tuple[float, float], ...]
    base_temperature_k: float = 0.036

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("calibration needs at least 2 points")
        last_p, last_t = 0.0, self.base_temperature_k
        for p, t in self.points:
            if p <= last_p or t <= last_t:
                raise ValueError("points must increase strictly in both coordinates")
            last_p, last_t = p, t


@dataclass(frozen=True)
class CoolingBudget:
    """Refrigerator cooling power at the qubit operating temperature."""

    budget_watts_at_100mk: float
    coax_power_per_line: float | None = None

    def __post_init__(self) -> None:
        if self.budget_watts_at_100mk <= 0:
            raise ValueError("budget must be positive")
        if self.coax_power_per_line is not None and self.coax_power_per_line <= 0:
            raise ValueError("coax_power_per_line must be positive")


@dataclass(frozen=True)
class FeasibilityResult:
    total_watts: float
    budget_watts: float
    feasible: bool
    headroom_watts: float


def pulse_power(c_pulse: float, c_p: float, v_high: float, v_low: float, f: float) -> float:
    """Dissipation of one pulsing cell at frequency `f` (exact closed form)."""
    if c_pulse <= 0 or c_p <= 0:
        raise ValueError("capacitances must be positive")
    if f < 0:
        raise ValueError("frequency must be non-negative")
    swing = v_high - v_low
    return c_pulse * c_p / (c_p + c_pulse) * (swing * swing) * f


def total_power(n_cells: float, f: float, swing: float, model: PowerModel) -> float:
    """System power: static floor + clock + FSM + n_cells pulsing cells.

    Monotone nondecreasing in every argument.  `n_cells` may be fractional
    for projections (crossover roots, contour lines).
    """
    if n_cells < 0:
        raise ValueError("n_cells must be non-negative")
    f_clock = model.master_freq_hz if model.master_freq_hz is not None else f
    return (
        model.static_floor_w
        + model.clock_energy_per_cycle * f_clock
        + model.fsm_energy_per_cycle * f
        + n_cells * pulse_power(model.c_pulse, model.c_p, swing, 0.0, f)
    )


def temperature(p_watts: float, cal: ThermalCalibration) -> float:
    """Temperature for a dissipation level, interpolating the calibration.

    Piecewise linear through (0, base) and the calibration points; knots
    reproduce exactly; beyond the last point the final segment is
    extrapolated.
    """
    if p_watts < 0:
        raise ValueError("power must be non-negative")
    knots = [(0.0, cal.base_temperature_k), *cal.points]
    powers = [p for p, _ in knots]
    idx = bisect_right(powers, p_watts) - 1
    if idx >= 0 and powers[idx] == p_watts:
        return knots[idx][1]
    if idx >= len(knots) - 1:
        idx = len(knots) - 2  # extrapolate the last segment
    (p0, t0), (p1, t1) = knots[idx], knots[idx + 1]
    return t0 + (t1 - t0) * (p_watts - p0) / (p1 - p0)


def feasible(
    n_cells: int, f: float, swing: float, model: PowerModel, budget: CoolingBudget
) -> FeasibilityResult:
    """Does the projected load fit in the refrigerator's cooling power?"""
    total = total_power(n_cells, f, swing, model)
    return FeasibilityResult(
        total_watts=total,
        budget_watts=budget.budget_watts_at_100mk,
        feasible=total <= budget.budget_watts_at_100mk,
        headroom_watts=budget.budget_watts_at_100mk - total,
    )


def coax_comparison(n_lines: int, budget: CoolingBudget) -> float:
    """Effective dissipation of `n_lines` conventional coaxial control lines.

    No representative per-line figure ships with the package; it must be
    configured explicitly.
    """
    if budget.coax_power_per_line is None:
        raise NotConfigured("coax_power_per_line is not configured")
    if n_lines < 0:
        raise ValueError("n_lines must be non-negative")
    return n_lines * budget.coax_power_per_line


def feasibility_map(
    n_values: Sequence[int],
    f_values: Sequence[float],
    swing: float,
    model: PowerModel,
    budget: CoolingBudget,
) -> list[tuple[int, float, float, int]]:
    """Rows (n_cells, f_hz, total_watts, feasible) over an (N, f) grid."""
    rows = []
    for n in n_values:
        for f in f_values:
            r = feasible(n, f, swing, model, budget)
            rows.append((int(n), float(f), r.total_watts, int(r.feasible)))
    return rows
