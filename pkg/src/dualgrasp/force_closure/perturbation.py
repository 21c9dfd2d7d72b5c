"""Analytic disturbance proxy: the share of a fixed wrench set a grasp can resist.

This replaces physics-based success rates with a purely static check. Each
wrench in the set gets its own force-closure program over the same contacts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry.mesh import MassProperties
from ..wrench import ContactFrame, grasp_matrix
from .problem import GRAVITY, LOSS_THRESHOLD, ConeProgram, ExternalWrench, label, solve_many
from .socp import SolverOptions


@dataclass(frozen=True)
class WrenchSet:
    """Gravity-magnitude forces along the six axis directions, plus downward
    gravity combined with a torque of ``torque_fraction * m * g * lever_arm``
    about each axis in both senses (12 wrenches by default)."""

    axis_forces: bool = True
    torque_fraction: float = 0.2
    lever_arm: float = 0.05  # m
    g: float = GRAVITY

    def __post_init__(self):
        if self.torque_fraction < 0 or self.lever_arm < 0 or not self.g > 0:
            raise ValueError("torque_fraction and lever_arm must be >= 0 and g > 0")

    def wrenches(self, mass: float) -> list[ExternalWrench]:
        mg = mass * self.g
        out = []
        if self.axis_forces:
            for axis in range(3):
                for sign in (1.0, -1.0):
                    w = np.zeros(6)
                    w[axis] = sign * mg
                    out.append(ExternalWrench(w))
        if self.torque_fraction > 0:
            tau = self.torque_fraction * mg * self.lever_arm
            for axis in range(3):
                for sign in (1.0, -1.0):
                    w = np.zeros(6)
                    w[2] = -mg
                    w[3 + axis] = sign * tau
                    out.append(ExternalWrench(w))
        return out


def perturbation_eval(frames: list[ContactFrame], mass_props: MassProperties, mu: float, f_high: float,
                      k_set: WrenchSet = WrenchSet(), opts: SolverOptions = SolverOptions(),
                      threshold: float = LOSS_THRESHOLD) -> float:
    """Fraction of ``k_set`` wrenches resisted (loss at most ``threshold``).

    Contact positions in ``frames`` must be relative to the center of mass.
    """
    G = grasp_matrix(frames)
    progs = [ConeProgram(G, w, float(mu), float(f_high)) for w in k_set.wrenches(mass_props.mass)]
    if not progs:
        raise ValueError("empty wrench set")
    sols = solve_many(progs, opts)
    return sum(label(s, threshold) for s in sols) / len(sols)
