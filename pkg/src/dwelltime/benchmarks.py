"""Benchmark systems and published reference values used by the tutorials and tests."""
from __future__ import annotations

import numpy as np

from .model import ImpulsiveSystem, SampledDataSystem

KAPPA_T1 = (0.0, 0.3, 0.6, 0.9, 1.2)
DELTA_T1 = (0.0, 0.6, 1.2, 1.8, 2.4)
KAPPA_T4 = (0.0, 0.75, 1.5, 2.75, 3.0)
DELTA_T4 = (0.0, 0.2, 0.4, 0.6, 0.8)


def example_constant(kappa: float = 0.0, delta: float = 0.0) -> ImpulsiveSystem:
    """Unstable jumps, stable flow: stable for large enough dwell-times."""
    A = np.array([[-1.0, 0.0], [1.0, -2.0]])
    J = np.array([[2.0, 1.0], [1.0, 3.0]])
    return ImpulsiveSystem.build(A, J, E_c=kappa * np.eye(2), E_d=delta * np.eye(2))


def example_ranged(kappa: float = 0.0, delta: float = 0.0) -> ImpulsiveSystem:
    """Unstable flow, contracting jumps: stable for short enough dwell-times."""
    A = np.array([[1.0, 3.0], [-1.0, 2.0]])
    J = 0.5 * np.eye(2)
    return ImpulsiveSystem.build(A, J, E_c=kappa * np.eye(2), E_d=delta * np.eye(2))


def example_feedback() -> ImpulsiveSystem:
    """Open-loop unstable system with continuous and discrete inputs."""
    return ImpulsiveSystem.build(
        A=[[1.0, 1.0], [1.0, -2.0]],
        J=[[3.0, 1.0], [1.0, 2.0]],
        E_c=[[1.0, 0.0], [1.0, 2.0]],
        E_d=0.2 * np.array([[1.0, 0.0], [1.0, -1.0]]),
        B_c1=[[4.0], [0.0]],
        B_c2=[[1.0], [0.0]],
        B_d1=[[1.0], [0.0]],
        B_d2=[[0.0], [0.1]],
    )


def example_sampled_data(alpha: float = 0.1) -> SampledDataSystem:
    return SampledDataSystem(
        A_sd=[[0.0, 1.0], [0.0, -1.0]],
        B_sd=[[0.0], [1.0]],
        E_sd=[[0.0, 0.0], [0.0, 0.1]],
        alpha=alpha,
    )


# published values; rows are kappa, columns delta
TABLE1 = np.array([
    [1.1406, 1.1568, 1.2031, 1.2734, 1.3595],
    [1.1918, 1.2089, 1.2578, 1.3319, 1.4225],
    [1.3787, 1.3992, 1.4577, 1.5458, 1.6531],
    [1.8774, 1.9073, 1.9920, 2.1184, 2.2702],
    [3.9306, 4.0011, 4.1938, 4.4765, 4.8305],
])
TABLE2 = np.array([
    [1.1406, 1.1568, 1.2030, 1.2732, 1.3593],
    [1.1918, 1.2089, 1.2577, 1.3317, 1.4223],
    [1.3787, 1.3992, 1.4576, 1.5456, 1.6528],
    [1.8773, 1.9072, 1.9918, 2.1181, 2.2700],
    [3.9315, 4.0005, 4.1932, 4.4752, 4.8083],
])
TABLE3 = np.array([
    [1.1406, 1.1568, 1.2031, 1.2734, 1.3595],
    [1.1918, 1.2089, 1.2578, 1.3319, 1.4225],
    [1.3787, 1.3992, 1.4577, 1.5458, 1.6531],
    [1.8774, 1.9073, 1.9920, 2.1184, 2.2703],
    [3.9307, 4.0012, 4.1941, 4.4776, 4.8565],
])
TABLE4_SOS = np.array([
    [0.4620, 0.4126, 0.2971, 0.1647, 0.0388],
    [0.3891, 0.3474, 0.2502, 0.1387, 0.0327],
    [0.2640, 0.2357, 0.1698, 0.0941, 0.0221],
    [0.1312, 0.1171, 0.0844, 0.0467, 0.0110],
    [0.1154, 0.1031, 0.0742, 0.0411, 0.0064],
])
TABLE4 = np.array([
    [0.4620, 0.4126, 0.2971, 0.1647, 0.0388],
    [0.3891, 0.3474, 0.2502, 0.1387, 0.0327],
    [0.2640, 0.2357, 0.1698, 0.0941, 0.0221],
    [0.1312, 0.1171, 0.0844, 0.0467, 0.0110],
    [0.1155, 0.1031, 0.0742, 0.0411, 0.0411],
])
TABLE4_UNRELIABLE = {(4, 4)}  # kappa = 3, delta = 0.8
T_MIN_T4 = 0.01

TABLE5 = [
    ((0.001, 0.1), (-0.4069, -0.1734, -0.0045)),
    ((0.001, 0.5), (-0.4421, -0.2137, -0.0215)),
    ((0.001, 1.0), (-0.3410, -0.1332, 0.0036)),
    ((1.0, 5.0), (-0.1977, -0.1931, 0.0014)),
    ((1.0, 10.0), (-0.1053, -0.1061, 0.0011)),
    ((1.0, 20.0), (-0.0583, -0.0559, -0.0003)),
]
FEEDBACK_KD = (-3.9165, -2.9751)
