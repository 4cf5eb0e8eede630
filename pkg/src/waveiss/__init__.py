"""Simulation and input-to-state stability verification for damped strings.

Submodules: ``model`` (parameters, inputs, initial data), ``discretize``
(grid and difference operators), ``solver`` (Crank-Nicolson stepping),
``functionals`` (energies and Lyapunov functionals), ``certificates``
(closed-form ISS constants), ``harness`` (verification experiments) and
``cli`` (batch front end).
"""

from waveiss.certificates import IssCertificate, certificate, certificate_for, optimize_r
from waveiss.discretize import Grid
from waveiss.model import (
    DisturbanceSpec,
    InitialData,
    ModelVariant,
    PhysicalParams,
    ThermoacousticParams,
    validate,
)
from waveiss.solver import Trajectory, run, run_thermoacoustic, step

__version__ = "0.1.0"

__all__ = [
    "DisturbanceSpec",
    "Grid",
    "InitialData",
    "IssCertificate",
    "ModelVariant",
    "PhysicalParams",
    "ThermoacousticParams",
    "Trajectory",
    "certificate",
    "certificate_for",
    "optimize_r",
    "run",
    "run_thermoacoustic",
    "step",
    "validate",
]
