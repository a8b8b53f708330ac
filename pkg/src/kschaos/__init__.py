"""Simulation and verification suite for the sub-critical Keller-Segel model."""

import os

# the TBB layer shipped with some numba wheels is too old and only warns
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
# POT probes every array library it knows at import; only numpy is used here
for _lib in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_lib}", "1")
if os.environ.get("KS_DETERMINISTIC") == "1":
    os.environ["NUMBA_NUM_THREADS"] = "1"

__version__ = "0.1.0"

from .kernel import KernelParams  # noqa: E402
from .particles import InitialCondition, ParticleState, SimConfig, Trajectory, simulate  # noqa: E402

__all__ = ["KernelParams", "InitialCondition", "ParticleState", "SimConfig", "Trajectory", "simulate", "__version__"]
