"""Survival-probability estimators: grid transfer operator, particles, oracles."""
from .curves import EndWindow, SurvivalCurve
from .grid import GaussianStep, GridConfig, GridDensity, LatticeStep, Process, grid_propagate, grid_survival
from .kernels import BACKEND

__all__ = ["EndWindow", "SurvivalCurve", "GaussianStep", "GridConfig", "GridDensity", "LatticeStep",
           "Process", "grid_propagate", "grid_survival", "BACKEND"]
