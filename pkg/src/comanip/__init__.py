"""Torque-level hybrid motion-force control for teams of legged manipulators
rigidly co-grasping an object, plus a constrained rigid-body simulator that
replays the validation scenarios."""

__version__ = "0.1.0"
