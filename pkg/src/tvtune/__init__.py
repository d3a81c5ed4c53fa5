"""Torque-vectoring controller tuning: vehicle plant, allocator, RL and GA tuners."""

__version__ = "0.1.0"
