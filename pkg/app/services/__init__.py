"""Numerical services: circuit model, effective couplings, dynamics, experiments and tomography."""
