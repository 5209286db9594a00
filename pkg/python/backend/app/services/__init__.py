"""Numerical services: hypergeom, polyfam, chain, oracle, dynamics, verify."""
