"""Convex-curve decoupling machinery and a numerical field lab."""
