"""Inverse eigenvalue solver for fixed-free mass-spring-inerter chains."""
