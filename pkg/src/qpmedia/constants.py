"""Unit constants used at the package boundaries.

All internal computations are in Hartree atomic units; conversions happen
only at the CLI/file boundary.
"""

HARTREE_TO_EV = 27.211386245988
"""CODATA Hartree energy expressed in electronvolt."""

BOHR_PER_ANGSTROM = 1.8897259886
"""One angstrom in Bohr radii."""

SPEED_OF_LIGHT_AU = 137.035999
"""Speed of light in atomic units (inverse fine-structure constant)."""
