"""Strategic network formation: exact game algebra, link-switching dynamics,
motif potentials and mean-field density solvers."""

__version__ = "0.1.0"
