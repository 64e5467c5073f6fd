"""Two-scale stochastic reaction-diffusion on a periodic lattice and its
deterministic limit."""

__version__ = "0.1.0"
