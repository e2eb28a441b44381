"""Simulation toolkit for directed random walks in random potentials
on Z^d and on Bernoulli bond-percolation clusters."""

import os

# single-process work queue: deterministic and warning-free on any libc
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"
