"""OMP, gOMP and James-Stein gOMP sparse recovery with a benchmark harness."""
