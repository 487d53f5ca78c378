import numpy as np


def paired_bootstrap_upper(diff, n_boot=10000, level=0.95, seed=0):
    """One-sided upper percentile bound on the mean of paired differences."""
    diff = np.asarray(diff, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, diff.size, (n_boot, diff.size))
    return float(np.quantile(diff[idx].mean(axis=1), level))
