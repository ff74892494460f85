"""Shared test utilities."""

import numpy as np

from latticewave.lattice import LatticeSpec, state_from_flat


def random_unit_state(spec: LatticeSpec, rng):
    psi = rng.normal(size=spec.state_dim) + 1j * rng.normal(size=spec.state_dim)
    return state_from_flat(psi / np.linalg.norm(psi), spec)


def match_multiset_on_circle(targets, pool, tol):
    """Greedily match complex targets against pool values; return worst distance.

    Pool entries are consumed as they match, so multiplicities are respected.
    Returns (worst_distance, leftover_pool).
    """
    pool = list(pool)
    worst = 0.0
    for tv in targets:
        dists = np.abs(np.asarray(pool) - tv)
        i = int(np.argmin(dists))
        worst = max(worst, float(dists[i]))
        pool.pop(i)
    return worst, pool
