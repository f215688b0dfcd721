"""Small dense linear solves shared by the exact solvers."""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg

from .models import SolverError

log = logging.getLogger("fbq.linsys")

PIVOT_RTOL = 1e-12   # relative pivot threshold declaring the system singular
NEG_PROB_TOL = 1e-9  # solved probabilities below -tol abort; above are clamped


def solve_probability_system(a_rows, b_vec) -> np.ndarray:
    """Row-scaled dense solve whose unknowns are probabilities.

    Raises SolverError (with a condition estimate) when a pivot collapses,
    and applies the negative-value policy: anything below -NEG_PROB_TOL is a
    formulation bug, anything in [-tol, 0) is roundoff and gets clamped.
    """
    a = np.array(a_rows, dtype=float)
    b = np.array(b_vec, dtype=float)
    scale = np.abs(a).max(axis=1)
    if (scale == 0).any():
        raise SolverError("degenerate parameter set: zero row in the linear system")
    a /= scale[:, None]
    b /= scale
    lu, piv = scipy.linalg.lu_factor(a)
    pivmin = np.abs(np.diag(lu)).min()
    if pivmin < PIVOT_RTOL * np.abs(a).max():
        raise SolverError(
            f"singular linear system (pivot {pivmin:.3e}, cond ~ {np.linalg.cond(a):.3e}); "
            "degenerate parameter set"
        )
    x = scipy.linalg.lu_solve((lu, piv), b)
    bad = x < -NEG_PROB_TOL
    if bad.any():
        raise SolverError(f"solved probability {x[bad].min():.3e} below tolerance; formulation bug")
    if (x < 0).any():
        log.warning("clamping %d slightly negative probabilities (min %.2e)", int((x < 0).sum()), x.min())
        x = np.clip(x, 0.0, None)
    return x
