"""Minimal feasible constants for families of linear inequalities."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog


def fit_constants(lhs, columns, names, lam=1e-2):
    """Minimise  sum_k w_k c_k  subject to  lhs_i <= sum_k columns[i, k] c_k,  c >= 0.

    The first constant has weight 1 and every other one weight ``lam``.
    Rows are rescaled before solving; margins are reported in original units.
    Returns ``(constants, margins, feasible)``.
    """
    lhs = np.asarray(lhs, float)
    A = np.asarray(columns, float).reshape(len(lhs), -1)
    k = A.shape[1]
    w = np.array([1.0] + [lam] * (k - 1))
    active = ~((np.abs(A).max(axis=1) == 0) & (lhs <= 0))
    if not active.any():
        c = np.zeros(k)
        return dict(zip(names, c.tolist())), (A @ c - lhs), True
    scale = np.maximum(np.abs(A[active]).max(axis=1), np.abs(lhs[active]))
    scale[scale == 0] = 1.0
    res = linprog(w, A_ub=-A[active] / scale[:, None], b_ub=-lhs[active] / scale,
                  bounds=[(0, None)] * k, method="highs")
    if res.status != 0:
        return dict(zip(names, [float("nan")] * k)), np.full(len(lhs), np.nan), False
    c = res.x.copy()
    # nudge up so tiny solver slack never shows as a negative margin
    margins = A @ c - lhs
    if (margins < 0).any():
        c = c * (1 + 1e-9) + 1e-15
        margins = A @ c - lhs
    return dict(zip(names, c.tolist())), margins, True
