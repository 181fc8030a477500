"""Dense two-phase simplex for small linear programs.

Solves::

    maximize    c @ x
    subject to  A_eq @ x == b_eq
                A_ub @ x <= b_ub
                x >= lower            (lower may be -inf per variable)

Pivoting uses Dantzig's rule and falls back to Bland's rule for the rest of
the phase after a run of degenerate pivots, which guarantees termination.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NumericalBreakdown

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-11
BOUND_TOL = 1e-9
DEGENERATE_RUN = 20


class LpStatus(enum.Enum):
    OPTIMAL = "OPTIMAL"
    INFEASIBLE = "INFEASIBLE"
    UNBOUNDED = "UNBOUNDED"


@dataclass(eq=False)
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lower: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "eq")
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "ub")
        if self.lower is None:
            self.lower = np.zeros(n)
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        if self.lower.size != n:
            raise DimensionMismatch(f"lower has {self.lower.size} entries, expected {n}")
        for name in ("c", "A_eq", "b_eq", "A_ub", "b_ub"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")
        if np.any(np.isnan(self.lower)) or np.any(self.lower == np.inf):
            raise ValueError("lower bounds must be finite or -inf")

    @property
    def n(self):
        return self.c.size


def _rows(A, b, n, tag):
    if A is None:
        if b is not None and np.size(b):
            raise DimensionMismatch(f"b_{tag} given without A_{tag}")
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        A = A.reshape(0, n)
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[1] != n:
        raise DimensionMismatch(f"A_{tag} has {A.shape[1]} columns, expected {n}")
    if A.shape[0] != b.size:
        raise DimensionMismatch(f"A_{tag} has {A.shape[0]} rows but b_{tag} has {b.size}")
    return A, b


@dataclass(eq=False)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective_value: float = math.nan
    dual_eq: np.ndarray | None = None
    dual_ub: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    """Row-reduced tableau ``[A | b]`` with an objective row of reduced costs."""

    def __init__(self, A, b, basis):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.row_ids = list(range(m))
        self.iterations = 0

    @property
    def m(self):
        return len(self.basis)

    def set_objective(self, cost):
        # reduced cost row: c_j - c_B B^-1 A_j (we maximize, so enter on positive)
        n = self.T.shape[1] - 1
        row = np.zeros(n + 1)
        row[:n] = cost
        cb = cost[self.basis]
        row -= cb @ self.T[:-1]
        self.T[-1] = row

    def pivot(self, r, col):
        T = self.T
        piv = T[r, col]
        T[r] /= piv
        colv = T[:, col].copy()
        colv[r] = 0.0
        T -= np.outer(colv, T[r])
        T[:, col] = 0.0
        T[r, col] = 1.0
        self.basis[r] = col
        self.iterations += 1

    def run(self, allowed, max_iter):
        """Iterate to optimality over columns where ``allowed`` is True.

        Returns "optimal" or "unbounded".
        """
        T = self.T
        degenerate = 0
        bland = False
        while True:
            if self.iterations > max_iter:
                raise NumericalBreakdown("simplex iteration limit exceeded")
            red = T[-1, :-1]
            cand = np.flatnonzero(allowed & (red > 1e-9))
            if cand.size == 0:
                return "optimal"
            if bland:
                col = int(cand[0])
            else:
                col = int(cand[np.argmax(red[cand])])
            colv = T[:-1, col]
            # pivot entries are judged relative to the column's largest entry
            scale = np.abs(colv).max() if colv.size else 0.0
            rows = np.flatnonzero(colv > PIVOT_TOL * max(1.0, scale))
            if rows.size == 0:
                # only negligible entries: the step length is effectively
                # unlimited, so treat the ray as unbounded
                return "unbounded"
            rhs = np.maximum(T[rows, -1], 0.0)
            ratios = rhs / colv[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            if bland:
                # smallest basic index among ties (Bland's leaving rule)
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(ties[np.argmax(colv[ties])])
            if best <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, col)


def solve_lp(lp: LinearProgram, max_iter: int | None = None) -> LpSolution:
    """Maximize ``lp.c @ x``; see the module docstring for the problem form."""
    n = lp.n
    lower = lp.lower
    free = np.isneginf(lower)
    shift = np.where(free, 0.0, lower)

    # standard-form columns: one per bounded variable, two per free one
    neg_vars = np.flatnonzero(free)
    n_struct = n + neg_vars.size
    m_e, m_u = lp.A_eq.shape[0], lp.A_ub.shape[0]
    m = m_e + m_u

    A_orig = np.vstack([lp.A_eq, lp.A_ub])
    b = np.concatenate([lp.b_eq, lp.b_ub]) - A_orig @ shift
    # equilibrate rows so that badly scaled rows do not set the pivot tolerance
    row_scale = np.abs(A_orig).max(axis=1) if m else np.zeros(0)
    row_scale = np.where(row_scale > 0.0, row_scale, 1.0)
    A_orig = A_orig / row_scale[:, None]
    b = b / row_scale
    A = np.zeros((m, n_struct + m_u))
    A[:, :n] = A_orig
    A[:, n:n_struct] = -A_orig[:, neg_vars]
    A[m_e:, n_struct:] = np.eye(m_u)
    cost = np.zeros(n_struct + m_u)
    cost[:n] = lp.c
    cost[n:n_struct] = -lp.c[neg_vars]

    sign = np.where(b < 0.0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign

    n_std = A.shape[1]
    basis = []
    art_rows = []
    for i in range(m):
        if i >= m_e and sign[i] > 0:
            basis.append(n_struct + (i - m_e))
        else:
            art_rows.append(i)
            basis.append(None)
    n_art = len(art_rows)
    A_full = np.zeros((m, n_std + n_art))
    A_full[:, :n_std] = A
    for k, i in enumerate(art_rows):
        A_full[i, n_std + k] = 1.0
        basis[i] = n_std + k

    if max_iter is None:
        max_iter = 50 * (m + n_std + n_art) + 1000
    tab = _Tableau(A_full, b, basis)
    allowed = np.ones(n_std + n_art, dtype=bool)

    if n_art:
        phase1 = np.zeros(n_std + n_art)
        phase1[n_std:] = -1.0
        tab.set_objective(phase1)
        tab.run(allowed, max_iter)
        infeas = sum(max(tab.T[r, -1], 0.0)
                     for r, bv in enumerate(tab.basis) if bv >= n_std)
        if infeas > FEAS_TOL:
            return LpSolution(LpStatus.INFEASIBLE, iterations=tab.iterations)
        _drive_out_artificials(tab, n_std)
        allowed[n_std:] = False

    tab.set_objective(np.concatenate([cost, np.zeros(n_art)]))
    outcome = tab.run(allowed, max_iter)
    if outcome == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, iterations=tab.iterations)

    # refine the basic solution against the original standard-form data
    rows = tab.row_ids
    B = A[rows][:, tab.basis]
    try:
        xb = np.linalg.solve(B, b[rows])
        y_std = np.linalg.solve(B.T, cost[tab.basis])
    except np.linalg.LinAlgError:
        xb = None
        y_std = np.linalg.lstsq(B.T, cost[tab.basis], rcond=None)[0]
    if xb is None or not np.all(np.isfinite(xb)) or np.any(xb < -FEAS_TOL):
        # ill-conditioned basis: keep the tableau's own values, checked below
        xb = tab.T[:-1, -1]
    x_std = np.zeros(n_std)
    x_std[tab.basis] = xb
    x_std = np.maximum(x_std, 0.0)

    x = shift + x_std[:n]
    x[neg_vars] -= x_std[n:n_struct]

    y = np.zeros(m)
    y[rows] = y_std
    y *= sign / row_scale
    sol = LpSolution(LpStatus.OPTIMAL, x=x, objective_value=float(lp.c @ x),
                     dual_eq=y[:m_e], dual_ub=y[m_e:], iterations=tab.iterations)
    _check_feasible(lp, sol)
    return sol


def _drive_out_artificials(tab, n_std):
    """Pivot zero-level artificials out of the basis; drop redundant rows."""
    keep = []
    for r in range(tab.m):
        if tab.basis[r] < n_std:
            keep.append(r)
            continue
        row = tab.T[r, :n_std]
        nz = np.flatnonzero(np.abs(row) > 1e-9)
        if nz.size:
            tab.pivot(r, int(nz[np.argmax(np.abs(row[nz]))]))
            keep.append(r)
    # rows still holding an artificial are linearly dependent on the others
    if len(keep) < tab.m:
        tab.T = tab.T[keep + [tab.T.shape[0] - 1]]
        tab.basis = [tab.basis[r] for r in keep]
        tab.row_ids = [tab.row_ids[r] for r in keep]


def _check_feasible(lp, sol):
    x = sol.x
    if lp.A_eq.size and np.max(np.abs(lp.A_eq @ x - lp.b_eq)) > FEAS_TOL:
        raise NumericalBreakdown("equality residual exceeds tolerance")
    if lp.A_ub.size and np.max(lp.A_ub @ x - lp.b_ub) > FEAS_TOL:
        raise NumericalBreakdown("inequality violated beyond tolerance")
    bounded = ~np.isneginf(lp.lower)
    if np.any(x[bounded] < lp.lower[bounded] - BOUND_TOL):
        raise NumericalBreakdown("variable bound violated")
