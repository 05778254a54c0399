"""Dense two-phase simplex with Bland's anti-cycling rule.

Small deterministic LP kernel backing core membership, nucleolus stages and
transfer synthesis. Problems here are tiny (tens of rows), so the solver
favors exactness and reproducibility over speed: dense numpy tableau, no
scaling, no presolve, smallest-index pivoting throughout.

Conventions:
  * variables default to x >= 0; bounds may open either side (use -inf/+inf),
  * row senses are "<=", ">=", "==",
  * reported row duals are shadow prices d(objective)/d(rhs) in the
    *minimization* reading of the problem (a maximized objective is negated
    internally and the duals refer to the negated objective).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IterationLimitError

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
MAX_PIVOTS = 10_000

_SENSES = ("<=", ">=", "==")


@dataclass
class LinearProgram:
    """min (or max) objective @ x  subject to  lhs @ x (sense) rhs, bounds."""

    objective: np.ndarray
    lhs: np.ndarray
    senses: tuple
    rhs: np.ndarray
    lower: np.ndarray | None = None   # None -> zeros
    upper: np.ndarray | None = None   # None -> +inf
    maximize: bool = False


@dataclass
class LpSolution:
    status: str                       # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None
    iterations: int
    duals: np.ndarray | None = None   # per original row; 0 for rows found redundant


def _validate(lp: LinearProgram):
    c = np.asarray(lp.objective, dtype=float)
    a = np.asarray(lp.lhs, dtype=float)
    b = np.asarray(lp.rhs, dtype=float)
    if c.ndim != 1:
        raise ValueError("objective must be a vector")
    n = c.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"lhs must be m x {n}, got {a.shape}")
    m = a.shape[0]
    if b.shape != (m,):
        raise ValueError(f"rhs must have length {m}, got {b.shape}")
    senses = tuple(lp.senses)
    if len(senses) != m or any(s not in _SENSES for s in senses):
        raise ValueError("senses must be one of <=, >=, == per row")
    lo = np.zeros(n) if lp.lower is None else np.asarray(lp.lower, dtype=float)
    hi = np.full(n, np.inf) if lp.upper is None else np.asarray(lp.upper, dtype=float)
    if lo.shape != (n,) or hi.shape != (n,):
        raise ValueError("bounds must match variable count")
    return c, a, senses, b, lo, hi


class _Tableau:
    """Simplex tableau over standard-form data (all y >= 0, rhs >= 0)."""

    def __init__(self, a, b, basis):
        self.a = a          # m x k, mutated in place by pivots
        self.b = b          # length m
        self.basis = basis  # basic column index per row

    def pivot(self, row, col):
        piv = self.a[row, col]
        self.a[row] /= piv
        self.b[row] /= piv
        for r in range(self.a.shape[0]):
            if r != row and abs(self.a[r, col]) > 0.0:
                f = self.a[r, col]
                self.a[r] -= f * self.a[row]
                self.b[r] -= f * self.b[row]
        self.basis[row] = col

    def run(self, cost, allowed, budget):
        """Bland simplex on `cost` restricted to `allowed` columns.

        Returns (status, pivots_used). status is "optimal" or "unbounded".
        """
        used = 0
        m = self.a.shape[0]
        while True:
            cb = cost[self.basis]
            red = cost - cb @ self.a
            enter = -1
            for j in np.flatnonzero(allowed):
                if red[j] < -PIVOT_TOL:
                    enter = int(j)
                    break
            if enter < 0:
                return "optimal", used
            if used >= budget:
                raise IterationLimitError(
                    f"simplex exceeded {MAX_PIVOTS} pivots")
            col = self.a[:, enter]
            leave = -1
            best = np.inf
            for r in range(m):
                if col[r] > PIVOT_TOL:
                    ratio = self.b[r] / col[r]
                    if ratio < best - PIVOT_TOL or (
                            abs(ratio - best) <= PIVOT_TOL
                            and (leave < 0 or self.basis[r] < self.basis[leave])):
                        best = ratio
                        leave = r
            if leave < 0:
                return "unbounded", used
            self.pivot(leave, enter)
            used += 1


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve a small dense LP. Deterministic for identical inputs.

    Raises IterationLimitError past 10,000 pivots (phases combined) and
    ValueError on dimension mismatches.
    """
    c, a, senses, b, lo, hi = _validate(lp)
    m, n = a.shape
    sign = -1.0 if lp.maximize else 1.0
    c = sign * c

    if np.any(lo > hi + FEAS_TOL):
        return LpSolution("infeasible", None, None, 0)

    # Substitute x_j = s_j + d_j * y_j with y_j >= 0 (split free variables).
    cols = []      # (original var, shift, direction) per standard column
    for j in range(n):
        if lo[j] > -np.inf:
            cols.append((j, lo[j], 1.0))
        elif hi[j] < np.inf:
            cols.append((j, hi[j], -1.0))
        else:
            cols.append((j, 0.0, 1.0))
            cols.append((j, 0.0, -1.0))
    k = len(cols)
    shift = np.zeros(n)
    for j, s, _ in cols:
        if s != 0.0:
            shift[j] = s

    a_std = np.zeros((m, k))
    c_std = np.zeros(k)
    for idx, (j, _, d) in enumerate(cols):
        a_std[:, idx] = d * a[:, j]
        c_std[idx] = d * c[j]
    b_std = b - a @ shift
    row_sense = list(senses)
    row_map = list(range(m))    # original row index, -1 for bound rows

    # Finite two-sided bounds become explicit rows y_j <= hi - lo.
    extra = []
    for idx, (j, s, d) in enumerate(cols):
        if d > 0 and lo[j] > -np.inf and hi[j] < np.inf:
            row = np.zeros(k)
            row[idx] = 1.0
            extra.append((row, hi[j] - lo[j]))
    if extra:
        a_std = np.vstack([a_std] + [r for r, _ in extra])
        b_std = np.concatenate([b_std, [v for _, v in extra]])
        row_sense += ["<="] * len(extra)
        row_map += [-1] * len(extra)
    m_std = a_std.shape[0]

    flip = np.ones(m_std)
    for r in range(m_std):
        if b_std[r] < 0:
            a_std[r] = -a_std[r]
            b_std[r] = -b_std[r]
            flip[r] = -1.0
            if row_sense[r] == "<=":
                row_sense[r] = ">="
            elif row_sense[r] == ">=":
                row_sense[r] = "<="

    # Append slack/surplus then artificial columns; remember starting basis.
    slack_cols = []
    art_cols = []
    blocks = [a_std]
    width = k
    for r in range(m_std):
        if row_sense[r] == "<=":
            col = np.zeros((m_std, 1)); col[r, 0] = 1.0
            blocks.append(col)
            slack_cols.append((r, width)); width += 1
        elif row_sense[r] == ">=":
            col = np.zeros((m_std, 1)); col[r, 0] = -1.0
            blocks.append(col)
            slack_cols.append((r, width)); width += 1
    n_real = width
    for r in range(m_std):
        if row_sense[r] != "<=":
            col = np.zeros((m_std, 1)); col[r, 0] = 1.0
            blocks.append(col)
            art_cols.append((r, width)); width += 1
    full = np.hstack(blocks)

    basis = np.full(m_std, -1, dtype=int)
    for r, jcol in slack_cols:
        if row_sense[r] == "<=":
            basis[r] = jcol
    for r, jcol in art_cols:
        basis[r] = jcol

    pristine = full[:, :n_real].copy()   # for dual recovery
    cost2 = np.zeros(width)
    cost2[:k] = c_std

    tab = _Tableau(full.copy(), b_std.copy(), basis)
    pivots = 0

    # Phase 1: price out artificials.
    if art_cols:
        cost1 = np.zeros(width)
        for _, jcol in art_cols:
            cost1[jcol] = 1.0
        allowed = np.ones(width, dtype=bool)
        status, used = tab.run(cost1, allowed, MAX_PIVOTS)
        pivots += used
        phase1 = cost1[tab.basis] @ tab.b
        if phase1 > FEAS_TOL:
            return LpSolution("infeasible", None, None, pivots)
        # Drive leftover artificials out of the basis; drop redundant rows.
        art_set = {jcol for _, jcol in art_cols}
        drop = []
        for r in range(m_std):
            if tab.basis[r] in art_set:
                piv_col = -1
                for j in range(n_real):
                    if abs(tab.a[r, j]) > PIVOT_TOL:
                        piv_col = j
                        break
                if piv_col >= 0:
                    tab.pivot(r, piv_col)
                    pivots += 1
                else:
                    drop.append(r)
        if drop:
            keep = [r for r in range(m_std) if r not in set(drop)]
            tab.a = tab.a[keep]
            tab.b = tab.b[keep]
            tab.basis = tab.basis[keep]
            pristine = pristine[keep]
            flip = flip[keep]
            row_map = [row_map[r] for r in keep]
            m_std = len(keep)

    allowed = np.zeros(width, dtype=bool)
    allowed[:n_real] = True
    status, used = tab.run(cost2, allowed, MAX_PIVOTS - pivots)
    pivots += used
    if status == "unbounded":
        return LpSolution("unbounded", None, None, pivots)

    y_std = np.zeros(width)
    y_std[tab.basis] = tab.b
    x = shift.copy()
    for idx, (j, _, d) in enumerate(cols):
        x[j] += d * y_std[idx]
    obj = float(np.asarray(lp.objective, dtype=float) @ x)

    duals = np.zeros(m)
    if m_std:
        bmat = pristine[:, tab.basis]
        cb = cost2[tab.basis]
        try:
            y = np.linalg.solve(bmat.T, cb)
        except np.linalg.LinAlgError:
            y = np.linalg.lstsq(bmat.T, cb, rcond=None)[0]
        for r in range(m_std):
            if row_map[r] >= 0:
                duals[row_map[r]] = flip[r] * y[r]

    return LpSolution("optimal", x, obj, pivots, duals)
