"""Dense revised simplex solver returning primal and dual optimal solutions.

Every LP in the package goes through :func:`solve_lp`.  The solver works on a
standard form ``min c.x, A x = b, x >= 0`` built from an :class:`LpProblem`
(rows with relations, simple bounds), runs a two-phase revised simplex with an
explicit basis inverse, and maps the optimal basis back to one dual
multiplier per original row.

Sign convention for duals (minimisation): a ``>=`` row has a nonnegative
multiplier, a ``<=`` row a nonpositive one, an ``=`` row is free.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
OPT_TOL = 1e-9
DUALITY_TOL = 1e-6
REFACTOR_EVERY = 40
DEGENERATE_STREAK = 30

GE, LE, EQ = ">=", "<=", "="


class SimplexError(RuntimeError):
    """Iteration limit, singular basis or a failed optimality certificate."""


@dataclass(frozen=True)
class LpProblem:
    """``min c.x`` subject to ``A x (rel) b`` and ``lo <= x <= hi``.

    ``rel`` holds one of ``">="``, ``"<="``, ``"="`` per row.  Lower bounds
    must be finite; upper bounds may be ``inf``.
    """

    c: np.ndarray
    A: np.ndarray
    rel: tuple
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        n = len(self.c)
        if self.A.shape != (len(self.b), n):
            raise ValueError(f"A has shape {self.A.shape}, expected {(len(self.b), n)}")
        if len(self.rel) != len(self.b):
            raise ValueError("one relation per row required")
        if any(r not in (GE, LE, EQ) for r in self.rel):
            raise ValueError(f"unknown relation in {set(self.rel)}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError("coefficients must be finite")
        if not np.all(np.isfinite(self.lo)):
            raise ValueError("lower bounds must be finite")
        if np.any(self.hi < self.lo):
            raise ValueError("empty variable range")

    @property
    def n_vars(self):
        return len(self.c)

    @property
    def n_rows(self):
        return len(self.b)

    def with_objective(self, c):
        return dataclasses.replace(self, c=np.asarray(c, dtype=float))


class LpBuilder:
    """Incremental construction of an :class:`LpProblem` from sparse rows."""

    def __init__(self):
        self._c = []
        self._lo = []
        self._hi = []
        self._rows = []

    def add_var(self, cost=0.0, lo=0.0, hi=np.inf):
        self._c.append(float(cost))
        self._lo.append(float(lo))
        self._hi.append(float(hi))
        return len(self._c) - 1

    def add_vars(self, count, cost=0.0, lo=0.0, hi=np.inf):
        return [self.add_var(cost, lo, hi) for _ in range(count)]

    def add_cost(self, j, amount):
        self._c[j] += float(amount)

    def add_row(self, coefs, rel, rhs):
        """``coefs`` maps variable index to coefficient; returns the row index."""
        self._rows.append((dict(coefs), rel, float(rhs)))
        return len(self._rows) - 1

    @property
    def n_vars(self):
        return len(self._c)

    def build(self):
        n = len(self._c)
        A = np.zeros((len(self._rows), n))
        for r, (coefs, _, _) in enumerate(self._rows):
            for j, v in coefs.items():
                A[r, j] += v
        return LpProblem(
            c=np.array(self._c, dtype=float),
            A=A,
            rel=tuple(r[1] for r in self._rows),
            b=np.array([r[2] for r in self._rows], dtype=float),
            lo=np.array(self._lo, dtype=float),
            hi=np.array(self._hi, dtype=float),
        )


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    dual: np.ndarray | None = None
    bound_dual: np.ndarray | None = None
    objective: float = np.nan
    dual_objective: float = np.nan
    iterations: int = 0
    warm: tuple | None = field(default=None, repr=False)

    @property
    def optimal(self):
        return self.status == "optimal"


@dataclass
class SolveStats:
    """Process-wide counters; read by the acceptance suite."""

    solves: int = 0
    optimal: int = 0
    max_duality_residual: float = 0.0
    max_cs_residual: float = 0.0

    def reset(self):
        self.solves = self.optimal = 0
        self.max_duality_residual = self.max_cs_residual = 0.0


stats = SolveStats()


# -- standard form ------------------------------------------------------------

@dataclass
class _Std:
    A: np.ndarray        # m x (n + n_slack), rows already sign-normalised
    b: np.ndarray        # >= 0
    c: np.ndarray
    flip: np.ndarray     # +1/-1 per std row
    n_struct: int
    n_orig_rows: int
    slack_basic: list    # per row: column index of a +1 slack usable as initial basis, or -1
    const: float         # objective constant from the lower-bound shift


def _standard_form(p):
    n = p.n_vars
    ub_idx = np.flatnonzero(np.isfinite(p.hi))
    m0 = p.n_rows
    m = m0 + len(ub_idx)
    rows = np.zeros((m, n))
    rows[:m0] = p.A
    rows[m0 + np.arange(len(ub_idx)), ub_idx] = 1.0
    rhs = np.concatenate([p.b - p.A @ p.lo, (p.hi - p.lo)[ub_idx]])
    rels = list(p.rel) + [LE] * len(ub_idx)

    n_slack = sum(1 for r in rels if r != EQ)
    A = np.zeros((m, n + n_slack))
    A[:, :n] = rows
    slack_of = [-1] * m
    k = n
    for i, r in enumerate(rels):
        if r == LE:
            A[i, k] = 1.0
            slack_of[i] = k
            k += 1
        elif r == GE:
            A[i, k] = -1.0
            slack_of[i] = k
            k += 1
    flip = np.where(rhs < 0, -1.0, 1.0)
    A *= flip[:, None]
    b = rhs * flip
    slack_basic = [s if s >= 0 and A[i, s] > 0 else -1 for i, s in enumerate(slack_of)]
    c = np.concatenate([p.c, np.zeros(n_slack)])
    return _Std(A, b, c, flip, n, m0, slack_basic, float(p.c @ p.lo))


# -- core iteration -----------------------------------------------------------

class _Tableau:
    """Revised simplex state: basis list and explicit inverse."""

    def __init__(self, A, b, basis):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SimplexError("singular basis") from exc
        if not np.all(np.isfinite(self.Binv)):
            raise SimplexError("singular basis")
        self.since_refactor = 0

    def xB(self):
        return self.Binv @ self.b

    def pivot(self, r, q, col):
        piv = col[r]
        row_r = self.Binv[r] / piv
        self.Binv -= np.outer(col, row_r)
        self.Binv[r] = row_r
        self.basis[r] = q
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()


def _iterate(tab, c, allowed, max_iter):
    """Primal simplex from a feasible basis.

    Dantzig pricing with smallest-index ties; after a run of degenerate pivots
    it switches to Bland's rule until progress resumes.  Returns
    ``("optimal"|"unbounded", iterations)``.
    """
    A = tab.A
    degenerate = 0
    for it in range(max_iter):
        xB = tab.xB()
        y = c[tab.basis] @ tab.Binv
        d = c - y @ A
        d[tab.basis] = 0.0
        d[~allowed] = 0.0
        cand = np.flatnonzero(d < -OPT_TOL)
        if cand.size == 0:
            return "optimal", it
        if degenerate >= DEGENERATE_STREAK:
            q = int(cand[0])
        else:
            q = int(cand[np.argmin(d[cand])])
        col = tab.Binv @ A[:, q]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return "unbounded", it
        ratios = np.maximum(xB[pos], 0.0) / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12]
        basis_arr = np.asarray(tab.basis)
        r = int(ties[np.argmin(basis_arr[ties])])
        degenerate = degenerate + 1 if best <= 1e-12 else 0
        tab.pivot(r, q, col)
    raise SimplexError(f"iteration limit {max_iter} exceeded")


def _phase_one(std, max_iter):
    m, ncols = std.A.shape
    basis = []
    art_cols = []
    for i in range(m):
        if std.slack_basic[i] >= 0:
            basis.append(std.slack_basic[i])
        else:
            basis.append(ncols + len(art_cols))
            art_cols.append(i)
    A1 = np.hstack([std.A, np.zeros((m, len(art_cols)))])
    for k, i in enumerate(art_cols):
        A1[i, ncols + k] = 1.0
    c1 = np.zeros(ncols + len(art_cols))
    c1[ncols:] = 1.0
    tab = _Tableau(A1, std.b, basis)
    allowed = np.ones(A1.shape[1], dtype=bool)
    _, its = _iterate(tab, c1, allowed, max_iter)
    infeas = float(c1[tab.basis] @ tab.xB())
    if infeas > FEAS_TOL * (1.0 + np.abs(std.b).max(initial=0.0)):
        return None, its

    # Drive zero-level artificials out; rows where that is impossible are redundant.
    keep_rows = list(range(m))
    for r in range(m):
        q = tab.basis[r]
        if q < ncols:
            continue
        row = tab.Binv[r] @ std.A
        row[[j for j in tab.basis if j < ncols]] = 0.0
        cand = np.flatnonzero(np.abs(row) > 1e-7)
        if cand.size:
            j = int(cand[0])
            tab.pivot(r, j, tab.Binv @ A1[:, j])
        else:
            keep_rows.remove(r)
    basis = [tab.basis[r] for r in keep_rows]
    return (keep_rows, basis), its


def _solve_std(std, warm, max_iter):
    m, ncols = std.A.shape
    its = 0
    start = None
    if warm is not None:
        keep_rows, basis = warm
        if len(basis) == len(keep_rows) and all(0 <= j < ncols for j in basis) and (not keep_rows or max(keep_rows) < m):
            try:
                tab = _Tableau(std.A[keep_rows], std.b[keep_rows], basis)
                if np.all(tab.xB() >= -FEAS_TOL):
                    start = (keep_rows, tab)
            except SimplexError:
                start = None
    if start is None:
        found, its = _phase_one(std, max_iter)
        if found is None:
            return "infeasible", None, None, its
        keep_rows, basis = found
        tab = _Tableau(std.A[keep_rows], std.b[keep_rows], basis)
        start = (keep_rows, tab)
    keep_rows, tab = start
    allowed = np.ones(ncols, dtype=bool)
    status, its2 = _iterate(tab, std.c, allowed, max_iter)
    its += its2
    if status == "unbounded":
        return "unbounded", None, None, its
    tab.refactor()
    xB = tab.xB()
    x = np.zeros(ncols)
    x[tab.basis] = np.maximum(xB, 0.0)
    y_kept = std.c[tab.basis] @ tab.Binv
    y = np.zeros(m)
    y[keep_rows] = y_kept
    return "optimal", x, y, its, (keep_rows, list(tab.basis))


def _certify(p, std, x_std, y_std):
    """Primal residual, duality gap and complementary slackness of a solution."""
    n = p.n_vars
    x = x_std[:n] + p.lo
    y_rows = y_std * std.flip  # back to un-flipped std rows
    dual = y_rows[: std.n_orig_rows]
    bound_dual = y_rows[std.n_orig_rows:]
    primal_obj = float(p.c @ x)
    rhs_shift = p.b - p.A @ p.lo
    ub = np.isfinite(p.hi)
    dual_obj = float(dual @ rhs_shift + bound_dual @ (p.hi - p.lo)[ub]) + std.const

    act = p.A @ x
    viol = np.zeros(p.n_rows)
    for i, r in enumerate(p.rel):
        if r == GE:
            viol[i] = max(0.0, p.b[i] - act[i])
        elif r == LE:
            viol[i] = max(0.0, act[i] - p.b[i])
        else:
            viol[i] = abs(act[i] - p.b[i])
    scale = 1.0 + np.abs(p.b).max(initial=0.0)
    if viol.max(initial=0.0) > FEAS_TOL * scale:
        raise SimplexError(f"primal residual {viol.max():.3e}")

    gap = abs(primal_obj - dual_obj)
    slack = np.abs(act - p.b)
    cs = float(np.abs(dual) @ slack)
    red = p.c - p.A.T @ dual
    full_bd = np.zeros(n)
    full_bd[ub] = bound_dual
    red -= full_bd
    cs += float(np.abs(red) @ (x - p.lo)) + float(np.abs(bound_dual) @ (p.hi[ub] - x[ub]))
    return x, dual, bound_dual, primal_obj, dual_obj, gap, cs


def _dual_tiebreak(p, sol, weights, max_iter):
    """Among optimal duals, the one minimising ``weights . dual``.

    Builds the dual LP explicitly and optimises the secondary objective over
    its optimal face (dual objective pinned at the primal optimum).
    """
    weights = np.asarray(weights, dtype=float)
    n = p.n_vars
    ub_idx = np.flatnonzero(np.isfinite(p.hi))
    rhs_shift = p.b - p.A @ p.lo
    db = LpBuilder()
    cols = []  # (row or bound key, sign, var)
    for i, r in enumerate(p.rel):
        if r == GE:
            cols.append((i, 1.0, db.add_var()))
        elif r == LE:
            cols.append((i, -1.0, db.add_var()))
        else:
            cols.append((i, 1.0, db.add_var()))
            cols.append((i, -1.0, db.add_var()))
    bcols = [(k, db.add_var()) for k in range(len(ub_idx))]
    for j in range(n):
        coefs = {}
        for i, s, v in cols:
            if p.A[i, j] != 0.0:
                coefs[v] = coefs.get(v, 0.0) + s * p.A[i, j]
        for k, v in bcols:
            if ub_idx[k] == j:
                coefs[v] = -1.0
        db.add_row(coefs, LE, p.c[j])
    face = {}
    for i, s, v in cols:
        face[v] = face.get(v, 0.0) + s * rhs_shift[i]
    for k, v in bcols:
        face[v] = -(p.hi - p.lo)[ub_idx[k]]
    target = sol.objective - std_const(p)
    db.add_row(face, GE, target - 1e-9 * (1.0 + abs(sol.objective)))
    for i, s, v in cols:
        db.add_cost(v, s * weights[i])
    dsol = solve_lp(db.build(), max_iter=max_iter, _certify_dual=False)
    if not dsol.optimal:
        raise SimplexError(f"dual tie-break solve ended {dsol.status}")
    dual = np.zeros(p.n_rows)
    for i, s, v in cols:
        dual[i] += s * dsol.x[v]
    bound_dual = np.array([-dsol.x[v] for _, v in bcols])
    return dual, bound_dual


def std_const(p):
    return float(p.c @ p.lo)


def solve_lp(p, dual_tiebreak=None, warm=None, max_iter=None, _certify_dual=True):
    """Solve ``p``; optionally pick the optimal dual minimising ``dual_tiebreak . dual``.

    ``warm`` is the ``warm`` attribute of an earlier solution to a problem with
    the same constraint structure (only the objective may differ); it skips
    phase one when the old basis is still primal feasible.
    """
    std = _standard_form(p)
    m, ncols = std.A.shape
    if max_iter is None:
        max_iter = 50 * (m + ncols) + 1000
    stats.solves += 1
    out = _solve_std(std, warm, max_iter)
    if out[0] != "optimal":
        return LpSolution(status=out[0], iterations=out[3])
    _, x_std, y_std, its, warm_out = out
    x, dual, bound_dual, pobj, dobj, gap, cs = _certify(p, std, x_std, y_std)
    sol = LpSolution("optimal", x, dual, bound_dual, pobj, dobj, its, warm_out)
    if dual_tiebreak is not None:
        sol.dual, sol.bound_dual = _dual_tiebreak(p, sol, dual_tiebreak, max_iter)
        ub = np.isfinite(p.hi)
        sol.dual_objective = float(sol.dual @ (p.b - p.A @ p.lo) + sol.bound_dual @ (p.hi - p.lo)[ub]) + std.const
        gap = abs(sol.objective - sol.dual_objective)
    if _certify_dual:
        scale = 1.0 + abs(sol.objective)
        if gap > DUALITY_TOL * scale:
            raise SimplexError(f"duality gap {gap:.3e} at objective {sol.objective:.6g}")
        stats.max_duality_residual = max(stats.max_duality_residual, gap / scale)
        stats.max_cs_residual = max(stats.max_cs_residual, cs / scale)
    stats.optimal += 1
    return sol
