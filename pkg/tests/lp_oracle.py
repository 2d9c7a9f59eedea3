"""Brute-force LP oracle: enumerate every basic point of a small bounded LP."""

import itertools

import numpy as np

from riskaverse.simplex import EQ, GE, LE, LpProblem


def random_lp(rng, n_vars=4, n_rows=4, int_coefs=True):
    """Small LP with finite box bounds (so it is never unbounded) and mixed row senses."""
    if int_coefs:
        A = rng.integers(-3, 4, size=(n_rows, n_vars)).astype(float)
        c = rng.integers(-5, 6, size=n_vars).astype(float)
        b = rng.integers(-4, 7, size=n_rows).astype(float)
    else:
        A = rng.normal(size=(n_rows, n_vars))
        c = rng.normal(size=n_vars)
        b = rng.normal(size=n_rows)
    rel = tuple(rng.choice([GE, LE, EQ], p=[0.45, 0.45, 0.1]) for _ in range(n_rows))
    lo = rng.integers(-2, 1, size=n_vars).astype(float)
    hi = lo + rng.integers(1, 5, size=n_vars).astype(float)
    return LpProblem(c, A, rel, b, lo, hi)


def _feasible(p, x, tol=1e-9):
    if np.any(x < p.lo - tol) or np.any(x > p.hi + tol):
        return False
    act = p.A @ x
    for a, r, b in zip(act, p.rel, p.b):
        if r == GE and a < b - tol:
            return False
        if r == LE and a > b + tol:
            return False
        if r == EQ and abs(a - b) > tol:
            return False
    return True


def vertex_enumerate(p):
    """``(status, value)`` by solving every square subsystem of tight constraints.

    Requires finite upper bounds, so the feasible set is a polytope and the
    optimum (if any) sits at a vertex.
    """
    n = p.n_vars
    assert np.all(np.isfinite(p.hi))
    rows = [(p.A[i], p.b[i]) for i in range(p.n_rows)]
    eye = np.eye(n)
    rows += [(eye[j], p.lo[j]) for j in range(n)] + [(eye[j], p.hi[j]) for j in range(n)]
    eq = [i for i, r in enumerate(p.rel) if r == EQ]
    rest = [i for i in range(len(rows)) if i not in eq]
    best = None
    for extra in itertools.combinations(rest, n - len(eq)) if len(eq) <= n else ():
        idx = eq + list(extra)
        M = np.array([rows[i][0] for i in idx])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, np.array([rows[i][1] for i in idx]))
        if _feasible(p, x):
            v = float(p.c @ x)
            if best is None or v < best:
                best = v
    if best is None:
        return "infeasible", None
    return "optimal", best
