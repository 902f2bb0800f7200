"""Damped Newton iteration for sparse nonlinear systems."""
from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonConvergence, SingularJacobian


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual: float
    history: list


def _solve(jac, rhs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            step = spla.spsolve(sp.csc_matrix(jac), rhs)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SingularJacobian(str(exc)) from exc
    if not np.all(np.isfinite(step)):
        raise SingularJacobian("Newton step is not finite")
    return step


def damped_newton(system, x0, tol=1e-10, max_iter=60, min_damping=2.0**-12, measure=None):
    """Solve system(x) = 0 where ``system`` returns (residual, sparse Jacobian).

    Each step is halved until the Euclidean residual decreases. Convergence is
    judged by ``measure(x, residual)`` (default: max norm of the residual).
    """
    measure = measure or (lambda x, r: float(np.max(np.abs(r))) if r.size else 0.0)
    x = np.array(x0, dtype=float)
    res, jac = system(x)
    err = measure(x, res)
    history = [err]
    for it in range(1, max_iter + 1):
        if err <= tol:
            return NewtonResult(x, it - 1, err, history)
        step = _solve(jac, -res)
        norm0 = np.linalg.norm(res)
        damping = 1.0
        while True:
            trial = x + damping * step
            res_t, jac_t = system(trial)
            if np.all(np.isfinite(res_t)) and np.linalg.norm(res_t) < (1 - 1e-4 * damping) * norm0:
                break
            damping *= 0.5
            if damping < min_damping:
                # accept a full step when the residual is already at round-off level
                res_t, jac_t = system(x + step)
                if np.all(np.isfinite(res_t)) and measure(x + step, res_t) <= max(tol, err):
                    trial = x + step
                    break
                raise NonConvergence(it, err, f"line search stalled at iteration {it} (residual {err:.3e})")
        x, res, jac = trial, res_t, jac_t
        err = measure(x, res)
        history.append(err)
    if err <= tol:
        return NewtonResult(x, max_iter, err, history)
    raise NonConvergence(max_iter, err)
