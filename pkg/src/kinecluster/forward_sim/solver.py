"""Incremental Newton solver for plane-strain neo-Hookean boundary-value problems."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import InvertedStateError, SolverError
from .boundary import BoundaryCondition
from .domain import MaterialDomain
from .materials import neo_hookean_energy, neo_hookean_stress, neo_hookean_tangent

logger = logging.getLogger(__name__)

RTOL = 1e-8
ATOL = 1e-12
MAX_NEWTON = 15
MAX_STEPS = 80
ARMIJO = 1e-4


@dataclass
class DisplacementField:
    domain: MaterialDomain
    bc: BoundaryCondition
    u: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def deformation_gradients(self):
        return deformation_gradients(self.domain, self.u)

    def interpolate(self, points):
        """Displacement at arbitrary points via linear shape functions."""
        elems, bary = self.domain.locate(points)
        nodal = self.u[self.domain.elements[elems]]
        return np.einsum("na,nac->nc", bary, nodal)

    def energy(self):
        return total_energy(self.domain, self.u)


def deformation_gradients(domain: MaterialDomain, u):
    """Per-element ``F = I + sum_a u_a (x) grad N_a``, shape ``(E, 2, 2)``."""
    ue = np.asarray(u).reshape(-1, 2)[domain.elements]
    return np.eye(2) + np.matmul(ue.transpose(0, 2, 1), domain.grads)


def total_energy(domain, u):
    """Total stored energy; ``inf`` for states with an inverted element."""
    F = deformation_gradients(domain, u)
    try:
        psi = neo_hookean_energy(F, domain.mu, domain.lam)
    except InvertedStateError:
        return np.inf
    return float(np.dot(domain.areas, psi))


def _element_dofs(domain):
    e = domain.elements
    return np.stack([2 * e, 2 * e + 1], axis=-1).reshape(len(e), 6)


def internal_force(domain, u):
    """Assembled residual ``dPi/du`` (length ``2 * n_nodes``)."""
    F = deformation_gradients(domain, u)
    P = neo_hookean_stress(F, domain.mu, domain.lam)
    re = np.einsum("e,eiJ,eaJ->eai", domain.areas, P, domain.grads).reshape(-1, 6)
    return np.bincount(_element_dofs(domain).ravel(), weights=re.ravel(), minlength=2 * domain.n_nodes)


def tangent_stiffness(domain, u):
    """Assembled consistent tangent as a CSR matrix."""
    F = deformation_gradients(domain, u)
    A = neo_hookean_tangent(F, domain.mu, domain.lam)
    ne = len(A)
    G = domain.grads
    # GA[e, i, a, kL] = sum_J G[e, a, J] A[e, i, J, kL]
    GA = np.matmul(G[:, None] * domain.areas[:, None, None, None], A.reshape(ne, 2, 2, 4))
    # Ke[e, i, a, k, b] = sum_L GA[e, i, a, k, L] G[e, b, L]
    Ke = np.matmul(GA.reshape(ne, 12, 2), G.transpose(0, 2, 1)).reshape(ne, 2, 3, 2, 3)
    Ke = Ke.transpose(0, 2, 1, 4, 3).reshape(ne, 6, 6)
    dofs = _element_dofs(domain)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = 2 * domain.n_nodes
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _solve(K, rhs):
    # symmetric sparsity: minimum degree on A^T + A is the cheapest ordering here
    return splu(K.tocsc(), permc_spec="MMD_AT_PLUS_A").solve(rhs)


def _residual_norms(r, free):
    return np.linalg.norm(r[free]), np.linalg.norm(r)


def _converged(rf, rall, rtol, atol):
    return rf <= max(rtol * rall, atol)


def _newton(domain, u, free, rtol, atol, max_iter, history):
    """Newton iterations on the free dofs with energy backtracking.

    Returns ``(u, iterations, residual_norm)``; raises ``SolverError`` when
    the iteration cap is hit.
    """
    energy = total_energy(domain, u)
    for it in range(max_iter + 1):
        r = internal_force(domain, u)
        rf, rall = _residual_norms(r, free)
        if _converged(rf, rall, rtol, atol):
            return u, it, rf / max(rall, 1e-300)
        if it == max_iter:
            break
        K = tangent_stiffness(domain, u)
        Kff = K[free][:, free]
        g = r[free]
        try:
            step = _solve(Kff, -g)
        except RuntimeError:
            step = np.full(len(g), np.nan)
        slope = float(g @ step)
        if not np.all(np.isfinite(step)) or slope >= 0:
            # indefinite tangent: fall back to a scaled steepest-descent step
            curv = float(g @ (Kff @ g))
            step = -g * (float(g @ g) / curv if curv > 0 else 1.0 / max(rall, 1e-300))
            slope = float(g @ step)
        alpha = 1.0
        slack = 64 * np.finfo(float).eps * abs(energy)
        while True:
            trial = u.copy()
            trial[free] += alpha * step
            e_trial = total_energy(domain, trial)
            if np.isfinite(e_trial) and e_trial <= energy + ARMIJO * alpha * slope + slack:
                break
            alpha *= 0.5
            if alpha < 1e-10:
                raise SolverError("line search failed", {"iteration": it, "residual": rf})
        u, energy = trial, e_trial
        history.append(energy)
    raise SolverError(
        "Newton did not converge",
        {"iterations": max_iter, "residual": rf, "relative_residual": rf / max(rall, 1e-300)},
    )


def _apply_increment(domain, u, fixed, free, du_fixed):
    """Move the constrained dofs and extrapolate the free ones linearly.

    The free-dof predictor is halved until no element inverts; if even the
    bare boundary move inverts an element the increment is rejected.
    """
    K = tangent_stiffness(domain, u)
    r = internal_force(domain, u)
    rhs = -r[free] - K[free][:, fixed] @ du_fixed
    try:
        du_free = _solve(K[free][:, free], rhs)
    except RuntimeError:
        du_free = np.zeros(len(free))
    if not np.all(np.isfinite(du_free)):
        du_free = np.zeros(len(free))
    scale = 1.0
    while scale > 1e-3:
        trial = u.copy()
        trial[fixed] += du_fixed
        trial[free] += scale * du_free
        if np.isfinite(total_energy(domain, trial)):
            return trial
        scale *= 0.5
    trial = u.copy()
    trial[fixed] += du_fixed
    if np.isfinite(total_energy(domain, trial)):
        return trial
    raise InvertedStateError("boundary increment inverts an element")


def solve_forward(
    domain: MaterialDomain,
    bc: BoundaryCondition,
    steps=10,
    rtol=RTOL,
    atol=ATOL,
    max_newton=MAX_NEWTON,
    max_steps=MAX_STEPS,
):
    """Minimize total potential energy under ``bc`` by incremental loading.

    Each increment moves the boundary by ``1/steps`` of the full prescribed
    displacement and is equilibrated with Newton's method. A failed increment
    is retried at half size, down to ``1/max_steps`` of the full load.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    ndof = 2 * domain.n_nodes
    fixed, target = bc.constraints(domain.nodes)
    free = np.setdiff1d(np.arange(ndof), fixed)
    u = np.zeros(ndof)
    t = 0.0
    dt = 1.0 / steps
    min_dt = 1.0 / max_steps * (1 - 1e-12)
    step_log = []
    rel = 0.0

    while t < 1.0 - 1e-12:
        dt = min(dt, 1.0 - t)
        history = []
        try:
            trial = _apply_increment(domain, u, fixed, free, dt * target)
            history.append(total_energy(domain, trial))
            trial, its, rel = _newton(domain, trial, free, rtol, atol, max_newton, history)
        except (SolverError, InvertedStateError) as exc:
            if dt / 2 < min_dt:
                raise SolverError(
                    f"load increment failed at t={t:.4f}: {exc}",
                    {"t": t, "dt": dt, "steps": step_log, "cause": str(exc)},
                ) from exc
            logger.debug("increment at t=%.4f failed (%s); halving", t, exc)
            dt /= 2
            continue
        u = trial
        t += dt
        step_log.append({"t": t, "newton_iterations": its, "relative_residual": rel, "energies": history})

    r = internal_force(domain, u)
    rf, rall = _residual_norms(r, free)
    F = deformation_gradients(domain, u)
    J = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    diagnostics = {
        "load_steps": len(step_log),
        "newton_iterations": int(sum(s["newton_iterations"] for s in step_log)),
        "residual_norm": float(rf),
        "relative_residual": float(rf / max(rall, 1e-300)),
        "min_jacobian": float(J.min()),
        "energy": total_energy(domain, u),
        "steps": step_log,
    }
    return DisplacementField(domain=domain, bc=bc, u=u.reshape(-1, 2), diagnostics=diagnostics)
