"""Seiberg-Witten type energies on flat tori and their exact discrete gradients.

Gradient conventions (``<.,.>`` is :func:`swflow.grid.l2_inner`):

* spinor: ``dE/dphi[d] = 2 Re <d, g_phi>``
* connection: ``dE/dA[B] = Re <B, g_A>``

so the gradient flow reads ``phi_t = -g_phi``, ``A_t = -g_A``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from .diffgeo import (
    codifferential,
    cov_deriv_adjoint,
    curvature,
    iterated_cov_deriv,
    iterated_flat_adjoint,
    iterated_flat_deriv,
)
from .grid import Field, l2_inner, l2_norm, random_band_limited

__all__ = [
    "EnergyBreakdown",
    "GradientPair",
    "sw_energy",
    "sw_energy_k",
    "spinor_density",
    "grad_spinor",
    "grad_connection",
    "gradients",
    "fd_gradient_check",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    curvature_term: float
    dirichlet_term: float
    scalar_term: float
    quartic_term: float

    @property
    def total(self) -> float:
        return self.curvature_term + self.dirichlet_term + self.scalar_term + self.quartic_term

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["total"] = self.total
        return out


@dataclass(frozen=True)
class GradientPair:
    g_phi: Field
    g_A: Field


def spinor_density(phi: Field) -> np.ndarray:
    """Pointwise ``|phi|^2`` summed over spinor components."""
    return np.sum(np.abs(phi.data) ** 2, axis=0)


def _potential_terms(phi: Field, S0: float) -> tuple[float, float]:
    rho = spinor_density(phi)
    dv = phi.grid.cell_volume
    scalar_term = 0.25 * S0 * float(np.sum(rho)) * dv
    quartic_term = 0.125 * float(np.sum(rho**2)) * dv
    return scalar_term, quartic_term


def _check_pair(A: Field, phi: Field) -> None:
    if A.grid != phi.grid:
        raise ValueError("A and phi live on different grids")
    if A.rank != 1 or A.form_degree != 1:
        raise ValueError("A must be a connection 1-form")
    if phi.rank != 0:
        raise ValueError("phi must be an untwisted spinor (rank 0)")


def sw_energy(A: Field, phi: Field, S0: float = 0.0) -> EnergyBreakdown:
    """Classical functional with unit weight on both ``|F|^2`` and ``|nabla_A phi|^2``."""
    _check_pair(A, phi)
    F = curvature(A)
    Dphi = iterated_cov_deriv(A, phi, 1)
    s, q = _potential_terms(phi, S0)
    return EnergyBreakdown(l2_norm(F) ** 2, l2_norm(Dphi) ** 2, s, q)


def sw_energy_k(A: Field, phi: Field, k: int, S0: float = 0.0) -> EnergyBreakdown:
    """Order-k functional.

    ``1/2 |nabla^k F|^2 + |nabla_A^(k+1) phi|^2 + S0/4 |phi|^2 + 1/8 |phi|^4``
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    _check_pair(A, phi)
    DkF = iterated_flat_deriv(curvature(A), k)
    Dphi = iterated_cov_deriv(A, phi, k + 1)
    s, q = _potential_terms(phi, S0)
    return EnergyBreakdown(0.5 * l2_norm(DkF) ** 2, l2_norm(Dphi) ** 2, s, q)


def _dirichlet_chain(A: Field, phi: Field, k: int) -> tuple[list[Field], list[Field]]:
    """Forward iterates ``T_j = nabla_A^j phi`` and adjoint pullbacks ``G_j``.

    ``G_k = T_{k+1}`` and ``G_{j-1} = nabla_A^* G_j``, so ``G_j`` has the
    rank of ``T_{j+1}``.
    """
    T = iterated_cov_deriv(A, phi, k + 1, return_all=True)
    G = [None] * (k + 1)
    G[k] = T[k + 1]
    for j in range(k, 0, -1):
        G[j - 1] = cov_deriv_adjoint(A, G[j])
    return T, G


def _spinor_gradient_from_chain(phi: Field, G: list[Field], A: Field, S0: float) -> Field:
    rho = spinor_density(phi)
    lap = cov_deriv_adjoint(A, G[0])
    return phi.like(lap.data + 0.25 * (S0 + rho)[None] * phi.data)


def _connection_gradient_from_chain(A: Field, T: list[Field], G: list[Field], k: int) -> Field:
    n = A.grid.n
    W = np.zeros((n,) + A.grid.sizes, dtype=complex)
    for j in range(k + 1):
        Tj = T[j].data.reshape((1, -1) + A.grid.sizes)
        Gj = G[j].data.reshape((n, -1) + A.grid.sizes)
        W += np.sum(np.conj(Tj) * Gj, axis=1)
    DkF = iterated_flat_deriv(curvature(A), k)
    curv = codifferential(iterated_flat_adjoint(DkF, k))
    data = 1j * (curv.data.imag + 2.0 * W.imag[:, None])
    return A.like(data)


def grad_spinor(A: Field, phi: Field, k: int, S0: float = 0.0) -> Field:
    """``nabla_A^*(k+1) nabla_A^(k+1) phi + 1/4 (S0 + |phi|^2) phi``."""
    _check_pair(A, phi)
    _, G = _dirichlet_chain(A, phi, k)
    return _spinor_gradient_from_chain(phi, G, A, S0)


def grad_connection(A: Field, phi: Field, k: int) -> Field:
    """``d* nabla^*k nabla^k F_A`` plus the exact A-derivative of the Dirichlet term.

    The result is purely imaginary by construction.
    """
    _check_pair(A, phi)
    T, G = _dirichlet_chain(A, phi, k)
    return _connection_gradient_from_chain(A, T, G, k)


def gradients(A: Field, phi: Field, k: int, S0: float = 0.0) -> GradientPair:
    """Both gradients sharing one covariant-derivative chain."""
    _check_pair(A, phi)
    T, G = _dirichlet_chain(A, phi, k)
    return GradientPair(_spinor_gradient_from_chain(phi, G, A, S0),
                        _connection_gradient_from_chain(A, T, G, k))


GradFn = Callable[[Field, Field, int, float], GradientPair]


def _unit(f: Field) -> Field:
    nrm = l2_norm(f)
    return f * (1.0 / nrm) if nrm > 0 else f


def fd_gradient_check(A: Field, phi: Field, k: int, S0: float = 0.0, h: float = 1e-4,
                      num_directions: int = 20, seed: int = 0, kmax: int = 2,
                      grad_fn: GradFn | None = None) -> tuple[float, float]:
    """Compare central differences of ``sw_energy_k`` with the analytic gradients.

    Directions are random band-limited unit fields (imaginary for A). For each
    family the error is ``max_j |fd_j - pred_j| / max_j |pred_j|``, with 0/0
    reported as 0.
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError(f"h={h} outside [1e-6, 1e-3]")
    if num_directions < 1:
        raise ValueError("need at least one direction")
    grad_fn = grad_fn or gradients
    grads = grad_fn(A, phi, k, S0)
    grid = A.grid
    kmax = min(kmax, (min(grid.sizes) - 1) // 3)

    def energy(A_, phi_):
        return sw_energy_k(A_, phi_, k, S0).total

    def rel(pairs):
        diff = max(abs(fd - pred) for fd, pred in pairs)
        scale = max(abs(pred) for _, pred in pairs)
        if scale == 0:
            return 0.0 if diff == 0 else float("inf")
        return diff / scale

    phi_pairs, a_pairs = [], []
    for j in range(num_directions):
        d_phi = _unit(random_band_limited(grid, 0, phi.spinor_rank, kmax, seed=seed * 7919 + 2 * j,
                                          kind="complex"))
        fd = (energy(A, phi + d_phi * h) - energy(A, phi - d_phi * h)) / (2 * h)
        phi_pairs.append((fd, 2.0 * l2_inner(d_phi, grads.g_phi).real))

        B = _unit(random_band_limited(grid, 1, 1, kmax, seed=seed * 7919 + 2 * j + 1,
                                      kind="imaginary", form_degree=1))
        fd = (energy(A + B * h, phi) - energy(A - B * h, phi)) / (2 * h)
        a_pairs.append((fd, l2_inner(B, grads.g_A).real))
    return rel(phi_pairs), rel(a_pairs)
