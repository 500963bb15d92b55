"""Exterior calculus and U(1)-covariant calculus on the flat torus.

On a flat torus the Levi-Civita connection is the componentwise partial
derivative and ``nabla_A = d + A`` acts on tensor-spinors through the spinor
factor. Every adjoint below is the exact discrete adjoint of its forward
operator under :func:`swflow.grid.l2_inner`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, TorusGrid, apply_symbol, fft, ifft, partials, scalar

__all__ = [
    "GaugePhase",
    "exterior_d",
    "codifferential",
    "curvature",
    "flat_deriv",
    "flat_deriv_adjoint",
    "iterated_flat_deriv",
    "iterated_flat_adjoint",
    "cov_deriv",
    "cov_deriv_adjoint",
    "iterated_cov_deriv",
    "iterated_adjoint",
    "hodge_laplacian",
    "bochner_laplacian",
    "laplacian_power",
    "gauge_transform",
    "gauge_act",
    "coulomb_project",
    "commutator_defect",
]


@dataclass(frozen=True)
class GaugePhase:
    """U(1) gauge transformation ``zeta = exp(i theta)``, stored by its phase."""

    theta: Field

    def __post_init__(self):
        if self.theta.rank != 0 or self.theta.spinor_rank != 1:
            raise ValueError("gauge phase must be a scalar field")
        if np.any(self.theta.data.imag != 0):
            object.__setattr__(self, "theta", self.theta.like(self.theta.data.real.astype(complex)))

    @classmethod
    def zero(cls, grid: TorusGrid) -> "GaugePhase":
        return cls(scalar(grid, 0.0))

    @property
    def values(self) -> np.ndarray:
        return self.theta.data[0].real


def _imag_if(f: Field, data: np.ndarray) -> np.ndarray:
    return 1j * data.imag if f.purely_imaginary else data


def _require_form(omega: Field) -> int:
    if omega.spinor_rank != 1 or omega.form_degree != omega.rank:
        raise ValueError("expected a differential form (scalar-valued, fully antisymmetric)")
    return omega.rank


def exterior_d(omega: Field) -> Field:
    """Exterior derivative of a j-form; antisymmetrised spectral gradient."""
    j = _require_form(omega)
    if j >= omega.grid.n:
        raise ValueError(f"cannot differentiate a top-degree ({j}) form")
    D = partials(omega.data, omega.grid)
    out = np.zeros_like(D)
    for a in range(j + 1):
        out += (-1) ** a * np.moveaxis(D, 0, a)
    return Field(omega.grid, _imag_if(omega, out), j + 1, 1, j + 1, omega.purely_imaginary)


def codifferential(omega: Field) -> Field:
    """``d*``: ``(d* w)_{I} = -sum_i d_i w_{iI}``, the adjoint of :func:`exterior_d`."""
    j = _require_form(omega)
    if j == 0:
        raise ValueError("codifferential of a 0-form is undefined")
    hat = fft(omega.data, omega.grid)
    acc = sum(1j * k * hat[i] for i, k in enumerate(omega.grid.wavenumbers))
    out = -ifft(acc, omega.grid)
    return Field(omega.grid, _imag_if(omega, out), j - 1, 1, j - 1, omega.purely_imaginary)


def curvature(A: Field) -> Field:
    """``F_A = dA``."""
    if A.rank != 1 or A.form_degree != 1:
        raise ValueError("curvature expects a connection 1-form")
    return exterior_d(A)


def flat_deriv(T: Field) -> Field:
    """Levi-Civita derivative on the flat torus; new index prepended."""
    D = partials(T.data, T.grid)
    return Field(T.grid, _imag_if(T, D), T.rank + 1, T.spinor_rank, T.form_degree,
                 T.purely_imaginary)


def flat_deriv_adjoint(T: Field) -> Field:
    if T.rank - T.form_degree < 1:
        raise ValueError("adjoint needs a leading derivative index")
    hat = fft(T.data, T.grid)
    acc = sum(1j * k * hat[i] for i, k in enumerate(T.grid.wavenumbers))
    return Field(T.grid, _imag_if(T, -ifft(acc, T.grid)), T.rank - 1, T.spinor_rank,
                 T.form_degree, T.purely_imaginary)


def iterated_flat_deriv(T: Field, m: int) -> Field:
    for _ in range(m):
        T = flat_deriv(T)
    return T


def iterated_flat_adjoint(T: Field, m: int) -> Field:
    for _ in range(m):
        T = flat_deriv_adjoint(T)
    return T


def _connection_components(A: Field, T: Field) -> np.ndarray:
    if A.grid != T.grid:
        raise ValueError("connection and section live on different grids")
    if A.rank != 1 or A.spinor_rank != 1:
        raise ValueError("expected a connection 1-form")
    return A.data[:, 0]


def _expand(a: np.ndarray, extra: int) -> np.ndarray:
    """Insert ``extra`` singleton axes after the leading component axis."""
    return a.reshape(a.shape[:1] + (1,) * extra + a.shape[1:])


def cov_deriv(A: Field, T: Field) -> Field:
    """``(nabla_A T)_{i...} = d_i T_{...} + A_i T_{...}``."""
    a = _connection_components(A, T)
    D = partials(T.data, T.grid)
    D += _expand(a, T.rank + 1) * T.data[None]
    return Field(T.grid, D, T.rank + 1, T.spinor_rank, T.form_degree)


def cov_deriv_adjoint(A: Field, T: Field) -> Field:
    """Exact adjoint of :func:`cov_deriv`: ``-sum_i d_i T_i + conj(A_i) T_i``."""
    if T.rank < 1:
        raise ValueError("cov_deriv_adjoint needs rank >= 1")
    a = _connection_components(A, T)
    hat = fft(T.data, T.grid)
    acc = sum(1j * k * hat[i] for i, k in enumerate(T.grid.wavenumbers))
    out = -ifft(acc, T.grid)
    out += np.sum(_expand(np.conj(a), T.rank) * T.data, axis=0)
    return Field(T.grid, out, T.rank - 1, T.spinor_rank, T.form_degree)


def iterated_cov_deriv(A: Field, phi: Field, m: int, return_all: bool = False):
    """``nabla_A^(m) phi``; with ``return_all`` the list of all intermediate iterates."""
    if m < 0:
        raise ValueError("m must be >= 0")
    chain = [phi]
    for _ in range(m):
        chain.append(cov_deriv(A, chain[-1]))
    return chain if return_all else chain[-1]


def iterated_adjoint(A: Field, T: Field, m: int) -> Field:
    for _ in range(m):
        T = cov_deriv_adjoint(A, T)
    return T


def hodge_laplacian(omega: Field) -> Field:
    """``dd* + d*d`` on forms."""
    j = _require_form(omega)
    n = omega.grid.n
    out = None
    if j < n:
        out = codifferential(exterior_d(omega))
    if j > 0:
        term = exterior_d(codifferential(omega))
        out = term if out is None else out + term
    return out


def bochner_laplacian(omega: Field) -> Field:
    """``nabla_M^* nabla_M``, componentwise ``-sum_i d_i^2`` on the flat torus."""
    return flat_deriv_adjoint(flat_deriv(omega))


def laplacian_power(f: Field, k: int) -> Field:
    """Positive Laplacian ``(d*d)^k`` applied to a scalar field via its symbol."""
    if k == 0:
        return f
    out = apply_symbol(f.data, f.grid, f.grid.k_squared**k)
    return f.like(_imag_if(f, out))


def _phase_factor(g: GaugePhase, grid: TorusGrid) -> np.ndarray:
    if g.theta.grid != grid:
        raise ValueError("gauge phase lives on a different grid")
    return np.exp(-1j * g.values)


def gauge_act(g: GaugePhase, T: Field) -> Field:
    """Pull back a tensor-spinor: multiply the spinor factor by ``exp(-i theta)``."""
    return T.like(T.data * _phase_factor(g, T.grid))


def gauge_transform(g: GaugePhase, A: Field, phi: Field) -> tuple[Field, Field]:
    """``(A + i d theta, exp(-i theta) phi)``."""
    dtheta = exterior_d(g.theta)
    A_new = A.like(A.data + 1j * dtheta.data.real)
    return A_new, gauge_act(g, phi)


def coulomb_project(A: Field) -> tuple[Field, GaugePhase]:
    """Gauge ``A`` into Coulomb gauge ``d*A = 0``; the harmonic part is kept.

    Solves ``d*d theta = -d*a`` (with ``A = i a``) by Fourier division; modes
    where the symbol vanishes are left untouched.
    """
    grid = A.grid
    div_a = codifferential(A).data[0].imag
    hat = fft(div_a, grid)
    k2 = grid.k_squared
    safe = np.where(k2 > 0, k2, 1.0)
    theta_hat = np.where(k2 > 0, -hat / safe, 0.0)
    theta = ifft(theta_hat, grid).real
    g = GaugePhase(scalar(grid, theta))
    A_new = A.like(A.data + 1j * exterior_d(g.theta).data.real)
    return A_new, g


def commutator_defect(A: Field, phi: Field, i: int, j: int) -> Field:
    """``nabla_i nabla_j phi - nabla_j nabla_i phi - F_ij phi``; vanishes identically."""
    if i == j:
        raise ValueError("commutator needs two distinct directions")
    second = cov_deriv(A, cov_deriv(A, phi)).data
    F = curvature(A).data[:, :, 0]
    out = second[i, j] - second[j, i] - F[i, j][None] * phi.data
    return phi.like(out)
