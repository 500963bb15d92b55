"""Periodic grid geometry, spectral transforms, field containers and norms.

Fields are stored component-major: ``data.shape == (n,)*rank + (r,) + sizes``.
Trailing ``form_degree`` covariant indices are treated as an antisymmetric
form, so pointwise norms carry the ``1/form_degree!`` factor.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "TorusGrid",
    "Field",
    "BumpWeight",
    "make_grid",
    "fft",
    "ifft",
    "spectral_partial",
    "dealias",
    "l2_inner",
    "l2_norm",
    "pointwise_norm",
    "lp_norm",
    "sup_norm",
    "ball_lp_norm",
    "torus_distance",
    "bump_function",
    "weighted_l2_norm",
    "random_band_limited",
    "zeros",
    "scalar",
    "spinor",
    "connection",
]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("SWFLOW_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic lattice on the flat torus prod_j [0, L_j)."""

    n: int
    sizes: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        if not 1 <= self.n <= 6:
            raise ValueError(f"dimension n must be in 1..6, got {self.n}")
        if len(self.sizes) != self.n or len(self.lengths) != self.n:
            raise ValueError("sizes and lengths must have one entry per axis")
        for N in self.sizes:
            if N < 4 or N % 2:
                raise ValueError(f"grid sizes must be even and >= 4, got {N}")
        for L in self.lengths:
            if not L > 0:
                raise ValueError(f"periods must be positive, got {L}")

    @property
    def cell_volume(self) -> float:
        return math.prod(L / N for L, N in zip(self.lengths, self.sizes))

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    @property
    def num_sites(self) -> int:
        return math.prod(self.sizes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / N for L, N in zip(self.lengths, self.sizes))

    @property
    def diameter(self) -> float:
        """Largest torus distance between two points."""
        return math.sqrt(sum((L / 2) ** 2 for L in self.lengths))

    @cached_property
    def mode_index(self) -> tuple[np.ndarray, ...]:
        """Signed integer mode numbers per axis, broadcast-shaped."""
        out = []
        for j, N in enumerate(self.sizes):
            m = np.fft.fftfreq(N, 1.0 / N).astype(int)
            shape = [1] * self.n
            shape[j] = N
            out.append(m.reshape(shape))
        return tuple(out)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Derivative wavenumbers per axis with the Nyquist mode zeroed."""
        out = []
        for j, (N, L) in enumerate(zip(self.sizes, self.lengths)):
            m = self.mode_index[j].astype(float)
            m[np.abs(m) == N // 2] = 0.0
            out.append(2 * np.pi / L * m)
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|xi|^2 symbol of the (positive) Laplacian, Nyquist modes excluded."""
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |m_j| <= N_j // 3 on every axis."""
        mask = np.ones(self.sizes, dtype=bool)
        for j, N in enumerate(self.sizes):
            mask = mask & (np.abs(self.mode_index[j]) <= N // 3)
        return mask

    def coordinates(self) -> tuple[np.ndarray, ...]:
        axes = [np.arange(N) * (L / N) for N, L in zip(self.sizes, self.lengths)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def rescaled(self, factor: float) -> "TorusGrid":
        """Same lattice with every period multiplied by ``factor``."""
        return TorusGrid(self.n, self.sizes, tuple(L * factor for L in self.lengths))

    def to_dict(self) -> dict:
        return {"n": self.n, "sizes": list(self.sizes), "lengths": list(self.lengths)}


def make_grid(n: int, sizes: Sequence[int], lengths: Sequence[float] | None = None) -> TorusGrid:
    if lengths is None:
        lengths = [2 * np.pi] * n
    return TorusGrid(int(n), tuple(int(N) for N in sizes), tuple(float(L) for L in lengths))


@dataclass(frozen=True, eq=False)
class Field:
    """Tensor-spinor valued field on a torus grid.

    ``rank`` counts covariant indices; the last ``form_degree`` of them are an
    antisymmetric form block. ``spinor_rank`` is the number of complex
    components of the spinor factor (1 for forms and scalars).
    """

    grid: TorusGrid
    data: np.ndarray
    rank: int = 0
    spinor_rank: int = 1
    form_degree: int = 0
    purely_imaginary: bool = False

    def __post_init__(self):
        expected = (self.grid.n,) * self.rank + (self.spinor_rank,) + self.grid.sizes
        if self.data.shape != expected:
            raise ValueError(f"field data shape {self.data.shape} != expected {expected}")
        if self.form_degree > self.rank:
            raise ValueError("form_degree cannot exceed rank")

    @property
    def comps(self) -> np.ndarray:
        return self.data

    def with_data(self, data: np.ndarray, **changes) -> "Field":
        return replace(self, data=data, **changes)

    def like(self, data: np.ndarray) -> "Field":
        return replace(self, data=data)

    def __add__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return self.like(self.data + other.data)

    def __sub__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return self.like(self.data - other.data)

    def __neg__(self) -> "Field":
        return self.like(-self.data)

    def __mul__(self, c) -> "Field":
        if isinstance(c, Field):
            raise TypeError("use pointwise helpers for field products")
        out = self.like(self.data * c)
        if self.purely_imaginary and np.iscomplexobj(c) and np.imag(c) != 0:
            out = replace(out, purely_imaginary=False)
        return out

    __rmul__ = __mul__

    def copy(self) -> "Field":
        return self.like(self.data.copy())


@dataclass(frozen=True)
class BumpWeight:
    gamma: Field
    s: float

    def __post_init__(self):
        g = self.gamma.data
        if np.any(np.abs(g.imag) > 0) or g.real.min() < 0 or g.real.max() > 1:
            raise ValueError("bump weight must take values in [0, 1]")
        if not self.s > 0:
            raise ValueError("bump exponent s must be positive")


def _check_compatible(f: Field, g: Field) -> None:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    if f.data.shape != g.data.shape or f.form_degree != g.form_degree:
        raise ValueError(
            f"shape mismatch: rank {f.rank}/{g.rank}, spinor rank "
            f"{f.spinor_rank}/{g.spinor_rank}, form degree {f.form_degree}/{g.form_degree}"
        )


# -- constructors -----------------------------------------------------------


def zeros(grid: TorusGrid, rank: int = 0, spinor_rank: int = 1, form_degree: int = 0,
          purely_imaginary: bool = False) -> Field:
    shape = (grid.n,) * rank + (spinor_rank,) + grid.sizes
    return Field(grid, np.zeros(shape, dtype=complex), rank, spinor_rank, form_degree,
                 purely_imaginary)


def scalar(grid: TorusGrid, values) -> Field:
    values = np.broadcast_to(np.asarray(values, dtype=complex), grid.sizes)
    return Field(grid, values[None].copy(), 0, 1)


def spinor(grid: TorusGrid, *components) -> Field:
    data = np.stack([np.broadcast_to(np.asarray(c, dtype=complex), grid.sizes) for c in components])
    return Field(grid, data, 0, len(components))


def connection(grid: TorusGrid, *imag_parts) -> Field:
    """Connection form ``A = i a`` from the real 1-form components ``a_j``."""
    if len(imag_parts) != grid.n:
        raise ValueError("need one component per axis")
    data = np.stack([1j * np.broadcast_to(np.asarray(a, dtype=float), grid.sizes)
                     for a in imag_parts])
    return Field(grid, data[:, None].astype(complex), 1, 1, 1, True)


# -- spectral machinery -----------------------------------------------------


def _axes(grid: TorusGrid) -> tuple[int, ...]:
    return tuple(range(-grid.n, 0))


def fft(data: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return sfft.fftn(data, axes=_axes(grid), workers=_workers())


def ifft(data: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return sfft.ifftn(data, axes=_axes(grid), workers=_workers())


def apply_symbol(data: np.ndarray, grid: TorusGrid, symbol: np.ndarray) -> np.ndarray:
    return ifft(fft(data, grid) * symbol, grid)


def spectral_partial(f: Field, axis: int) -> Field:
    """Exact derivative along ``axis`` for band-limited data; Nyquist mode dropped."""
    if not 0 <= axis < f.grid.n:
        raise ValueError(f"axis {axis} out of range for n={f.grid.n}")
    out = apply_symbol(f.data, f.grid, 1j * f.grid.wavenumbers[axis])
    if f.purely_imaginary:
        out = 1j * out.imag
    return f.like(out)


def partials(data: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Stack of all first partials, new axis first."""
    hat = fft(data, grid)
    return np.stack([ifft(1j * k * hat, grid) for k in grid.wavenumbers])


def dealias(f: Field) -> Field:
    """2/3-rule spectral truncation."""
    out = apply_symbol(f.data, f.grid, f.grid.dealias_mask)
    if f.purely_imaginary:
        out = 1j * out.imag
    return f.like(out)


# -- inner products and norms -----------------------------------------------


def _form_factor(f: Field) -> float:
    return 1.0 / math.factorial(f.form_degree)


def l2_inner(f: Field, g: Field) -> complex:
    """Hermitian L2 pairing, linear in ``f`` and conjugate-linear in ``g``."""
    _check_compatible(f, g)
    return complex(np.vdot(g.data, f.data) * f.grid.cell_volume * _form_factor(f))


def l2_norm(f: Field) -> float:
    return math.sqrt(max(l2_inner(f, f).real, 0.0))


def pointwise_norm(f: Field) -> np.ndarray:
    sq = np.sum(np.abs(f.data.reshape((-1,) + f.grid.sizes)) ** 2, axis=0)
    return np.sqrt(sq * _form_factor(f))


def lp_norm(f: Field, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float((np.sum(pointwise_norm(f) ** p) * f.grid.cell_volume) ** (1.0 / p))


def sup_norm(f: Field) -> float:
    return float(pointwise_norm(f).max())


def torus_distance(grid: TorusGrid, center: Sequence[float]) -> np.ndarray:
    """Distance from every site to ``center`` on the flat torus."""
    if len(center) != grid.n:
        raise ValueError("center must have one coordinate per axis")
    sq = np.zeros(grid.sizes)
    for x, c, L in zip(grid.coordinates(), center, grid.lengths):
        d = np.abs(x - c) % L
        sq += np.minimum(d, L - d) ** 2
    return np.sqrt(sq)


def ball_lp_norm(f: Field, center: Sequence[float], radius: float, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if not radius > 0:
        raise ValueError("radius must be positive")
    if radius >= f.grid.diameter:
        return lp_norm(f, p)
    inside = torus_distance(f.grid, center) < radius
    if not inside.any():
        raise ValueError(f"ball of radius {radius} around {tuple(center)} contains no sites")
    vals = pointwise_norm(f)[inside]
    return float((np.sum(vals**p) * f.grid.cell_volume) ** (1.0 / p))


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity transition from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def bump_function(grid: TorusGrid, center: Sequence[float], r_plateau: float,
                  r_support: float, band_limit: bool = False) -> Field:
    """Smooth cutoff equal to 1 on B(center, r_plateau) and 0 off B(center, r_support).

    With ``band_limit`` the profile is additionally 2/3-truncated and clamped
    to [0, 1]; the exact plateau/support values then hold only approximately.
    """
    if not 0 < r_plateau < r_support:
        raise ValueError("need 0 < r_plateau < r_support")
    if r_support >= min(grid.lengths) / 2:
        raise ValueError("r_support must stay below half the smallest period")
    dist = torus_distance(grid, center)
    gamma = 1.0 - _smooth_step((dist - r_plateau) / (r_support - r_plateau))
    if band_limit:
        gamma = apply_symbol(gamma.astype(complex), grid, grid.dealias_mask).real
        gamma = np.clip(gamma, 0.0, 1.0)
    return scalar(grid, gamma)


def weighted_l2_norm(f: Field, w: BumpWeight) -> float:
    """``|| gamma^(s/2) f ||_L2``."""
    if w.gamma.grid != f.grid:
        raise ValueError("weight and field live on different grids")
    weight = w.gamma.data[0].real ** (w.s / 2)
    weighted = f.like(f.data * weight)
    return l2_norm(weighted)


def random_band_limited(grid: TorusGrid, rank: int = 0, spinor_rank: int = 1, kmax: int = 2,
                        seed: int = 0, amplitude: float = 1.0, kind: str = "complex",
                        form_degree: int = 0) -> Field:
    """Random field with Fourier support in the box |m_j| <= kmax.

    ``kind`` is ``"complex"`` (spinors), ``"imaginary"`` (connection forms) or
    ``"real"`` (gauge phases). The result is scaled so its sup norm equals
    ``amplitude``.
    """
    if kind not in ("complex", "imaginary", "real"):
        raise ValueError(f"unknown kind {kind!r}")
    if kmax < 0 or 3 * kmax >= min(grid.sizes):
        raise ValueError(f"kmax={kmax} must satisfy kmax < min(N)/3")
    rng = np.random.default_rng(seed)
    shape = (grid.n,) * rank + (spinor_rank,) + grid.sizes
    if amplitude == 0:
        return Field(grid, np.zeros(shape, dtype=complex), rank, spinor_rank, form_degree,
                     kind == "imaginary")
    box = np.ones(grid.sizes, dtype=bool)
    for m in grid.mode_index:
        box = box & (np.abs(m) <= kmax)
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    vals = ifft(coeffs * box, grid)
    if kind == "real":
        vals = vals.real.astype(complex)
    elif kind == "imaginary":
        vals = 1j * vals.real
    f = Field(grid, vals, rank, spinor_rank, form_degree, kind == "imaginary")
    scale = sup_norm(f)
    return f.like(vals * (amplitude / scale))
