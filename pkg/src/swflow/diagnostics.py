"""Scaling, concentration and bound diagnostics for flow trajectories."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .diffgeo import coulomb_project, curvature, gauge_act, iterated_cov_deriv, iterated_flat_deriv
from .flow import FlowState, Trajectory, deturck_to_flow, flow_rhs
from .functional import spinor_density
from .grid import (
    BumpWeight,
    Field,
    TorusGrid,
    ball_lp_norm,
    dealias as dealias_field,
    fft,
    ifft,
    l2_norm,
    pointwise_norm,
    sup_norm,
    weighted_l2_norm,
)

__all__ = [
    "DIMENSION_CLASSES",
    "classify_dimension",
    "scaling_exponent",
    "RescaleParams",
    "blowup_lambda",
    "lambda_scale",
    "scaled_residual",
    "ConcentrationReport",
    "default_centers",
    "concentration_scan",
    "blowup_sequence",
    "SpinorBoundReport",
    "spinor_bound_monitor",
    "weighted_local_energy",
    "write_diagnostics_csv",
    "DIAGNOSTICS_COLUMNS",
    "diagnostics_columns",
]

DIMENSION_CLASSES = ("subcritical", "critical", "supercritical")


def classify_dimension(n: int, k: int) -> str:
    """Compare the base dimension with the critical dimension ``2(k+2)``."""
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    crit = 2 * (k + 2)
    if n < crit:
        return "subcritical"
    if n == crit:
        return "critical"
    return "supercritical"


def scaling_exponent(n: int, p: float, k: int) -> float:
    """Exponent ``e`` with ``|F^lam|_p^p = (lam^(2k+2))^e |F|_p^p``, i.e. ``(2p-n)/(2k+2)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if k < 0:
        raise ValueError("k must be >= 0")
    return (2 * p - n) / (2 * k + 2)


# -- rescaling ------------------------------------------------------------------


@dataclass(frozen=True)
class RescaleParams:
    """Parabolic rescaling ``G(y, s) = lam * G(x_c + lam y, t_b + lam^(2k+2) s)``.

    By default the result lives on the torus with periods ``L / lam`` on the
    same number of sites, which is exact for every ``lam > 0``. With
    ``same_grid`` the field is instead resampled on the original torus, which
    needs an integer ``lam`` and a field whose Fourier modes above 1e-10 of
    the peak all lie below ``N / (2 lam)``.
    """

    lam: float
    k: int = 0
    center: tuple[float, ...] | None = None
    base_time: float = 0.0
    same_grid: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.k < 0:
            raise ValueError("k must be >= 0")

    @property
    def time_factor(self) -> float:
        """``lam^(2k+2)``: one unit of rescaled time is this much original time."""
        return self.lam ** (2 * self.k + 2)


def blowup_lambda(sup_F: float, k: int, convention: str = "unit_curvature") -> float:
    """Spatial rescaling factor for a blow-up point with curvature ``sup_F``.

    ``unit_curvature`` returns ``sup_F**-1/2`` (rescaled curvature has size 1).
    ``parabolic`` returns the matching time factor ``sup_F**-(k+1)``.
    """
    if not sup_F > 0:
        raise ValueError("curvature must be positive")
    if convention == "unit_curvature":
        return sup_F ** -0.5
    if convention == "parabolic":
        return sup_F ** -(k + 1)
    raise ValueError(f"unknown convention {convention!r}")


def _shift_to_origin(f: Field, center: Sequence[float]) -> Field:
    """Translate so that ``center`` moves to the origin (``g(x) = f(x + c)``)."""
    grid = f.grid
    shifts = [c / h for c, h in zip(center, grid.spacing)]
    if all(abs(s - round(s)) < 1e-9 for s in shifts):
        axes = tuple(range(-grid.n, 0))
        data = np.roll(f.data, tuple(-int(round(s)) for s in shifts), axis=axes)
        return f.like(data)
    phase = sum(k * c for k, c in zip(grid.wavenumbers, center))
    data = ifft(fft(f.data, grid) * np.exp(1j * phase), grid)
    return f.like(1j * data.imag if f.purely_imaginary else data)


def _dilate_same_grid(f: Field, lam: float) -> Field:
    m = int(round(lam))
    if abs(lam - m) > 1e-12 or m < 1:
        raise ValueError(f"same-grid rescaling needs an integer lambda, got {lam}")
    grid = f.grid
    hat = fft(f.data, grid)
    band = np.abs(hat).reshape(-1, *grid.sizes).max(axis=0) > 1e-10 * max(np.abs(hat).max(), 1e-300)
    for mi, N in zip(grid.mode_index, grid.sizes):
        # sizes are even, so the highest unaliased mode is N/2 - 1
        if np.any(np.abs(np.broadcast_to(mi, grid.sizes)[band]) * m > N // 2 - 1):
            raise ValueError(f"field band too wide for lambda={m} on {N} sites")
    idx = tuple((np.arange(N) * m) % N for N in grid.sizes)
    data = f.data[(Ellipsis,) + np.ix_(*idx)]
    return f.like(data)


def _rescale_field(f: Field, p: RescaleParams, grid: TorusGrid) -> Field:
    if p.center is not None:
        f = _shift_to_origin(f, p.center)
    if p.same_grid:
        f = _dilate_same_grid(f, p.lam)
        return f.like(f.data * p.lam)
    return Field(grid, f.data * p.lam, f.rank, f.spinor_rank, f.form_degree, f.purely_imaginary)


def lambda_scale(state: FlowState, params: RescaleParams) -> FlowState:
    """Rescaled state at rescaled time ``(t - base_time) / lam^(2k+2)``.

    Curvature transforms as ``F^lam(y) = lam^2 F(x_c + lam y)``. Any gauge
    accumulator is dropped.
    """
    grid = state.grid if params.same_grid else state.grid.rescaled(1.0 / params.lam)
    phi = _rescale_field(state.phi, params, grid)
    a = _rescale_field(state.a, params, grid)
    t = (state.t - params.base_time) / params.time_factor
    return FlowState(phi, a, t, None)


def _scaled_gradients(state: FlowState, lam: float, k: int, S0: float,
                      dealias: bool) -> tuple[Field, Field]:
    """Negated right-hand side of the rescaled system.

    Only the potential changes: ``lam^(2k)/4 (lam^2 S0 + |phi|^2) phi``.
    """
    v_phi, v_a = flow_rhs(state, k, 0.0, dealias)
    rho = spinor_density(state.phi)
    extra = (lam ** (2 * k) - 1.0) / 4 * rho + lam ** (2 * k + 2) * S0 / 4
    corr = state.phi.like(extra[None] * state.phi.data)
    if dealias:
        corr = dealias_field(corr)
    return v_phi - corr, v_a


def scaled_residual(traj: Trajectory, params: RescaleParams, S0: float | None = None,
                    dealias: bool | None = None) -> float:
    """Largest defect of the rescaled trajectory in the rescaled flow equations.

    Rates come from centered differences of consecutive rescaled states. A
    gauge-fixed trajectory is first mapped back to the direct flow.
    """
    S0 = traj.S0 if S0 is None else S0
    dealias = traj.dealias if dealias is None else dealias
    if params.k != traj.k:
        raise ValueError("rescaling order must match the trajectory's k")
    if len(traj.states) < 3:
        raise ValueError("need at least three stored states")
    t0, t1 = traj.states[0].t, traj.states[-1].t
    if not t0 - 1e-12 <= params.base_time <= t1 + 1e-12:
        raise ValueError("base_time lies outside the trajectory")
    if all(s.theta is not None for s in traj.states):
        traj = deturck_to_flow(traj)
    scaled = [lambda_scale(s, params) for s in traj.states]
    worst = 0.0
    for i in range(1, len(scaled) - 1):
        lo, mid, hi = scaled[i - 1], scaled[i], scaled[i + 1]
        span = hi.t - lo.t
        phi_dot = (hi.phi - lo.phi) * (1 / span)
        a_dot = (hi.a - lo.a) * (1 / span)
        v_phi, v_a = _scaled_gradients(mid, params.lam, params.k, S0, dealias)
        num = l2_norm(phi_dot - v_phi) + l2_norm(a_dot - v_a)
        den = l2_norm(v_phi) + l2_norm(v_a)
        r = 0.0 if den == 0 and num == 0 else (math.inf if den == 0 else num / den)
        worst = max(worst, r)
    return worst


# -- concentration ----------------------------------------------------------------


@dataclass
class ConcentrationReport:
    """Ball norms ``values[time, center, radius]`` and the flagged centers."""

    times: np.ndarray
    centers: list[tuple[float, ...]]
    radii: np.ndarray
    values: np.ndarray
    p: float
    epsilon: float
    flagged: list[int] = field(default_factory=list)

    @property
    def flagged_centers(self) -> list[tuple[float, ...]]:
        return [self.centers[i] for i in self.flagged]

    def rows(self):
        for it, t in enumerate(self.times):
            for ic, c in enumerate(self.centers):
                for ir, r in enumerate(self.radii):
                    yield t, c, r, self.values[it, ic, ir], ic in self.flagged

    def write_csv(self, path) -> None:
        n = len(self.centers[0]) if self.centers else 0
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x{j}" for j in range(n)] + ["radius", "lp_norm", "flagged"])
            for t, c, r, v, flag in self.rows():
                w.writerow([_fmt(t)] + [_fmt(x) for x in c] + [_fmt(r), _fmt(v), int(flag)])


def default_centers(grid: TorusGrid, snapshots: Sequence[Field] = (),
                    stride: int = 4) -> list[tuple[float, ...]]:
    """Coarse sublattice (every ``stride``-th site) plus the sup|F| argmax of each snapshot."""
    axes = [np.arange(0, N, stride) * h for N, h in zip(grid.sizes, grid.spacing)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = [tuple(float(x) for x in pt) for pt in zip(*(m.ravel() for m in mesh))]
    coords = grid.coordinates()
    seen = set(centers)
    for F in snapshots:
        idx = np.unravel_index(np.argmax(pointwise_norm(F)), grid.sizes)
        pt = tuple(float(c[idx]) for c in coords)
        if pt not in seen:
            centers.append(pt)
            seen.add(pt)
    return centers


def concentration_scan(F_snapshots: Sequence[Field], p: float, radii: Sequence[float],
                       centers: Sequence[Sequence[float]] | None = None, epsilon: float = 1e-2,
                       times: Sequence[float] | None = None) -> ConcentrationReport:
    """Local ``L^p`` norms of each curvature snapshot on shrinking balls.

    A center is flagged when its value on the smallest ball at the latest
    snapshot exceeds ``epsilon``.
    """
    if not F_snapshots:
        raise ValueError("no curvature snapshots given")
    if p < 1:
        raise ValueError("p must be >= 1")
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(radii <= 0):
        raise ValueError("radii must be a non-empty list of positive numbers")
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be strictly descending")
    grid = F_snapshots[0].grid
    if centers is None:
        centers = default_centers(grid, F_snapshots)
    centers = [tuple(float(x) for x in c) for c in centers]
    times = np.arange(len(F_snapshots), dtype=float) if times is None else np.asarray(times, float)
    values = np.zeros((len(F_snapshots), len(centers), radii.size))
    for it, F in enumerate(F_snapshots):
        for ic, c in enumerate(centers):
            for ir, r in enumerate(radii):
                values[it, ic, ir] = ball_lp_norm(F, c, r, p)
    flagged = [ic for ic in range(len(centers)) if values[-1, ic, -1] > epsilon]
    return ConcentrationReport(times, centers, radii, values, p, epsilon, flagged)


# -- blow-up sequence ---------------------------------------------------------------


def blowup_sequence(traj: Trajectory, count: int = 3) -> list[FlowState]:
    """Rescaled, Coulomb-gauged states at the last ``count`` running maxima of sup|F|.

    Each output is centered at its argmax point and scaled by
    ``lam = sup|F|^(-1/2)`` so that its curvature has sup norm 1.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    best = -math.inf
    picks = []
    for i, s in enumerate(traj.states):
        F = curvature(s.a)
        val = sup_norm(F)
        if val > best:
            if i > 0:
                picks.append((i, F, val))
            best = val
    if not picks:
        raise ValueError("no curvature growth along the trajectory")
    out = []
    coords = traj.states[0].grid.coordinates()
    for i, F, val in picks[-count:]:
        s = traj.states[i]
        idx = np.unravel_index(np.argmax(pointwise_norm(F)), s.grid.sizes)
        center = tuple(float(c[idx]) for c in coords)
        params = RescaleParams(blowup_lambda(val, traj.k), traj.k, center, s.t)
        r = lambda_scale(replace(s, theta=None), params)
        a, g = coulomb_project(r.a)
        out.append(FlowState(gauge_act(g, r.phi), a, r.t, None))
    return out


# -- spinor bound ---------------------------------------------------------------------


@dataclass
class SpinorBoundReport:
    times: np.ndarray
    sup_phi: np.ndarray
    l2_phi: np.ndarray
    level: float
    flagged_times: list[float]
    max_l2_increase: float

    @property
    def ok(self) -> bool:
        return not self.flagged_times

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "sup_phi", "l2_phi", "level", "flagged"])
            flagged = set(self.flagged_times)
            for t, s, l2 in zip(self.times, self.sup_phi, self.l2_phi):
                w.writerow([_fmt(t), _fmt(s), _fmt(l2), _fmt(self.level), int(t in flagged)])


def spinor_bound_monitor(traj: Trajectory, S0: float | None = None,
                         eps_monitor: float | None = None) -> SpinorBoundReport:
    """Watch sup|phi| against ``max(sup|phi_0|, sqrt(max(-S0, 0))) + eps``.

    ``eps`` defaults to ``1e-3 (1 + sqrt|S0|)``. For ``S0 = 0`` this is the
    initial sup norm plus tolerance.
    """
    S0 = traj.S0 if S0 is None else S0
    eps = 1e-3 * (1 + math.sqrt(abs(S0))) if eps_monitor is None else eps_monitor
    times = np.array([r.t for r in traj.records])
    sup_phi = np.array([r.sup_phi for r in traj.records])
    l2_phi = np.array([r.l2_phi for r in traj.records])
    level = max(sup_phi[0], math.sqrt(max(-S0, 0.0))) + eps
    flagged = [float(t) for t, s in zip(times, sup_phi) if s > level]
    inc = float(np.max(np.diff(l2_phi))) if l2_phi.size > 1 else 0.0
    return SpinorBoundReport(times, sup_phi, l2_phi, level, flagged, inc)


# -- weighted local energy ---------------------------------------------------------


def weighted_local_energy(state: FlowState, w: BumpWeight, l: int, k: int) -> float:
    """``|gamma^(s/2) nabla_A^l phi|^2 + |gamma^(s/2) nabla^l F_A|^2``; needs ``s >= 2(k+l)``."""
    if l < 0 or k < 0:
        raise ValueError("l and k must be >= 0")
    if w.s < 2 * (k + l):
        raise ValueError(f"weight exponent s={w.s} below 2(k+l)={2 * (k + l)}")
    Dphi = iterated_cov_deriv(state.a, state.phi, l)
    DF = iterated_flat_deriv(curvature(state.a), l)
    return weighted_l2_norm(Dphi, w) ** 2 + weighted_l2_norm(DF, w) ** 2


# -- CSV export -------------------------------------------------------------------------


def _fmt(x) -> str:
    return "%.17g" % x


def diagnostics_columns(k: int) -> list[str]:
    cols = list(DIAGNOSTICS_COLUMNS)
    cols[cols.index("lp_F")] = f"lp_F_{k + 2}"
    return cols


DIAGNOSTICS_COLUMNS = ("t", "E_k_total", "E_k_curv", "E_k_dirichlet", "E_k_scalar",
                       "E_k_quartic", "E_sw_total", "sup_phi", "l2_phi", "sup_F", "lp_F",
                       "energy_identity_residual")


def write_diagnostics_csv(traj: Trajectory, path) -> list[str]:
    """One row per recorded step; floats printed with 17 significant digits."""
    cols = diagnostics_columns(traj.k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in traj.records:
            w.writerow([_fmt(v) for v in r.row().values()])
    return cols
