"""Time integration of the gradient flow and of its gauge-fixed parabolic form.

The direct flow ``phi_t = -g_phi``, ``A_t = -g_A`` is degenerate along gauge
orbits. The gauge-fixed system adds the infinitesimal gauge action generated
by ``f = (d*d)^k d* a`` (with ``A = i a``)::

    phi_t = -g_phi + i f phi
    A_t   = -g_A   - i d f

which makes the leading symbol ``-|xi|^(2k+2)`` on both fields. Solutions are
mapped back to the direct flow by the gauge with phase ``theta_t = f``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .diffgeo import (
    GaugePhase,
    codifferential,
    curvature,
    exterior_d,
    gauge_transform,
    laplacian_power,
)
from .functional import EnergyBreakdown, gradients, sw_energy, sw_energy_k
from .grid import (
    Field,
    TorusGrid,
    apply_symbol,
    dealias as dealias_field,
    l2_norm,
    lp_norm,
    make_grid,
    random_band_limited,
    scalar,
    sup_norm,
)

__all__ = [
    "INTEGRATORS",
    "TERMINATIONS",
    "StepRejected",
    "InitSpec",
    "FlowConfig",
    "FlowState",
    "DiagnosticsRecord",
    "Trajectory",
    "flow_rhs",
    "deturck_rhs",
    "deturck_generator",
    "stability_limit",
    "step_rk4",
    "step_imex",
    "gauge_ode_step",
    "deturck_to_flow",
    "residual_flow",
    "trajectory_residuals",
    "dissipation_rate",
    "dissipation_check",
    "initial_state",
    "record_diagnostics",
    "run_flow",
]

INTEGRATORS = ("imex_deturck", "rk4_direct")
TERMINATIONS = ("completed", "blowup_detected", "step_rejected")

# RK4's real-axis stability interval is [-2.785, 0]
RK4_STABILITY = 2.78


class StepRejected(RuntimeError):
    """Raised when a step would violate the stability bound or produce non-finite values."""


@dataclass(frozen=True)
class InitSpec:
    seed: int = 0
    kmax: int = 2
    amp_phi: float = 0.1
    amp_a: float = 0.1
    spinor_rank: int = 1


@dataclass(frozen=True)
class FlowConfig:
    n: int
    sizes: tuple[int, ...]
    k: int
    dt: float
    t_end: float
    S0: float = 0.0
    lengths: tuple[float, ...] | None = None
    integrator: str = "imex_deturck"
    dealias: bool = True
    init: InitSpec = field(default_factory=InitSpec)
    record_every: int = 1
    snapshot_every: int = 100
    blowup_ceiling: float = 1e6
    fd_h: float = 1e-4
    fd_num_directions: int = 20

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.record_every < 1 or self.snapshot_every < 1:
            raise ValueError("cadences must be positive integers")
        if not self.blowup_ceiling > 0:
            raise ValueError("blowup_ceiling must be positive")

    @property
    def grid(self) -> TorusGrid:
        return make_grid(self.n, self.sizes, self.lengths)

    @property
    def rhs_kind(self) -> str:
        return "deturck" if self.integrator == "imex_deturck" else "direct"

    def to_dict(self) -> dict:
        return {
            "grid": {"n": self.n, "sizes": list(self.sizes),
                     "lengths": list(self.grid.lengths)},
            "k": self.k,
            "S0": self.S0,
            "dt": self.dt,
            "t_end": self.t_end,
            "integrator": self.integrator,
            "dealias": self.dealias,
            "init": {"seed": self.init.seed, "kmax": self.init.kmax,
                     "amp_phi": self.init.amp_phi, "amp_a": self.init.amp_a,
                     "spinor_rank": self.init.spinor_rank},
            "cadence": {"record_every": self.record_every,
                        "snapshot_every": self.snapshot_every},
            "blowup_ceiling": self.blowup_ceiling,
            "fd": {"h": self.fd_h, "num_directions": self.fd_num_directions},
        }


@dataclass(frozen=True)
class FlowState:
    phi: Field
    a: Field
    t: float = 0.0
    theta: GaugePhase | None = None

    def __post_init__(self):
        if not self.a.purely_imaginary:
            raise ValueError("connection must be flagged purely imaginary")
        if self.a.grid != self.phi.grid:
            raise ValueError("phi and a live on different grids")

    @property
    def grid(self) -> TorusGrid:
        return self.phi.grid


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    t: float
    energy: EnergyBreakdown
    sw_total: float
    sup_phi: float
    l2_phi: float
    sup_F: float
    lp_F: float
    dissipation: float
    energy_identity_residual: float = float("nan")

    def row(self) -> dict:
        e = self.energy
        return {
            "t": self.t,
            "E_k_total": e.total,
            "E_k_curv": e.curvature_term,
            "E_k_dirichlet": e.dirichlet_term,
            "E_k_scalar": e.scalar_term,
            "E_k_quartic": e.quartic_term,
            "E_sw_total": self.sw_total,
            "sup_phi": self.sup_phi,
            "l2_phi": self.l2_phi,
            "sup_F": self.sup_F,
            "lp_F": self.lp_F,
            "energy_identity_residual": self.energy_identity_residual,
        }


@dataclass
class Trajectory:
    """Retained states, the diagnostics series, and how the run ended.

    ``records`` holds one entry per recorded step; every retained state has a
    record with the same step index.
    """

    states: list[FlowState]
    records: list[DiagnosticsRecord]
    termination: str
    k: int
    S0: float
    steps: list[int] = field(default_factory=list)
    message: str = ""
    dealias: bool = False
    config: FlowConfig | None = None
    wall_seconds: float = 0.0

    def __post_init__(self):
        if self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.termination!r}")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def record_for(self, i: int) -> DiagnosticsRecord:
        step = self.steps[i]
        for r in self.records:
            if r.step == step:
                return r
        raise KeyError(step)

    def pairs(self) -> list[tuple[FlowState, DiagnosticsRecord]]:
        return [(s, self.record_for(i)) for i, s in enumerate(self.states)]

    def energies(self) -> np.ndarray:
        return np.array([r.energy.total for r in self.records])


# -- right-hand sides ---------------------------------------------------------


def _project(f: Field, on: bool) -> Field:
    return dealias_field(f) if on else f


def flow_rhs(state: FlowState, k: int, S0: float = 0.0,
             dealias: bool = False) -> tuple[Field, Field]:
    """``(-g_phi, -g_A)``; with ``dealias`` both are 2/3-truncated."""
    g = gradients(state.a, state.phi, k, S0)
    return _project(-g.g_phi, dealias), _project(-g.g_A, dealias)


def deturck_generator(a: Field, k: int) -> Field:
    """Real scalar ``(d*d)^k d* a`` for ``A = i a``."""
    div = codifferential(a).data[0].imag
    return laplacian_power(scalar(a.grid, div), k)


def _deturck_terms(state: FlowState, k: int) -> tuple[Field, Field, Field]:
    f = deturck_generator(state.a, k)
    fr = f.data[0].real
    phi_term = state.phi.like(1j * fr[None] * state.phi.data)
    a_term = state.a.like(-1j * exterior_d(f).data.real)
    return phi_term, a_term, f


def deturck_rhs(state: FlowState, k: int, S0: float = 0.0,
                dealias: bool = False) -> tuple[Field, Field]:
    """Gauge-fixed right-hand side: :func:`flow_rhs` plus the gauge-fixing terms."""
    g = gradients(state.a, state.phi, k, S0)
    phi_term, a_term, _ = _deturck_terms(state, k)
    return (_project(phi_term - g.g_phi, dealias), _project(a_term - g.g_A, dealias))


def _rhs(kind: str) -> Callable:
    if kind == "direct":
        return flow_rhs
    if kind == "deturck":
        return deturck_rhs
    raise ValueError(f"rhs kind must be 'direct' or 'deturck', got {kind!r}")


# -- steppers -----------------------------------------------------------------


def _active_xi_max(grid: TorusGrid, dealias: bool) -> float:
    k2 = grid.k_squared
    if dealias:
        k2 = np.where(grid.dealias_mask, k2, 0.0)
    return float(np.sqrt(k2.max()))


def stability_limit(grid: TorusGrid, k: int, dealias: bool = False) -> float:
    """Largest explicit RK4 step for the symbol ``-|xi|^(2k+2)`` on the active band."""
    xi = _active_xi_max(grid, dealias)
    if xi == 0:
        return math.inf
    return RK4_STABILITY / xi ** (2 * k + 2)


def _check_finite(state: FlowState) -> None:
    arrays = [state.phi.data, state.a.data]
    if state.theta is not None:
        arrays.append(state.theta.theta.data)
    if not all(np.all(np.isfinite(x)) for x in arrays):
        raise StepRejected("non-finite values produced")


def _imag(a: Field) -> Field:
    return a.like(1j * a.data.imag)


def gauge_ode_step(theta: GaugePhase, a, dt: float, k: int) -> GaugePhase:
    """Advance ``theta_t = (d*d)^k d* a``.

    ``a`` is either one connection (forward Euler) or the four stage values of
    a classical RK4 step, combined with weights 1/6, 1/3, 1/3, 1/6.
    """
    if isinstance(a, Field):
        stages, weights = [a], [1.0]
    else:
        stages = list(a)
        if len(stages) != 4:
            raise ValueError("expected a single connection or four RK stage values")
        weights = [1 / 6, 1 / 3, 1 / 3, 1 / 6]
    incr = sum(w * deturck_generator(s, k).data[0].real for w, s in zip(weights, stages))
    return GaugePhase(scalar(theta.theta.grid, theta.values + dt * incr))


def _axpy(state: FlowState, h: float, dphi: Field, da: Field, t: float) -> FlowState:
    return FlowState(state.phi + dphi * h, _imag(state.a + da * h), t, state.theta)


def step_rk4(state: FlowState, rhs_kind: str, dt: float, k: int, S0: float = 0.0,
             dealias: bool = False) -> FlowState:
    """Classical explicit RK4 step of the direct or gauge-fixed system.

    The phase accumulator, if present, is advanced with the same stages.
    """
    limit = stability_limit(state.grid, k, dealias)
    if dt > limit:
        raise StepRejected(f"dt={dt:g} exceeds the explicit stability limit {limit:.3g}")
    rhs = _rhs(rhs_kind)
    t = state.t
    s1 = state
    k1 = rhs(s1, k, S0, dealias)
    s2 = _axpy(state, dt / 2, *k1, t + dt / 2)
    k2 = rhs(s2, k, S0, dealias)
    s3 = _axpy(state, dt / 2, *k2, t + dt / 2)
    k3 = rhs(s3, k, S0, dealias)
    s4 = _axpy(state, dt, *k3, t + dt)
    k4 = rhs(s4, k, S0, dealias)
    phi = state.phi + (k1[0] + k2[0] * 2 + k3[0] * 2 + k4[0]) * (dt / 6)
    a = _imag(state.a + (k1[1] + k2[1] * 2 + k3[1] * 2 + k4[1]) * (dt / 6))
    theta = state.theta
    if theta is not None and rhs_kind == "deturck":
        theta = gauge_ode_step(theta, [s1.a, s2.a, s3.a, s4.a], dt, k)
    out = FlowState(phi, a, t + dt, theta)
    _check_finite(out)
    return out


class _Propagator:
    """``exp(h L)`` for ``L = -|xi|^(2k+2)``, applied in Fourier space."""

    def __init__(self, grid: TorusGrid, k: int, h: float):
        self.grid = grid
        sym = -grid.k_squared ** (k + 1)
        self.full = np.exp(h * sym)
        self.half = np.exp(0.5 * h * sym)
        self.sym = sym

    def apply(self, f: Field, which: str) -> Field:
        mult = self.full if which == "full" else self.half
        out = apply_symbol(f.data, self.grid, mult)
        return f.like(1j * out.imag if f.purely_imaginary else out)

    def linear(self, f: Field) -> Field:
        return f.like(apply_symbol(f.data, self.grid, self.sym))


def _lawson_pair(prop: _Propagator, which: str, phi: Field, a: Field) -> tuple[Field, Field]:
    return prop.apply(phi, which), prop.apply(a, which)


def step_imex(state: FlowState, dt: float, k: int, S0: float = 0.0,
              dealias: bool = False) -> FlowState:
    """Integrating-factor RK4 (Lawson) step of the gauge-fixed system.

    The diagonal part ``-|xi|^(2k+2)`` is integrated exactly; everything else
    is treated explicitly. The phase accumulator uses the same stages.
    """
    prop = _Propagator(state.grid, k, dt)

    def nonlinear(s: FlowState) -> tuple[Field, Field]:
        dphi, da = deturck_rhs(s, k, S0, dealias)
        return dphi - prop.linear(s.phi), _imag(da - prop.linear(s.a))

    t = state.t
    h = dt
    u_phi, u_a = state.phi, state.a
    n1 = nonlinear(state)

    p2, a2 = _lawson_pair(prop, "half", u_phi + n1[0] * (h / 2), u_a + n1[1] * (h / 2))
    s2 = FlowState(p2, _imag(a2), t + h / 2)
    n2 = nonlinear(s2)

    e_phi, e_a = _lawson_pair(prop, "half", u_phi, u_a)
    s3 = FlowState(e_phi + n2[0] * (h / 2), _imag(e_a + n2[1] * (h / 2)), t + h / 2)
    n3 = nonlinear(s3)

    E_phi, E_a = _lawson_pair(prop, "full", u_phi, u_a)
    h3_phi, h3_a = _lawson_pair(prop, "half", n3[0], n3[1])
    s4 = FlowState(E_phi + h3_phi * h, _imag(E_a + h3_a * h), t + h)
    n4 = nonlinear(s4)

    k1_phi, k1_a = _lawson_pair(prop, "full", n1[0], n1[1])
    mid_phi, mid_a = _lawson_pair(prop, "half", n2[0] + n3[0], n2[1] + n3[1])
    phi = E_phi + (k1_phi + mid_phi * 2 + n4[0]) * (h / 6)
    a = _imag(E_a + (k1_a + mid_a * 2 + n4[1]) * (h / 6))

    theta = state.theta
    if theta is not None:
        theta = gauge_ode_step(theta, [state.a, s2.a, s3.a, s4.a], dt, k)
    out = FlowState(phi, a, t + dt, theta)
    _check_finite(out)
    return out


# -- gauge reconstruction and residuals --------------------------------------


def _to_direct(state: FlowState) -> FlowState:
    if state.theta is None:
        raise ValueError("state carries no gauge phase accumulator")
    a, phi = gauge_transform(state.theta, state.a, state.phi)
    return FlowState(phi, _imag(a), state.t, state.theta)


def deturck_to_flow(traj: Trajectory) -> Trajectory:
    """Map a gauge-fixed trajectory to a solution of the direct flow."""
    states = [_to_direct(s) for s in traj.states]
    return replace(traj, states=states)


def residual_flow(state: FlowState, phi_dot: Field, a_dot: Field, k: int, S0: float = 0.0,
                  dealias: bool = False) -> float:
    """Relative defect of supplied rates in the direct flow equations.

    ``(|phi_dot + g_phi| + |a_dot + g_A|) / (|g_phi| + |g_A|)``, 0/0 -> 0.
    """
    g_phi, g_a = flow_rhs(state, k, S0, dealias)
    num = l2_norm(phi_dot - g_phi) + l2_norm(a_dot - g_a)
    den = l2_norm(g_phi) + l2_norm(g_a)
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return num / den


def _centered_rates(states: Sequence[FlowState], i: int) -> tuple[Field, Field]:
    lo, hi = states[i - 1], states[i + 1]
    span = hi.t - lo.t
    return (hi.phi - lo.phi) * (1 / span), _imag((hi.a - lo.a) * (1 / span))


def trajectory_residuals(traj: Trajectory, k: int | None = None, S0: float | None = None,
                         dealias: bool | None = None) -> np.ndarray:
    """:func:`residual_flow` at interior retained states, rates from centered differences."""
    k = traj.k if k is None else k
    S0 = traj.S0 if S0 is None else S0
    dealias = traj.dealias if dealias is None else dealias
    out = []
    for i in range(1, len(traj.states) - 1):
        phi_dot, a_dot = _centered_rates(traj.states, i)
        out.append(residual_flow(traj.states[i], phi_dot, a_dot, k, S0, dealias))
    return np.array(out)


def dissipation_rate(state: FlowState, k: int, S0: float = 0.0, dealias: bool = False) -> float:
    """``2|phi_t|^2 + |A_t|^2`` along the direct flow; equals ``-dE/dt``."""
    g_phi, g_a = flow_rhs(state, k, S0, dealias)
    return 2.0 * l2_norm(g_phi) ** 2 + l2_norm(g_a) ** 2


def dissipation_check(state: FlowState, dt: float, k: int, S0: float = 0.0,
                      integrator: str = "imex_deturck", dealias: bool = False) -> float:
    """``|dE/dt + D|`` at ``state`` with dE/dt from a second-order one-sided difference.

    Two steps of size ``dt`` are taken; the result shrinks like ``dt**2``.
    """
    e = [sw_energy_k(state.a, state.phi, k, S0).total]
    s = state
    for _ in range(2):
        s = _advance(s, integrator, dt, k, S0, dealias)
        e.append(sw_energy_k(s.a, s.phi, k, S0).total)
    slope = (-3 * e[0] + 4 * e[1] - e[2]) / (2 * dt)
    return abs(slope + dissipation_rate(state, k, S0, dealias))


def _advance(state: FlowState, integrator: str, dt: float, k: int, S0: float,
             dealias: bool) -> FlowState:
    if integrator == "imex_deturck":
        return step_imex(state, dt, k, S0, dealias)
    if integrator == "rk4_direct":
        return step_rk4(state, "direct", dt, k, S0, dealias)
    raise ValueError(f"unknown integrator {integrator!r}")


# -- driver -------------------------------------------------------------------


def initial_state(config: FlowConfig) -> FlowState:
    """Random band-limited data; phi uses ``seed``, the connection ``seed + 1``."""
    grid = config.grid
    ini = config.init
    phi = random_band_limited(grid, 0, ini.spinor_rank, ini.kmax, seed=ini.seed,
                              amplitude=ini.amp_phi, kind="complex")
    a = random_band_limited(grid, 1, 1, ini.kmax, seed=ini.seed + 1, amplitude=ini.amp_a,
                            kind="imaginary", form_degree=1)
    theta = GaugePhase.zero(grid) if config.integrator == "imex_deturck" else None
    return FlowState(phi, a, 0.0, theta)


def record_diagnostics(state: FlowState, step: int, k: int, S0: float,
                       dealias: bool = False) -> DiagnosticsRecord:
    F = curvature(state.a)
    return DiagnosticsRecord(
        step=step,
        t=state.t,
        energy=sw_energy_k(state.a, state.phi, k, S0),
        sw_total=sw_energy(state.a, state.phi, S0).total,
        sup_phi=sup_norm(state.phi),
        l2_phi=l2_norm(state.phi),
        sup_F=sup_norm(F),
        lp_F=lp_norm(F, k + 2),
        dissipation=dissipation_rate(state, k, S0, dealias),
    )


def _fill_identity_residuals(records: list[DiagnosticsRecord]) -> list[DiagnosticsRecord]:
    out = list(records)
    for i in range(1, len(records) - 1):
        lo, mid, hi = records[i - 1], records[i], records[i + 1]
        slope = (hi.energy.total - lo.energy.total) / (hi.t - lo.t)
        out[i] = replace(mid, energy_identity_residual=slope + mid.dissipation)
    return out


def run_flow(config: FlowConfig, initial: FlowState | None = None,
             progress: Callable[[int, FlowState], None] | None = None) -> Trajectory:
    """Integrate to ``t_end``, stopping early on blow-up or a rejected step.

    Diagnostics are recorded every ``record_every`` steps and states retained
    every ``snapshot_every`` steps; the first and last states are always kept.
    """
    started = time.perf_counter()
    k, S0, dealias = config.k, config.S0, config.dealias
    state = initial if initial is not None else initial_state(config)
    if config.integrator == "imex_deturck" and state.theta is None:
        state = replace(state, theta=GaugePhase.zero(state.grid))
    n_steps = int(math.ceil(config.t_end / config.dt - 1e-9)) if config.t_end > 0 else 0
    t0 = state.t

    states, steps = [state], [0]
    records = [record_diagnostics(state, 0, k, S0, dealias)]
    termination, message = "completed", ""
    if records[0].sup_F > config.blowup_ceiling:
        termination = "blowup_detected"
        n_steps = 0

    for step in range(1, n_steps + 1):
        t_target = min(t0 + step * config.dt, t0 + config.t_end)
        h = t_target - state.t
        try:
            new = _advance(state, config.integrator, h, k, S0, dealias)
        except StepRejected as exc:
            termination, message = "step_rejected", str(exc)
            break
        state = replace(new, t=t_target)
        sup_F = sup_norm(curvature(state.a))
        blew_up = sup_F > config.blowup_ceiling
        last = step == n_steps or blew_up
        keep = last or step % config.snapshot_every == 0
        if keep or step % config.record_every == 0:
            records.append(record_diagnostics(state, step, k, S0, dealias))
        if keep:
            states.append(state)
            steps.append(step)
        if progress is not None:
            progress(step, state)
        if blew_up:
            termination = "blowup_detected"
            message = f"sup|F| = {sup_F:.3g} exceeded ceiling {config.blowup_ceiling:g}"
            break

    if termination == "step_rejected":
        # keep the last good state and its diagnostics
        good = step - 1
        if records[-1].step != good:
            records.append(record_diagnostics(state, good, k, S0, dealias))
        if steps[-1] != good:
            states.append(state)
            steps.append(good)
    return Trajectory(states, _fill_identity_residuals(records), termination, k, S0, steps,
                      message, dealias, config, time.perf_counter() - started)
