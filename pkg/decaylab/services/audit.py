"""
Numerical audits of the four comparison inequalities behind the decay theorems.

space_lemma1  nonlinear u vs linear damped z, continuous time (left Riemann sums)
space_lemma2  linear damped z vs conservative phi' + A phi = 0
time_lemma1   the same comparison for the midpoint scheme with time viscosity (exact step sums)
time_lemma2   linear damped z vs the conservative scheme with time viscosity

Space rows are evaluated on runs without time viscosity, time rows on runs
without stage space viscosity, so each row sees the setting its inequality is stated in.
"""
import logging
from typing import Optional

import numpy as np

from decaylab.core.errors import AuditError
from decaylab.core.feedback import linear_feedback
from decaylab.core.integrator import MidpointIntegrator, TimeScheme, TrajectoryRecord, simulate_linear_companions
from decaylab.models.systems import SemiDiscreteSystem
from decaylab.schemas.reports import AuditReport, InequalityAudit

logger = logging.getLogger(__name__)

HOLD_RTOL = 1e-12


def space_lemma2_constant(T: float, normB: float) -> float:
    return 1.0 + T ** 2 + T ** 2 * normB + T ** 2 * normB ** 2


def space_lemma2_proof_constant(T: float, normB: float, normV_scaled: float) -> float:
    M = 1.0 + normV_scaled
    return 2.0 + 8.0 * T ** 2 * M ** 2 * max(1.0, normB) ** 2


def time_lemma2_constant(T: float, normB: float) -> float:
    return max(1.0 + (4.0 * T ** 2 + 1.0) ** 2 * normB ** 2, 2.0)


def time_lemma2_proof_constant(T: float, normB: float) -> float:
    return max(1.0 + (4.0 * T + 1.0) ** 2 * (normB + normB ** 2), 2.0)


def _require_snapshots(traj: TrajectoryRecord, label: str) -> None:
    if not traj.has_full_snapshots:
        raise AuditError(f"record.snapshots: the {label} trajectory has no per-step states; audits need snapshots=all")
    if not traj.completed:
        raise AuditError(f"the {label} trajectory stopped at step {traj.failed_at}: {traj.failure}")


def _quadratic(states: np.ndarray, K) -> np.ndarray:
    """Row-wise x^T K x."""
    return np.einsum("ij,ij->i", states, (K @ states.T).T)


def _row(name: str, lhs: float, rhs_base: float, constant: float, proof_constant: Optional[float],
         quadrature: str) -> InequalityAudit:
    rhs = constant * rhs_base
    return InequalityAudit(
        name=name,
        lhs=float(lhs),
        rhs=float(rhs),
        constant=float(constant),
        proof_constant=proof_constant,
        slack=float(rhs - lhs),
        holds=bool(lhs <= rhs + HOLD_RTOL * max(abs(rhs), abs(lhs))),
        quadrature=quadrature,
    )


class _Sums:
    """Step sums for one trajectory of a given system."""

    def __init__(self, system: SemiDiscreteSystem, traj: TrajectoryRecord, dt: float):
        self.system = system
        self.dt = dt
        U = traj.states
        T = traj.stage_states
        self.left = U[:-1]
        self.post = U[1:]
        self.mid = 0.5 * (U[:-1] + T[1:])
        self.diff = T[1:] - U[1:]

    # continuous-time integrands at left endpoints
    def damped(self, states: np.ndarray) -> float:
        return self.dt * float(np.sum(_quadratic(states, self.system.MB)))

    def damped_feedback(self, states: np.ndarray) -> float:
        F = np.vstack([self.system.F(u) for u in states])
        return self.dt * float(np.sum(_quadratic(F, self.system.MB)))

    def viscous(self, states: np.ndarray) -> float:
        if not self.system.viscosity_enabled:
            return 0.0
        return self.dt * self.system.dx ** self.system.sigma * float(np.sum(_quadratic(states, self.system.MV)))

    # time-viscosity sums: <V u+, u+> = <d, u+> / dt and |V u+|^2 = |d|^2 / dt^2 with d = u~ - u+
    def time_viscous(self) -> float:
        M = self.system.M
        inner = np.einsum("ij,ij->i", self.diff, (M @ self.post.T).T) / self.dt
        square = np.einsum("ij,ij->i", self.diff, (M @ self.diff.T).T) / self.dt ** 2
        return self.dt * float(np.sum(inner + 0.5 * self.dt * square))


def audit_space(system: SemiDiscreteSystem, u: TrajectoryRecord, z: TrajectoryRecord,
                phi: TrajectoryRecord, T_obs: float):
    for label, traj in (("nonlinear", u), ("linear damped", z), ("conservative", phi)):
        _require_snapshots(traj, label)
    dt = u.dt
    su = _Sums(system, u, dt)
    sz = _Sums(system, z, dt)
    sp_ = _Sums(system, phi, dt)
    normB = system.norm_B
    normV_scaled = system.dx ** system.sigma * system.norm_V

    z_obs = sz.damped(sz.left) + sz.viscous(sz.left)
    row1 = _row(
        "space_lemma1",
        lhs=z_obs,
        rhs_base=su.damped(su.left) + su.damped_feedback(su.left) + 2.0 * su.viscous(su.left),
        constant=2.0,
        proof_constant=2.0,
        quadrature="left Riemann sum, weight dt",
    )
    row2 = _row(
        "space_lemma2",
        lhs=sp_.damped(sp_.left) + sp_.viscous(sp_.left),
        rhs_base=z_obs,
        constant=space_lemma2_constant(T_obs, normB),
        proof_constant=space_lemma2_proof_constant(T_obs, normB, normV_scaled),
        quadrature="left Riemann sum, weight dt",
    )
    return row1, row2


def audit_time(system: SemiDiscreteSystem, u: TrajectoryRecord, z: TrajectoryRecord,
               phi: TrajectoryRecord, T_obs: float):
    for label, traj in (("nonlinear", u), ("linear damped", z), ("conservative", phi)):
        _require_snapshots(traj, label)
    dt = u.dt
    su = _Sums(system, u, dt)
    sz = _Sums(system, z, dt)
    sp_ = _Sums(system, phi, dt)
    normB = system.norm_B

    z_side = sz.damped(sz.mid) + sz.time_viscous()
    row1 = _row(
        "time_lemma1",
        lhs=z_side,
        rhs_base=su.damped(su.mid) + su.damped_feedback(su.mid) + su.time_viscous(),
        constant=2.0,
        proof_constant=2.0,
        quadrature="exact step sums at stage midpoints, weight dt",
    )
    row2 = _row(
        "time_lemma2",
        lhs=0.5 * sp_.damped(sp_.mid) + sp_.time_viscous(),
        rhs_base=z_side,
        constant=time_lemma2_constant(T_obs, normB),
        proof_constant=time_lemma2_proof_constant(T_obs, normB),
        quadrature="exact step sums at stage midpoints, weight dt",
    )
    return row1, row2


def _runs(system: SemiDiscreteSystem, scheme: TimeScheme, u0: np.ndarray, T_obs: float,
          conservative: SemiDiscreteSystem):
    def run(s: SemiDiscreteSystem) -> TrajectoryRecord:
        return MidpointIntegrator(s, scheme).simulate(u0, T_obs, snapshots="all")

    return run(system), run(system.with_feedback(linear_feedback())), run(conservative)


def lemma_audit(system: SemiDiscreteSystem, scheme: TimeScheme, u0: np.ndarray, T_obs: float) -> AuditReport:
    # 1. Space-discrete lemmas: no time viscosity, conservative run without damping or viscosity
    space_scheme = scheme.model_copy(update={"time_viscosity": "none", "space_viscosity_in_stage": True})
    pure = system.without_damping().without_space_viscosity()
    space_rows = audit_space(system, *_runs(system, space_scheme, u0, T_obs, pure), T_obs)

    # 2. Time-discrete lemmas: scheme's time viscosity, no stage space viscosity
    time_scheme = scheme.model_copy(update={"space_viscosity_in_stage": False})
    runs = simulate_linear_companions(system, time_scheme, u0, T_obs)
    time_rows = audit_time(system, runs.nonlinear, runs.linear_damped, runs.conservative, T_obs)

    rows = list(space_rows) + list(time_rows)
    for row in rows:
        logger.info("audit %s lhs=%.6e rhs=%.6e holds=%s", row.name, row.lhs, row.rhs, row.holds)
    steps = int(np.ceil(T_obs / scheme.dt - 1e-12))
    return AuditReport(T_obs=float(T_obs), dt=scheme.dt, dx=system.dx, steps=steps, normB=system.norm_B, rows=rows)
