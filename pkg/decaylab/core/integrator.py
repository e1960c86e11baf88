"""
Implicit midpoint stage plus viscosity post-step for u' + A u + B F(u) + dx^sigma V u = 0.

One step k -> k+1:

    stage      u~ - u_k + dt [K m + B F(m)] = 0,   m = (u_k + u~) / 2,   K = A (+ dx^sigma V)
    post-step  (I + dt V_dt) u_{k+1} = u~

Every step records the three dissipation contributions so that
E_{k+1} - E_k + diss_damping + diss_space + diss_time is zero up to the stage tolerance.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse.linalg import cg, spsolve, splu

from decaylab.core.errors import ConfigError, SolverError, StepFailure
from decaylab.core.feedback import linear_feedback
from decaylab.core.settings import get_settings
from decaylab.models.systems import SemiDiscreteSystem
from decaylab.schemas.config import SolverSection

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["time", "energy", "diss_damping", "diss_space_visc", "diss_time_visc", "residual", "iters"]

# Newton gives up on a step once the residual has failed to halve this many times in a row
STAGNATION_LIMIT = 3
CG_RTOL = 1e-13
# stage residuals are not resolvable below this multiple of eps * dt * |K| |u|
ROUNDOFF_FACTOR = 16.0

Snapshots = Union[Literal["none", "all"], int]


class StageSolver(SolverSection):
    """The `scheme.solver` section, frozen for the lifetime of an integrator."""

    model_config = ConfigDict(frozen=True, extra="forbid")


class TimeScheme(BaseModel):
    model_config = ConfigDict(frozen=True)

    dt: float = Field(..., gt=0.0)
    time_viscosity: Literal["none", "squared", "bounded_squared"] = "squared"
    space_viscosity_in_stage: bool = True
    solver: StageSolver = StageSolver()

    @classmethod
    def default_for(cls, system: SemiDiscreteSystem, dt_factor: float = 0.5, **kwargs) -> "TimeScheme":
        """dt = dt_factor * dx."""
        return cls(dt=dt_factor * system.dx, **kwargs)


@dataclass
class StepDiagnostics:
    iters: int
    stage_residual: float
    method: str
    diss_damping: float
    diss_space: float
    diss_time: float
    balance_residual: float


@dataclass
class StepResult:
    u_tilde: np.ndarray
    u_next: np.ndarray
    diagnostics: StepDiagnostics


@dataclass
class TrajectoryRecord:
    """Per-step traces. Index k holds the contributions of the step that produced u_k; row 0 is zero."""

    times: np.ndarray
    energies: np.ndarray
    diss_damping: np.ndarray
    diss_space_visc: np.ndarray
    diss_time_visc: np.ndarray
    residuals: np.ndarray
    solver_iters: np.ndarray
    dt: float
    snapshot_steps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    states: Optional[np.ndarray] = None
    stage_states: Optional[np.ndarray] = None
    failed_at: Optional[int] = None
    failure: Optional[str] = None
    manifest: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, times, energies, dt: Optional[float] = None, **traces) -> "TrajectoryRecord":
        """Wrap an energy curve (synthetic or loaded); missing traces are zero."""
        times = np.asarray(times, dtype=float)
        energies = np.asarray(energies, dtype=float)
        zeros = np.zeros_like(times)
        if dt is None:
            dt = float(times[1] - times[0]) if times.size > 1 else 0.0
        return cls(
            times=times,
            energies=energies,
            diss_damping=np.asarray(traces.get("diss_damping", zeros), dtype=float),
            diss_space_visc=np.asarray(traces.get("diss_space_visc", zeros), dtype=float),
            diss_time_visc=np.asarray(traces.get("diss_time_visc", zeros), dtype=float),
            residuals=np.asarray(traces.get("residuals", zeros), dtype=float),
            solver_iters=np.asarray(traces.get("solver_iters", zeros), dtype=int),
            dt=dt,
        )

    @property
    def steps(self) -> int:
        return self.times.shape[0] - 1

    @property
    def completed(self) -> bool:
        return self.failed_at is None

    @property
    def has_full_snapshots(self) -> bool:
        return self.states is not None and self.snapshot_steps.shape[0] == self.times.shape[0]

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "time": self.times,
            "energy": self.energies,
            "diss_damping": self.diss_damping,
            "diss_space_visc": self.diss_space_visc,
            "diss_time_visc": self.diss_time_visc,
            "residual": self.residuals,
            "iters": self.solver_iters,
        }, columns=TRAJECTORY_COLUMNS)


@dataclass
class Companions:
    nonlinear: TrajectoryRecord
    linear_damped: TrajectoryRecord
    conservative: TrajectoryRecord


def time_viscosity_operator(system: SemiDiscreteSystem, dt: float, kind: str) -> sp.csr_matrix:
    """V_dt as a matrix: dt^2 A*A, or (I + dt^2 A*A)^{-1} dt^2 A*A for the bounded kind."""
    n = system.n
    if kind == "none":
        return sp.csr_matrix((n, n))
    gram = (system.A.T @ system.M @ system.A).tocsc()
    # A*A = M^{-1} A^T M A
    adjoint_sq = sp.csr_matrix(spsolve(system.M.tocsc(), gram))
    if kind == "squared":
        return (dt ** 2 * adjoint_sq).tocsr()
    if kind == "bounded_squared":
        inner = (sp.identity(n, format="csc") + dt ** 2 * adjoint_sq).tocsc()
        return sp.csr_matrix(spsolve(inner, (dt ** 2 * adjoint_sq).tocsc()))
    raise ConfigError(f"unknown time viscosity '{kind}'", field="scheme.time_viscosity")


class _SPDSolve:
    """Fixed SPD left-hand side: sparse LU up to cg_threshold, CG above."""

    def __init__(self, lhs: sp.csc_matrix):
        self.lhs = lhs
        self.use_cg = lhs.shape[0] > get_settings().cg_threshold
        self._lu = None
        if not self.use_cg:
            try:
                self._lu = splu(lhs)
            except RuntimeError as exc:
                raise SolverError(f"post-step factorization failed: {exc}")

    def __call__(self, rhs: np.ndarray, guess: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            return self._lu.solve(rhs)
        x, info = cg(self.lhs, rhs, x0=guess, rtol=CG_RTOL)
        if info != 0:
            raise SolverError(f"post-step CG did not converge (info={info})")
        return x


class MidpointIntegrator:
    """Holds the factorizations shared by all steps of one (system, scheme) pair."""

    def __init__(self, system: SemiDiscreteSystem, scheme: TimeScheme):
        self.system = system
        self.scheme = scheme
        self.dt = scheme.dt
        n = system.n
        self._identity = sp.identity(n, format="csc")

        use_space = scheme.space_viscosity_in_stage and system.viscosity_enabled
        self.stage_viscosity = system.scaled_V if use_space else None
        self.K = (system.A + system.scaled_V).tocsc() if use_space else system.A.tocsc()
        self._abs_K = abs(self.K).tocsr()

        half = 0.5 * self.dt
        self._minus = (self._identity - half * self.K).tocsr()
        try:
            self._predictor = splu((self._identity + half * self.K).tocsc())
        except RuntimeError as exc:
            raise SolverError(f"stage factorization failed: {exc}")

        self._post = None
        self._post_rhs = None
        if scheme.time_viscosity != "none":
            gram = (system.A.T @ system.M @ system.A).tocsc()
            dt = self.dt
            if scheme.time_viscosity == "squared":
                lhs = system.M + dt ** 3 * gram
            else:
                lhs = system.M + (1.0 + dt) * dt ** 2 * gram
                self._post_rhs = (system.M + dt ** 2 * gram).tocsr()
            self._post = _SPDSolve(lhs.tocsc())

    # 1. Stage

    def _fixed_point_map(self, u_k: np.ndarray, x: np.ndarray) -> np.ndarray:
        m = 0.5 * (u_k + x)
        rhs = self._minus @ u_k - self.dt * (self.system.B @ self.system.F(m))
        return self._predictor.solve(rhs)

    def _residual(self, u_k: np.ndarray, x: np.ndarray) -> np.ndarray:
        m = 0.5 * (u_k + x)
        return x - u_k + self.dt * (self.K @ m + self.system.B @ self.system.F(m))

    def _feedback_jacobian(self, m: np.ndarray):
        jac = self.system.F_jacobian(m)
        if jac is not None:
            return jac
        # forward differences, step fd_step * (1 + |m_j|)
        F0 = self.system.F(m)
        steps = self.scheme.solver.fd_step * (1.0 + np.abs(m))
        dense = np.empty((m.shape[0], m.shape[0]))
        for j, h in enumerate(steps):
            shifted = m.copy()
            shifted[j] += h
            dense[:, j] = (self.system.F(shifted) - F0) / h
        return dense

    def _newton_update(self, u_k: np.ndarray, x: np.ndarray, G: np.ndarray) -> Optional[np.ndarray]:
        m = 0.5 * (u_k + x)
        JF = self._feedback_jacobian(m)
        half = 0.5 * self.dt
        if sp.issparse(JF):
            J = (self._identity + half * (self.K + self.system.B @ JF)).tocsc()
            delta = spsolve(J, G)
        else:
            J = np.eye(m.shape[0]) + half * (self.K.toarray() + self.system.B @ JF)
            try:
                delta = np.linalg.solve(J, G)
            except np.linalg.LinAlgError:
                return None
        delta = np.asarray(delta).ravel()
        if not np.all(np.isfinite(delta)):
            return None
        return x - delta

    def solve_stage(self, u_k: np.ndarray, step_index: int = -1):
        settings = self.scheme.solver
        scale = float(np.max(np.abs(u_k))) if u_k.size else 0.0
        floor = ROUNDOFF_FACTOR * np.finfo(float).eps * self.dt * float(np.max(self._abs_K @ np.abs(u_k), initial=0.0))
        target = settings.tol * max(1.0, scale) + floor

        x = self._fixed_point_map(u_k, u_k)
        G = self._residual(u_k, x)
        res = float(np.max(np.abs(G)))
        iters = 0
        method = settings.method

        if method == "newton":
            stalled = 0
            while res > target and iters < settings.max_iter:
                candidate = self._newton_update(u_k, x, G)
                if candidate is None:
                    logger.debug("step %d: Newton linear solve failed, switching to fixed point", step_index)
                    method = "fixed_point"
                    break
                iters += 1
                x = candidate
                G = self._residual(u_k, x)
                new_res = float(np.max(np.abs(G)))
                stalled = stalled + 1 if new_res > 0.5 * res else 0
                res = new_res
                if stalled >= STAGNATION_LIMIT and res > target:
                    logger.debug("step %d: Newton stagnated at %.3e, switching to fixed point", step_index, res)
                    method = "fixed_point"
                    break

        if method == "fixed_point":
            omega = settings.relaxation
            budget = iters + settings.max_iter
            while res > target and iters < budget:
                x = (1.0 - omega) * x + omega * self._fixed_point_map(u_k, x)
                G = self._residual(u_k, x)
                res = float(np.max(np.abs(G)))
                iters += 1

        if not np.isfinite(res) or res > target:
            raise StepFailure(
                f"stage solver did not converge at step {step_index} (residual {res:.3e} > {target:.3e})",
                residual=res,
                step_index=step_index,
            )
        return x, iters, res, method

    def linear_stage(self, U: np.ndarray) -> np.ndarray:
        """Stage map of the undamped system, applied to a vector or to the columns of a matrix."""
        return self._predictor.solve(self._minus @ U)

    # 2. Post-step

    def post_step(self, u_tilde: np.ndarray) -> np.ndarray:
        if self._post is None:
            return u_tilde.copy()
        rhs = self.system.M @ u_tilde if self._post_rhs is None else self._post_rhs @ u_tilde
        return self._post(rhs, u_tilde)

    def step(self, u_k: np.ndarray, step_index: int = -1) -> StepResult:
        system = self.system
        u_k = np.asarray(u_k, dtype=float)
        u_tilde, iters, stage_res, method = self.solve_stage(u_k, step_index)
        u_next = self.post_step(u_tilde)

        m = 0.5 * (u_k + u_tilde)
        diss_damping = self.dt * system.inner(system.B @ system.F(m), m)
        diss_space = self.dt * system.inner(self.stage_viscosity @ m, m) if self.stage_viscosity is not None else 0.0
        d = u_tilde - u_next
        diss_time = system.inner(d, u_next) + 0.5 * system.inner(d, d)

        balance = abs(system.energy(u_next) - system.energy(u_k) + diss_damping + diss_space + diss_time)
        diagnostics = StepDiagnostics(
            iters=iters,
            stage_residual=stage_res,
            method=method,
            diss_damping=float(diss_damping),
            diss_space=float(diss_space),
            diss_time=float(diss_time),
            balance_residual=float(balance),
        )
        return StepResult(u_tilde=u_tilde, u_next=u_next, diagnostics=diagnostics)

    def simulate(self, u0: np.ndarray, T_final: float, snapshots: Snapshots = "none") -> TrajectoryRecord:
        if T_final < self.dt:
            raise ConfigError(f"T_final={T_final} is shorter than dt={self.dt}", field="run.T_final")
        n_steps = int(math.ceil(T_final / self.dt - 1e-12))
        system = self.system
        u = np.asarray(u0, dtype=float).copy()
        if u.shape != (system.n,):
            raise ConfigError(f"initial state has shape {u.shape}, system needs ({system.n},)", field="initial")

        energies = np.zeros(n_steps + 1)
        dd, ds, dtv, resid = (np.zeros(n_steps + 1) for _ in range(4))
        iters = np.zeros(n_steps + 1, dtype=int)
        energies[0] = system.energy(u)

        stride = None if snapshots == "none" else (1 if snapshots == "all" else int(snapshots))
        kept_steps: List[int] = []
        kept_u: List[np.ndarray] = []
        kept_tilde: List[np.ndarray] = []
        if stride is not None:
            kept_steps.append(0)
            kept_u.append(u.copy())
            kept_tilde.append(u.copy())

        failed_at = None
        failure = None
        last = n_steps
        for k in range(n_steps):
            try:
                result = self.step(u, step_index=k)
            except (StepFailure, SolverError) as exc:
                failed_at, failure, last = k, exc.detail, k
                logger.warning("%s run stopped at step %d/%d: %s", system.kind, k, n_steps, exc.detail)
                break
            u = result.u_next
            diag = result.diagnostics
            energies[k + 1] = system.energy(u)
            dd[k + 1], ds[k + 1], dtv[k + 1] = diag.diss_damping, diag.diss_space, diag.diss_time
            resid[k + 1] = diag.balance_residual
            iters[k + 1] = diag.iters
            if stride is not None and ((k + 1) % stride == 0 or k + 1 == n_steps):
                kept_steps.append(k + 1)
                kept_u.append(u.copy())
                kept_tilde.append(result.u_tilde.copy())

        keep = slice(0, last + 1)
        record = TrajectoryRecord(
            times=self.dt * np.arange(last + 1),
            energies=energies[keep],
            diss_damping=dd[keep],
            diss_space_visc=ds[keep],
            diss_time_visc=dtv[keep],
            residuals=resid[keep],
            solver_iters=iters[keep],
            dt=self.dt,
            snapshot_steps=np.asarray(kept_steps, dtype=int),
            states=np.vstack(kept_u) if kept_u else None,
            stage_states=np.vstack(kept_tilde) if kept_tilde else None,
            failed_at=failed_at,
            failure=failure,
            manifest={"kind": system.kind, "n": system.n, "dx": system.dx, "dt": self.dt,
                      "time_viscosity": self.scheme.time_viscosity},
        )
        logger.info(
            "%s n=%d steps=%d E0=%.6e E_end=%.6e max_residual=%.3e",
            system.kind, system.n, record.steps, record.energies[0], record.energies[-1], record.max_residual,
        )
        return record


def step(system: SemiDiscreteSystem, scheme: TimeScheme, u_k: np.ndarray) -> StepResult:
    return MidpointIntegrator(system, scheme).step(u_k)


def simulate(system: SemiDiscreteSystem, scheme: TimeScheme, u0: np.ndarray, T_final: float,
             snapshots: Snapshots = "none") -> TrajectoryRecord:
    return MidpointIntegrator(system, scheme).simulate(u0, T_final, snapshots)


def simulate_linear_companions(system: SemiDiscreteSystem, scheme: TimeScheme, u0: np.ndarray,
                               T_final: float) -> Companions:
    """Nonlinear run, F -> identity run and B -> 0 run from the same u0, all with full snapshots."""
    nonlinear = simulate(system, scheme, u0, T_final, snapshots="all")
    linear = simulate(system.with_feedback(linear_feedback()), scheme, u0, T_final, snapshots="all")
    conservative = simulate(system.without_damping(), scheme, u0, T_final, snapshots="all")
    return Companions(nonlinear=nonlinear, linear_damped=linear, conservative=conservative)
