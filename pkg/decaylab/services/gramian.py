import logging
import math
from typing import List, Optional

import numpy as np
import scipy.linalg as la

from decaylab.core.errors import ShapeError, SizeError, SolverError
from decaylab.core.integrator import MidpointIntegrator, TimeScheme
from decaylab.core.settings import get_settings
from decaylab.models.systems import SemiDiscreteSystem
from decaylab.schemas.reports import GramianReport

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-10


def gramian_constant(system: SemiDiscreteSystem, T_obs: float, include_viscosity: bool = False,
                     scheme: Optional[TimeScheme] = None) -> GramianReport:
    """
    C_T = smallest lambda with G x = lambda (M / 2) x, where

        G = sum_k dt Phi_k^T (MB + dx^sigma MV) Phi_k  (+ time-viscosity sums)

    and Phi_k propagates phi^0 through the conservative scheme (stage with A only,
    then the scheme's time-viscosity post-step).
    """
    n = system.n
    limit = get_settings().dense_limit
    if n > limit:
        raise SizeError(f"gramian_constant is dense; n={n} exceeds {limit}")
    scheme = scheme or TimeScheme.default_for(system)
    conservative = MidpointIntegrator(
        system.without_damping(),
        scheme.model_copy(update={"space_viscosity_in_stage": False}),
    )
    dt = scheme.dt
    steps = int(math.ceil(T_obs / dt - 1e-12))

    M = system.M.toarray()
    observe = system.MB.toarray()
    with_time_sums = include_viscosity and scheme.time_viscosity != "none"
    if include_viscosity and system.viscosity_enabled:
        observe = observe + system.dx ** system.sigma * system.MV.toarray()

    G = np.zeros((n, n))
    Phi = np.eye(n)
    for _ in range(steps):
        G += dt * (Phi.T @ observe @ Phi)
        tilde = np.asarray(conservative.linear_stage(Phi))
        nxt = np.asarray(conservative.post_step(tilde))
        if with_time_sums:
            D = tilde - nxt
            cross = D.T @ M @ nxt
            G += 0.5 * (cross + cross.T) + 0.5 * (D.T @ M @ D)
        Phi = nxt

    scale = max(float(np.max(np.abs(G))), np.finfo(float).tiny)
    asymmetry = float(np.max(np.abs(G - G.T)) / scale)
    if asymmetry > SYMMETRY_TOL:
        raise SolverError(f"Gramian asymmetry {asymmetry:.3e} exceeds {SYMMETRY_TOL}")
    G = 0.5 * (G + G.T)

    w = la.eigh(G, 0.5 * M, eigvals_only=True)
    min_eig = float(w[0])
    if min_eig < -PSD_TOL * max(abs(float(w[-1])), 1.0):
        raise SolverError(f"Gramian is not PSD (smallest eigenvalue {min_eig:.3e})")

    method = "dense-midpoint"
    if with_time_sums:
        method += "+time-viscosity-sums"
    report = GramianReport(
        T_obs=float(T_obs),
        C_T=max(min_eig, 0.0),
        include_viscosity=include_viscosity,
        n=n,
        dx=system.dx,
        steps=steps,
        method=method,
        min_eig_raw=min_eig,
        asymmetry=asymmetry,
    )
    logger.info("gramian %s n=%d T=%.4g C_T=%.6e (%s)", system.kind, n, T_obs, report.C_T, method)
    return report


def gramian_by_mesh(systems: List[SemiDiscreteSystem], T_obs: float, include_viscosity: bool,
                    schemes: List[TimeScheme]) -> List[GramianReport]:
    """C_T for each (system, scheme) pair, in order."""
    if len(systems) != len(schemes):
        raise ShapeError(f"{len(systems)} systems but {len(schemes)} schemes")
    return [gramian_constant(s, T_obs, include_viscosity, sch) for s, sch in zip(systems, schemes)]
