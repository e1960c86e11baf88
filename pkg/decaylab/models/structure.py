import logging

import numpy as np
import scipy.linalg as la

from decaylab.core.settings import get_settings
from decaylab.models.operators import extreme_generalized_eigenvalue
from decaylab.models.systems import SemiDiscreteSystem
from decaylab.schemas.reports import StructureReport

logger = logging.getLogger(__name__)

SKEW_TOL = 1e-12
PSD_TOL = 1e-10
DISSIPATIVITY_TOL = 1e-12


def _min_sym_eig(K) -> float:
    dense = K.toarray()
    dense = 0.5 * (dense + dense.T)
    return float(la.eigvalsh(dense)[0])


def check_structure(system: SemiDiscreteSystem, probes: int = 20, seed: int = 11) -> StructureReport:
    """Margins of every structural assumption; never raises."""
    messages = []
    MA = (system.M @ system.A).toarray()
    scale = max(np.max(np.abs(MA)), np.finfo(float).tiny)
    skew = float(np.max(np.abs(MA + MA.T)) / scale) if system.A.nnz else 0.0
    skew_ok = skew <= SKEW_TOL
    if not skew_ok:
        messages.append(f"A is not M-skew-adjoint (margin {skew:.3e})")

    report = dict(
        kind=system.kind,
        n=system.n,
        dx=system.dx,
        skew_margin=skew,
        skew_ok=skew_ok,
        viscosity_enabled=system.viscosity_enabled,
    )

    # 1. Dense spectra at desk scale
    if system.n <= get_settings().dense_limit:
        m_min = _min_sym_eig(system.M)
        mb_min = _min_sym_eig(system.MB)
        mv_min = _min_sym_eig(system.MV)
        m_scale = max(abs(_min_sym_eig(-system.M)), 1.0)
        report.update(
            m_min_eig=m_min,
            m_spd_ok=m_min > 0,
            mb_min_eig=mb_min,
            mb_psd_ok=mb_min >= -PSD_TOL * m_scale,
            mv_min_eig=mv_min,
            mv_psd_ok=mv_min >= -PSD_TOL * m_scale,
        )
        if not report["m_spd_ok"]:
            messages.append("M is not positive definite")
        if not report["mb_psd_ok"]:
            messages.append(f"MB is not PSD (min eig {mb_min:.3e})")
        if not report["mv_psd_ok"]:
            messages.append(f"MV is not PSD (min eig {mv_min:.3e})")
    else:
        messages.append(f"dense PSD checks skipped for n={system.n}")

    # 2. Dissipativity on random states
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(probes):
        u = rng.standard_normal(system.n) * 10.0 ** rng.uniform(-2.0, 1.0)
        value = system.inner(u, system.B @ system.F(u)) + system.viscosity_norm_sq(u)
        worst = min(worst, value / max(1.0, system.energy(u)))
    report.update(dissipativity_min=float(worst), dissipativity_ok=worst >= -DISSIPATIVITY_TOL)
    if worst < -DISSIPATIVITY_TOL:
        messages.append(f"<u, B F(u)> + dx^sigma <V u, u> < 0 (worst {worst:.3e})")

    # 3. Viscosity bound dx^sigma * lambda_max(V, M)
    if system.viscosity_enabled:
        report["viscosity_bound"] = float(system.dx ** system.sigma * extreme_generalized_eigenvalue(system.MV, system.M))
    else:
        messages.append("viscosity disabled")

    result = StructureReport(messages=messages, **report)
    logger.debug("structure %s n=%d ok=%s %s", system.kind, system.n, result.ok, "; ".join(messages))
    return result
