import logging

import numpy as np
import scipy.sparse as sp

from decaylab.core.errors import ConfigError, ModelAssemblyError
from decaylab.core.feedback import FeedbackMap
from decaylab.models.matrix_io import read_coo
from decaylab.models.operators import central_difference_1d, laplacian_1d, viscosity_sqrtAA
from decaylab.models.structure import check_structure
from decaylab.models.systems import (
    LIFT_FULL,
    LIFT_MODULUS,
    LIFT_VELOCITY,
    DampingField,
    SemiDiscreteSystem,
)
from decaylab.schemas.config import ModelSection

logger = logging.getLogger(__name__)


def _second_order(spec: ModelSection, feedback: FeedbackMap, fourth_order: bool):
    """Wave (fourth_order=False) or hinged beam: state [y | v]."""
    N = spec.n
    dx = spec.length / (N + 1)
    nodes = dx * np.arange(1, N + 1)
    lap = laplacian_1d(N, dx, "dirichlet")
    stiffness = (lap @ lap).tocsr() if fourth_order else -lap
    I = sp.identity(N, format="csr")
    Z = sp.csr_matrix((N, N))
    damping = DampingField.indicator(nodes, spec.damping.support, spec.damping.alpha)

    A = sp.bmat([[None, -I], [stiffness, None]], format="csr")
    B = sp.block_diag((Z, sp.diags(damping.b)), format="csr")
    V = sp.block_diag((Z, -lap), format="csr")
    M = sp.block_diag((stiffness * dx, I * dx), format="csr")
    labels = {"displacement": slice(0, N), "velocity": slice(N, 2 * N)}
    return dict(dx=dx, nodes=nodes, A=A, B=B, V=V, M=M, damping=damping, labels=labels, lift=LIFT_VELOCITY)


def _transport(spec: ModelSection, feedback: FeedbackMap):
    N = spec.n
    dx = spec.length / N
    nodes = dx * np.arange(N)
    damping = DampingField.indicator(nodes, spec.damping.support, spec.damping.alpha)
    return dict(
        dx=dx,
        nodes=nodes,
        A=central_difference_1d(N, dx),
        B=sp.diags(damping.b, format="csr"),
        V=(-laplacian_1d(N, dx, "periodic")).tocsr(),
        M=sp.identity(N, format="csr") * dx,
        damping=damping,
        labels={"u": slice(0, N)},
        lift=LIFT_FULL,
    )


def _schrodinger(spec: ModelSection, feedback: FeedbackMap):
    N = spec.n
    dx = spec.length / (N + 1)
    nodes = dx * np.arange(1, N + 1)
    lap = laplacian_1d(N, dx, "dirichlet")
    damping = DampingField.indicator(nodes, spec.damping.support, spec.damping.alpha)
    b = sp.diags(damping.b)
    return dict(
        dx=dx,
        nodes=nodes,
        A=sp.bmat([[None, -lap], [lap, None]], format="csr"),
        B=sp.block_diag((b, b), format="csr"),
        V=sp.block_diag((-lap, -lap), format="csr"),
        M=sp.identity(2 * N, format="csr") * dx,
        damping=damping,
        labels={"real": slice(0, N), "imag": slice(N, 2 * N)},
        lift=LIFT_MODULUS,
    )


def _custom(spec: ModelSection, feedback: FeedbackMap):
    paths = spec.custom
    if not paths.A or not paths.B:
        raise ConfigError("custom models need matrix files for A and B", field="model.custom.A")
    A = read_coo(paths.A, "model.custom.A")
    n = A.shape[0]
    B = read_coo(paths.B, "model.custom.B")
    M = read_coo(paths.M, "model.custom.M") if paths.M else sp.identity(n, format="csr")
    V = read_coo(paths.V, "model.custom.V") if paths.V else sp.csr_matrix((n, n))
    for label, mat in (("B", B), ("M", M), ("V", V)):
        if mat.shape != A.shape:
            raise ConfigError(f"{label} is {mat.shape}, A is {A.shape}", field=f"model.custom.{label}")
    nodes = paths.dx * np.arange(n)
    return dict(dx=paths.dx, nodes=nodes, A=A, B=B, V=V, M=M, damping=None,
                labels={"u": slice(0, n)}, lift=LIFT_FULL)


ASSEMBLERS = {
    "wave1d": lambda spec, fb: _second_order(spec, fb, fourth_order=False),
    "beam1d": lambda spec, fb: _second_order(spec, fb, fourth_order=True),
    "transport1d": _transport,
    "schrodinger1d": _schrodinger,
    "custom": _custom,
}


def build_model(spec: ModelSection, feedback: FeedbackMap, check: bool = True) -> SemiDiscreteSystem:
    if spec.kind not in ASSEMBLERS:
        raise ConfigError(f"unknown model kind '{spec.kind}'", field="model.kind")
    parts = ASSEMBLERS[spec.kind](spec, feedback)

    viscosity = spec.viscosity
    if viscosity == "none":
        parts["V"] = sp.csr_matrix(parts["A"].shape)
    elif viscosity == "sqrtAA":
        parts["V"] = viscosity_sqrtAA(parts["A"], parts["M"], spec.viscosity_eps)
    elif spec.kind == "custom" and parts["V"].nnz == 0:
        raise ConfigError("laplacian_block viscosity needs a V matrix file for custom models", field="model.custom.V")

    system = SemiDiscreteSystem(
        kind=spec.kind,
        feedback=feedback,
        sigma=spec.sigma,
        viscosity=viscosity,
        length=spec.length,
        **parts,
    )

    if check:
        report = check_structure(system)
        # 1. Structural invariants are fatal, the rest is informational
        if not report.skew_ok:
            raise ModelAssemblyError(f"margin {report.skew_margin:.3e}", invariant="M-skewness of A")
        if not report.m_spd_ok:
            raise ModelAssemblyError(f"min eig {report.m_min_eig:.3e}", invariant="M positive definite")
        if not report.mb_psd_ok:
            raise ModelAssemblyError(f"min eig {report.mb_min_eig:.3e}", invariant="MB positive semidefinite")
        if not report.mv_psd_ok:
            raise ModelAssemblyError(f"min eig {report.mv_min_eig:.3e}", invariant="MV positive semidefinite")
        if not report.dissipativity_ok:
            raise ModelAssemblyError(f"worst {report.dissipativity_min:.3e}", invariant="dissipativity")

    logger.info("assembled %s n=%d dx=%.5g viscosity=%s feedback=%s",
                system.kind, system.n, system.dx, viscosity, feedback.name)
    return system
