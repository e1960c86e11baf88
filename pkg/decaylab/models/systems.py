"""
Finite-dimensional systems u' + A u + B F(u) + dx^sigma V u = 0 with energy 1/2 u^T M u.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from decaylab.core.feedback import FeedbackMap, linear_feedback
from decaylab.models.operators import extreme_generalized_eigenvalue

logger = logging.getLogger(__name__)

# how the feedback reaches the state vector
LIFT_VELOCITY = "velocity"
LIFT_FULL = "full"
LIFT_MODULUS = "modulus"


@dataclass(frozen=True)
class DampingField:
    b: np.ndarray
    support: List[Tuple[float, float]]
    alpha: float

    @classmethod
    def indicator(cls, nodes: np.ndarray, support: Sequence[Tuple[float, float]], alpha: float) -> "DampingField":
        mask = np.zeros(nodes.shape[0], dtype=bool)
        for a, b in support:
            mask |= (nodes > a) & (nodes < b)
        return cls(b=np.where(mask, alpha, 0.0), support=list(support), alpha=float(alpha))


@dataclass(frozen=True)
class SemiDiscreteSystem:
    kind: str
    dx: float
    A: sp.csr_matrix
    B: sp.csr_matrix
    V: sp.csr_matrix
    M: sp.csr_matrix
    feedback: FeedbackMap
    nodes: np.ndarray
    lift: str = LIFT_FULL
    sigma: float = 2.0
    viscosity: str = "none"
    damping: Optional[DampingField] = None
    labels: Dict[str, slice] = field(default_factory=dict)
    length: float = 1.0

    @classmethod
    def from_matrices(cls, A, B, M=None, V=None, feedback: Optional[FeedbackMap] = None,
                      dx: float = 1.0, sigma: float = 2.0, kind: str = "custom") -> "SemiDiscreteSystem":
        """Wrap raw matrices; F acts on every component at nodes dx * k."""
        A = sp.csr_matrix(A, dtype=float)
        n = A.shape[0]
        M = sp.identity(n, format="csr") if M is None else sp.csr_matrix(M, dtype=float)
        V = sp.csr_matrix((n, n)) if V is None else sp.csr_matrix(V, dtype=float)
        return cls(
            kind=kind,
            dx=float(dx),
            A=A,
            B=sp.csr_matrix(B, dtype=float),
            V=V,
            M=M,
            feedback=feedback or linear_feedback(),
            nodes=dx * np.arange(n, dtype=float),
            sigma=sigma,
            viscosity="none" if V.nnz == 0 else "custom",
            labels={"u": slice(0, n)},
            length=dx * n,
        )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def viscosity_enabled(self) -> bool:
        return self.viscosity != "none" and self.V.nnz > 0

    @cached_property
    def scaled_V(self) -> sp.csr_matrix:
        return (self.dx ** self.sigma) * self.V

    @cached_property
    def MB(self) -> sp.csr_matrix:
        return (self.M @ self.B).tocsr()

    @cached_property
    def MV(self) -> sp.csr_matrix:
        return (self.M @ self.V).tocsr()

    @cached_property
    def norm_B(self) -> float:
        """|B| in the M-norm, i.e. the largest eigenvalue of M B against M."""
        if self.B.count_nonzero() == 0:
            return 0.0
        return max(extreme_generalized_eigenvalue(self.MB, self.M), 0.0)

    @cached_property
    def norm_V(self) -> float:
        if self.V.count_nonzero() == 0:
            return 0.0
        return max(extreme_generalized_eigenvalue(self.MV, self.M), 0.0)

    def energy(self, u: np.ndarray) -> float:
        return 0.5 * float(u @ (self.M @ u))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ (self.M @ v))

    def damping_norm_sq(self, u: np.ndarray) -> float:
        """|B^{1/2} u|^2 in the M-inner product."""
        return float(u @ (self.MB @ u))

    def viscosity_norm_sq(self, u: np.ndarray) -> float:
        """dx^sigma |V^{1/2} u|^2 in the M-inner product."""
        return float(self.dx ** self.sigma * (u @ (self.MV @ u)))

    def _split(self, u: np.ndarray):
        half = self.n_nodes
        return u[:half], u[half:]

    def _modulus_ratio(self, m: np.ndarray):
        fb = self.feedback
        rho = fb.apply(self.nodes, m, self.dx)
        if fb.is_local and fb.rho_prime is not None:
            at_zero = fb.rho_prime(self.nodes, np.zeros_like(m))
        else:
            at_zero = np.zeros_like(m)
        safe = np.where(m > 0, m, 1.0)
        return np.where(m > 0, rho / safe, at_zero), rho

    def F(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        fb = self.feedback
        if self.lift == LIFT_VELOCITY:
            out = np.zeros_like(u)
            out[self.n_nodes:] = fb.apply(self.nodes, u[self.n_nodes:], self.dx)
            return out
        if self.lift == LIFT_MODULUS:
            a, b = self._split(u)
            q, _ = self._modulus_ratio(np.hypot(a, b))
            return np.concatenate([q * a, q * b])
        return fb.apply(self.nodes, u, self.dx)

    def F_jacobian(self, u: np.ndarray) -> Optional[sp.csr_matrix]:
        """Analytic dF/du, or None when only finite differences are available."""
        fb = self.feedback
        if not fb.has_jacobian:
            return None
        u = np.asarray(u, dtype=float)
        if self.lift == LIFT_VELOCITY:
            zero = sp.csr_matrix((self.n_nodes, self.n_nodes))
            return sp.block_diag((zero, fb.jacobian(self.nodes, u[self.n_nodes:], self.dx)), format="csr")
        if self.lift == LIFT_MODULUS:
            if not fb.is_local:
                return None
            a, b = self._split(u)
            m = np.hypot(a, b)
            q, rho = self._modulus_ratio(m)
            safe = np.where(m > 0, m, 1.0)
            dq = np.where(m > 0, (fb.rho_prime(self.nodes, m) * m - rho) / safe ** 2, 0.0)
            ua, ub = a / safe, b / safe
            return sp.bmat([
                [sp.diags(q + a * dq * ua), sp.diags(a * dq * ub)],
                [sp.diags(b * dq * ua), sp.diags(q + b * dq * ub)],
            ], format="csr")
        return fb.jacobian(self.nodes, u, self.dx)

    def with_feedback(self, feedback: FeedbackMap) -> "SemiDiscreteSystem":
        return replace(self, feedback=feedback)

    def without_damping(self) -> "SemiDiscreteSystem":
        return replace(self, B=sp.csr_matrix(self.B.shape))

    def without_space_viscosity(self) -> "SemiDiscreteSystem":
        return replace(self, V=sp.csr_matrix(self.V.shape), viscosity="none")
