"""Discrete resolvent (I - xi*D_xx)^-1 with natural (Neumann) end conditions.

The operator acts on a quadratic Lagrange helper space with no essential
constraints. Applying it means solving the SPD system

    (Mass + xi*GradGrad) u = Mass f,

so constants are fixed exactly and the generalized spectrum lies in (0, 1].
J = (P - I)/xi is the associated non-positive second-difference operator.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from . import fem
from .config import BeamConfig
from .errors import SingularSystem, XiZero


class PxiOperator:
    """Factorized resolvent on the helper space of one mesh.

    The Cholesky factor of (Mass + xi*GradGrad) is computed once and reused
    by every apply; instances are immutable and safe to share.
    """

    def __init__(self, mesh: fem.Mesh1D, xi: float):
        if xi < 0:
            raise ValueError("xi must be >= 0")
        self.xi = float(xi)
        self.helper_space = fem.FemSpace(mesh, fem.Family.LAGRANGE_P2)
        self.mass = fem.assemble_mass(self.helper_space, 1.0).matrix
        self.grad_grad = fem.assemble_grad_grad(self.helper_space, 1.0).matrix
        op = (self.mass + self.xi * self.grad_grad).toarray()
        try:
            self._chol = sla.cho_factor(op, lower=True)
        except sla.LinAlgError as exc:  # defensive: cannot occur for xi >= 0
            raise SingularSystem(f"resolvent matrix failed to factorize: {exc}") from exc
        self._mass_chol = sla.cho_factor(self.mass.toarray(), lower=True)
        self._deriv_maps: dict[int, tuple[fem.FemSpace, np.ndarray]] = {}

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Solve (Mass + xi*GradGrad) u = Mass f for helper-space coefficients f."""
        f = np.asarray(f, dtype=float)
        if not np.all(np.isfinite(f)):
            raise ValueError("input coefficients must be finite")
        return sla.cho_solve(self._chol, self.mass @ f)

    def apply_j(self, f: np.ndarray) -> np.ndarray:
        """(apply(f) - f)/xi; mass-weighted quadratic form is non-positive."""
        if self.xi == 0.0:
            raise XiZero("J is undefined for xi = 0")
        return (self.apply(f) - np.asarray(f, dtype=float)) / self.xi

    def _derivative_pairing(self, source_space: fem.FemSpace) -> np.ndarray:
        """Matrix G with G[a, j] = integral( d/dx(source_j) * helper_a )."""
        key = id(source_space)
        if key not in self._deriv_maps or self._deriv_maps[key][0] is not source_space:
            G = fem.assemble_mixed(self.helper_space, source_space, "ux_v", 1.0).matrix.toarray()
            self._deriv_maps[key] = (source_space, G)
        return self._deriv_maps[key][1]

    def project_derivative(self, source_space: fem.FemSpace, coeffs: np.ndarray) -> np.ndarray:
        """L2-project d/dx of a field from source_space into the helper space."""
        G = self._derivative_pairing(source_space)
        return sla.cho_solve(self._mass_chol, G @ np.asarray(coeffs, dtype=float))

    def apply_to_derivative(self, source_space: fem.FemSpace, coeffs: np.ndarray) -> np.ndarray:
        """Helper-space coefficients of P applied to d/dx(field); one solve.

        apply(project_derivative(...)) collapses to a single solve because
        (M + xi K)^-1 M M^-1 G = (M + xi K)^-1 G.
        """
        G = self._derivative_pairing(source_space)
        return sla.cho_solve(self._chol, G @ np.asarray(coeffs, dtype=float))

    def stiffness_through_resolvent(self, source_space: fem.FemSpace) -> np.ndarray:
        """Dense SPD matrix G^T (M + xi K)^-1 G over the source-space free DOFs.

        This realizes the pairing integral( P(d/dx u) * d/dx v ) symmetrically:
        with Y = L^-1 G from the Cholesky factor L, the result is Y^T Y.
        """
        G = self._derivative_pairing(source_space)
        L = self._chol[0]
        Y = sla.solve_triangular(L, G, lower=True)
        S = Y.T @ Y
        return (S + S.T) / 2.0


def solve_phi1(op: PxiOperator, config: BeamConfig, v3_space: fem.FemSpace,
               v3: np.ndarray, sigma_s: float, mode) -> np.ndarray:
    """Electric-potential moment eliminated from the elliptic constraint.

    Current mode: (gamma/eps3) * P(d/dx v3). Charge mode adds the uniform
    sigma_s/(eps3*h3) contribution; the free additive constant is fixed to 0.
    """
    from .model import ActuationMode  # local import to avoid a cycle

    mode = ActuationMode(mode)
    gamma = config.materials.gamma
    eps3 = config.materials.eps3
    h3 = config.geometry.h3
    phi1 = (gamma / eps3) * op.apply_to_derivative(v3_space, v3)
    if mode is ActuationMode.CHARGE:
        ones = op.helper_space.interpolate(lambda x: 1.0)
        phi1 = phi1 + (sigma_s / (eps3 * h3)) * ones
    return phi1
