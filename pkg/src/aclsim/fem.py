"""One-dimensional meshes, scalar element spaces, and bilinear-form assembly.

Three families are provided: linear and quadratic Lagrange elements (C0) and
cubic Hermite elements (C1, value + slope per node). Essential constraints
pin individual endpoint DOFs to zero; assembled matrices live on the free
DOFs only. All integrands arising from these families are polynomials of
degree <= 6, so one fixed 4-point Gauss-Legendre rule integrates every
bilinear form exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import MeshMismatch, OutOfDomain, WrongFamily

# 4-point Gauss-Legendre on [0, 1]: exact for polynomials of degree <= 7.
_GT, _GW = np.polynomial.legendre.leggauss(4)
GAUSS_T = (_GT + 1.0) / 2.0
GAUSS_W = _GW / 2.0


class Family(enum.Enum):
    LAGRANGE_P1 = "LagrangeP1"
    LAGRANGE_P2 = "LagrangeP2"
    HERMITE_C1 = "HermiteC1"


@dataclass(frozen=True)
class Mesh1D:
    """Partition of [0, L] into intervals with strictly increasing nodes."""

    length_L: float
    node_coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.node_coords, dtype=float)
        object.__setattr__(self, "node_coords", coords)
        if coords.ndim != 1 or coords.size < 2:
            raise ValueError("mesh needs at least two nodes")
        if not np.all(np.diff(coords) > 0):
            raise ValueError("node_coords must be strictly increasing")
        if coords[0] != 0.0 or coords[-1] != self.length_L:
            raise ValueError("node_coords must start at 0 and end at length_L")

    @classmethod
    def uniform(cls, length_L: float, n_elements: int) -> "Mesh1D":
        if n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        return cls(length_L, np.linspace(0.0, length_L, n_elements + 1))

    @property
    def n_elements(self) -> int:
        return self.node_coords.size - 1

    def element_size(self, e: int) -> float:
        return self.node_coords[e + 1] - self.node_coords[e]


def _shape(family: Family, t: float, h: float, deriv: int) -> np.ndarray:
    """Local basis values at reference coordinate t, derivative w.r.t. global x."""
    if family is Family.LAGRANGE_P1:
        if deriv == 0:
            vals = np.array([1.0 - t, t])
        elif deriv == 1:
            vals = np.array([-1.0, 1.0])
        else:
            vals = np.zeros(2)
    elif family is Family.LAGRANGE_P2:
        if deriv == 0:
            vals = np.array([1.0 - 3.0 * t + 2.0 * t * t, 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)])
        elif deriv == 1:
            vals = np.array([4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0])
        elif deriv == 2:
            vals = np.array([4.0, -8.0, 4.0])
        else:
            vals = np.zeros(3)
    elif family is Family.HERMITE_C1:
        # [value_left, slope_left, value_right, slope_right]; slope DOFs carry
        # the element size so they represent d/dx values globally.
        if deriv == 0:
            vals = np.array(
                [
                    1.0 - 3.0 * t * t + 2.0 * t**3,
                    h * (t - 2.0 * t * t + t**3),
                    3.0 * t * t - 2.0 * t**3,
                    h * (t**3 - t * t),
                ]
            )
        elif deriv == 1:
            vals = np.array(
                [
                    -6.0 * t + 6.0 * t * t,
                    h * (1.0 - 4.0 * t + 3.0 * t * t),
                    6.0 * t - 6.0 * t * t,
                    h * (3.0 * t * t - 2.0 * t),
                ]
            )
        elif deriv == 2:
            vals = np.array(
                [
                    -6.0 + 12.0 * t,
                    h * (6.0 * t - 4.0),
                    6.0 - 12.0 * t,
                    h * (6.0 * t - 2.0),
                ]
            )
        else:
            raise ValueError("derivatives above order 2 not supported")
    else:  # pragma: no cover
        raise ValueError(family)
    if deriv > 0:
        vals = vals / h**deriv
    return vals


class FemSpace:
    """Scalar finite-element space on a Mesh1D with endpoint constraints.

    essential_constraints is an iterable of (kind, endpoint) pairs with
    kind in {"value", "slope"} and endpoint in {0, L}; the matching DOF is
    pinned to zero and removed from the free index map. Slope constraints
    require the Hermite family.
    """

    def __init__(self, mesh: Mesh1D, family: Family, essential_constraints=()):
        self.mesh = mesh
        self.family = family
        self.essential_constraints = frozenset(essential_constraints)
        n = mesh.n_elements
        if family is Family.LAGRANGE_P1:
            self.n_dofs = n + 1
        elif family is Family.LAGRANGE_P2:
            self.n_dofs = 2 * n + 1
        else:
            self.n_dofs = 2 * (n + 1)
        constrained = sorted({self._constraint_dof(kind, pt) for kind, pt in self.essential_constraints})
        self.constrained_dofs = np.array(constrained, dtype=int)
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained_dofs] = False
        self.free_dofs = np.nonzero(mask)[0]
        self.n_free = self.free_dofs.size
        # full index -> free index (-1 for constrained)
        self._free_index = -np.ones(self.n_dofs, dtype=int)
        self._free_index[self.free_dofs] = np.arange(self.n_free)

    def _endpoint_node(self, endpoint) -> int:
        if endpoint == 0:
            return 0
        if np.isclose(float(endpoint), self.mesh.length_L):
            return self.mesh.n_elements
        raise ValueError(f"endpoint must be 0 or L={self.mesh.length_L}, got {endpoint}")

    def _constraint_dof(self, kind: str, endpoint) -> int:
        node = self._endpoint_node(endpoint)
        if kind == "value":
            return self.value_dof(node)
        if kind == "slope":
            if self.family is not Family.HERMITE_C1:
                raise WrongFamily("slope constraints require the Hermite family")
            return 2 * node + 1
        raise ValueError(f"unknown constraint kind {kind!r}")

    def value_dof(self, node: int) -> int:
        if self.family is Family.LAGRANGE_P1:
            return node
        return 2 * node

    def element_dofs(self, e: int) -> np.ndarray:
        if self.family is Family.LAGRANGE_P1:
            return np.array([e, e + 1])
        if self.family is Family.LAGRANGE_P2:
            return np.array([2 * e, 2 * e + 1, 2 * e + 2])
        return np.array([2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3])

    # ---- coefficient-vector utilities -------------------------------------

    def full_from_free(self, u_free: np.ndarray) -> np.ndarray:
        u_free = np.asarray(u_free, dtype=float)
        if u_free.shape != (self.n_free,):
            raise ValueError(f"expected {self.n_free} free coefficients, got {u_free.shape}")
        full = np.zeros(self.n_dofs)
        full[self.free_dofs] = u_free
        return full

    def free_from_full(self, u_full: np.ndarray) -> np.ndarray:
        u_full = np.asarray(u_full, dtype=float)
        return u_full[self.free_dofs]

    def interpolate(self, f, dfdx=None) -> np.ndarray:
        """Nodal interpolant of callable f, returned as free coefficients.

        Hermite spaces need slope values; dfdx may be a callable, otherwise
        slopes are approximated by central differences.
        """
        coords = self.mesh.node_coords
        if self.family is Family.LAGRANGE_P1:
            full = np.array([f(x) for x in coords])
        elif self.family is Family.LAGRANGE_P2:
            full = np.zeros(self.n_dofs)
            full[0::2] = [f(x) for x in coords]
            mids = (coords[:-1] + coords[1:]) / 2.0
            full[1::2] = [f(x) for x in mids]
        else:
            if dfdx is None:
                eps = 1e-6 * max(1.0, self.mesh.length_L)
                dfdx = lambda x: (f(x + eps) - f(x - eps)) / (2.0 * eps)
            full = np.zeros(self.n_dofs)
            full[0::2] = [f(x) for x in coords]
            full[1::2] = [dfdx(x) for x in coords]
        return self.free_from_full(full)

    def evaluate(self, u_free: np.ndarray, xs, deriv: int = 0) -> np.ndarray:
        """Evaluate the FEM field (or a derivative) at points xs in [0, L]."""
        full = self.full_from_free(u_free)
        xs_arr = np.atleast_1d(np.asarray(xs, dtype=float))
        tol = 1e-12 * max(1.0, self.mesh.length_L)
        if np.any(xs_arr < -tol) or np.any(xs_arr > self.mesh.length_L + tol):
            raise OutOfDomain(f"evaluation points must lie in [0, {self.mesh.length_L}]")
        coords = self.mesh.node_coords
        out = np.empty_like(xs_arr)
        for k, x in enumerate(xs_arr):
            e = int(np.clip(np.searchsorted(coords, x, side="right") - 1, 0, self.mesh.n_elements - 1))
            h = self.mesh.element_size(e)
            t = (x - coords[e]) / h
            vals = _shape(self.family, t, h, deriv)
            out[k] = vals @ full[self.element_dofs(e)]
        return out if np.ndim(xs) else float(out[0])

    def load_vector(self, f) -> np.ndarray:
        """Mass-consistent load vector entries integral(f * phi_i) over free DOFs."""
        full = np.zeros(self.n_dofs)
        coords = self.mesh.node_coords
        for e in range(self.mesh.n_elements):
            h = self.mesh.element_size(e)
            dofs = self.element_dofs(e)
            for t, wgt in zip(GAUSS_T, GAUSS_W):
                x = coords[e] + h * t
                full[dofs] += (wgt * h * f(x)) * _shape(self.family, t, h, 0)
        return full[self.free_dofs]

    def integration_vector(self) -> np.ndarray:
        """Entries integral(phi_i dx) for the free DOFs (load vector of f=1)."""
        return self.load_vector(lambda x: 1.0)


@dataclass(frozen=True)
class AssembledMatrix:
    """Sparse matrix over the free DOFs of a test (row) and trial (col) space."""

    matrix: sp.csr_matrix
    row_space: FemSpace
    col_space: FemSpace

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def T(self) -> "AssembledMatrix":
        return AssembledMatrix(self.matrix.T.tocsr(), self.col_space, self.row_space)


def _assemble(row_space: FemSpace, col_space: FemSpace, dv: int, du: int, coeff: float) -> AssembledMatrix:
    """Assemble coeff * integral( d^du(trial) * d^dv(test) ) over free DOFs."""
    if row_space.mesh is not col_space.mesh:
        same = (
            row_space.mesh.n_elements == col_space.mesh.n_elements
            and np.array_equal(row_space.mesh.node_coords, col_space.mesh.node_coords)
        )
        if not same:
            raise MeshMismatch("row and column spaces must share one mesh")
    mesh = row_space.mesh
    rows, cols, vals = [], [], []
    for e in range(mesh.n_elements):
        h = mesh.element_size(e)
        rdofs = row_space.element_dofs(e)
        cdofs = col_space.element_dofs(e)
        local = np.zeros((rdofs.size, cdofs.size))
        for t, wgt in zip(GAUSS_T, GAUSS_W):
            bv = _shape(row_space.family, t, h, dv)
            bu = _shape(col_space.family, t, h, du)
            local += (wgt * h * coeff) * np.outer(bv, bu)
        rf = row_space._free_index[rdofs]
        cf = col_space._free_index[cdofs]
        for i, ri in enumerate(rf):
            if ri < 0:
                continue
            for j, cj in enumerate(cf):
                if cj < 0:
                    continue
                rows.append(ri)
                cols.append(cj)
                vals.append(local[i, j])
    matrix = sp.coo_matrix(
        (vals, (rows, cols)), shape=(row_space.n_free, col_space.n_free)
    ).tocsr()
    matrix.sum_duplicates()
    return AssembledMatrix(matrix, row_space, col_space)


def assemble_mass(space: FemSpace, coeff: float) -> AssembledMatrix:
    """SPD matrix with entries coeff * integral(phi_i * phi_j)."""
    if not coeff > 0:
        raise ValueError("mass coefficient must be positive")
    return _assemble(space, space, 0, 0, coeff)


def assemble_grad_grad(space: FemSpace, coeff: float) -> AssembledMatrix:
    """Symmetric matrix with entries coeff * integral(phi_i' * phi_j')."""
    return _assemble(space, space, 1, 1, coeff)


def assemble_bend_bend(space: FemSpace, coeff: float) -> AssembledMatrix:
    """Symmetric matrix with entries coeff * integral(phi_i'' * phi_j''); Hermite only."""
    if space.family is not Family.HERMITE_C1:
        raise WrongFamily("bending form requires a C1 (Hermite) space")
    return _assemble(space, space, 2, 2, coeff)


_FORMS = {"ux_v": (0, 1), "u_vx": (1, 0), "ux_vx": (1, 1), "u_v": (0, 0)}


def assemble_mixed(space_row: FemSpace, space_col: FemSpace, form: str, coeff: float = 1.0) -> AssembledMatrix:
    """Rectangular coupling matrix; entry(i,j) = coeff * integral(form(u=trial_j, v=test_i)).

    form is one of 'ux_v', 'u_vx', 'ux_vx', 'u_v' where u is the trial
    (column) function and v the test (row) function.
    """
    if form not in _FORMS:
        raise ValueError(f"form must be one of {sorted(_FORMS)}, got {form!r}")
    dv, du = _FORMS[form]
    return _assemble(space_row, space_col, dv, du, coeff)


def boundary_functional(space: FemSpace, endpoint, derivative_order: int = 0) -> np.ndarray:
    """Vector r over free DOFs with r @ q = field(endpoint) (or slope for order 1).

    Returns the zero vector when the requested DOF is essentially constrained.
    """
    if derivative_order not in (0, 1):
        raise ValueError("derivative_order must be 0 or 1")
    if derivative_order == 1 and space.family is not Family.HERMITE_C1:
        raise WrongFamily("slope extraction requires the Hermite family")
    node = space._endpoint_node(endpoint)
    if derivative_order == 0:
        dof = space.value_dof(node)
    else:
        dof = 2 * node + 1
    r = np.zeros(space.n_free)
    free = space._free_index[dof]
    if free >= 0:
        r[free] = 1.0
    return r


def write_matrix_coo(matrix, path) -> None:
    """Export to a coordinate-triplet text file: 'row col value' per line."""
    if isinstance(matrix, AssembledMatrix):
        matrix = matrix.matrix
    coo = sp.coo_matrix(matrix)
    coo.sum_duplicates()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# shape {coo.shape[0]} {coo.shape[1]}\n")
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.16e}\n")


def read_matrix_coo(path) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    shape = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                parts = line.split()
                shape = (int(parts[2]), int(parts[3]))
                continue
            i, j, v = line.split()
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
    return sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
