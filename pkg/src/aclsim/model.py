"""Semi-discrete state-space systems  M qdd + D qd + A q = B F(t).

Unknown fields and their element spaces:

    v1     longitudinal displacement, stiff layer    P2 Lagrange, clamped at x=0
    v3     longitudinal displacement, piezo layer    P2 Lagrange, clamped at x=0
    w      transverse displacement                   Hermite C1, value+slope clamped at x=0
    theta  in-plane magnetic potential component     Hermite C1, values pinned at x=0 and x=L

The through-thickness magnetic potential eta is not an independent unknown:
the gauge constraint eta = xi * theta_x eliminates it exactly, which is what
keeps M block-diagonal SPD and D exactly skew-symmetric. The electrostatic
and quasi-static variants drop the theta block entirely and share the
mechanical (v1, v3, w) blocks bitwise with the fully dynamic variant.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import fem
from .config import BeamConfig
from .errors import (
    DimensionMismatch,
    InvalidConfig,
    ModeViolation,
    OutOfDomain,
    UnsupportedCombination,
    WrongVariant,
)
from .pxi import PxiOperator

INPUT_PORTS = ("g1", "sigma_s", "g", "M_moment", "i_s")


class EmAssumption(enum.Enum):
    ELECTROSTATIC = "electrostatic"
    QUASISTATIC = "quasistatic"
    FULLY_DYNAMIC = "fullydynamic"


class ActuationMode(enum.Enum):
    CHARGE = "charge"
    CURRENT = "current"


@dataclass(frozen=True)
class DofLayout:
    """Ordered position blocks with offsets into the flat coefficient vector."""

    names: tuple[str, ...]
    sizes: tuple[int, ...]

    @property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for s in self.sizes:
            out.append(acc)
            acc += s
        return tuple(out)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def block_slice(self, name: str) -> slice:
        i = self.names.index(name)
        off = self.offsets[i]
        return slice(off, off + self.sizes[i])


class ActuationSignals:
    """Time functions for the boundary/electrical ports and distributed loads.

    Port signals are scalar callables of t; distributed loads f1, f3, f are
    callables (t, x) -> value, sampled at quadrature points when present.
    """

    def __init__(self, sigma_s=None, i_s=None, g1=None, g=None, M_moment=None,
                 f1=None, f3=None, f=None):
        zero = lambda t: 0.0
        self.sigma_s = sigma_s or zero
        self.i_s = i_s or zero
        self.g1 = g1 or zero
        self.g = g or zero
        self.M_moment = M_moment or zero
        self.f1 = f1
        self.f3 = f3
        self.f = f

    @classmethod
    def zero(cls) -> "ActuationSignals":
        return cls()

    def port_values(self, t: float) -> dict[str, float]:
        return {
            "sigma_s": float(self.sigma_s(t)),
            "i_s": float(self.i_s(t)),
            "g1": float(self.g1(t)),
            "g": float(self.g(t)),
            "M_moment": float(self.M_moment(t)),
        }

    def __add__(self, other: "ActuationSignals") -> "ActuationSignals":
        def add1(a, b):
            return lambda t: a(t) + b(t)

        def add2(a, b):
            if a is None and b is None:
                return None
            aa = a or (lambda t, x: 0.0)
            bb = b or (lambda t, x: 0.0)
            return lambda t, x: aa(t, x) + bb(t, x)

        return ActuationSignals(
            sigma_s=add1(self.sigma_s, other.sigma_s),
            i_s=add1(self.i_s, other.i_s),
            g1=add1(self.g1, other.g1),
            g=add1(self.g, other.g),
            M_moment=add1(self.M_moment, other.M_moment),
            f1=add2(self.f1, other.f1),
            f3=add2(self.f3, other.f3),
            f=add2(self.f, other.f),
        )

    def scaled(self, factor: float) -> "ActuationSignals":
        def s1(fn):
            return lambda t: factor * fn(t)

        def s2(fn):
            return None if fn is None else (lambda t, x: factor * fn(t, x))

        return ActuationSignals(
            sigma_s=s1(self.sigma_s), i_s=s1(self.i_s), g1=s1(self.g1),
            g=s1(self.g), M_moment=s1(self.M_moment),
            f1=s2(self.f1), f3=s2(self.f3), f=s2(self.f),
        )


class FemSystem:
    """Assembled block system; immutable after construction, shareable."""

    def __init__(self, layout, spaces, M, A, D, input_maps, em, mode, config,
                 mesh, pxi_op, xi):
        self.layout = layout
        self.spaces = spaces
        self.M = M.tocsr()
        self.A = A.tocsr()
        self.D = D.tocsr()
        self.input_maps = input_maps
        self.em = em
        self.mode = mode
        self.config = config
        self.mesh = mesh
        self.pxi = pxi_op
        self.xi = xi
        self._steppers: dict[float, object] = {}

    @property
    def n_positions(self) -> int:
        return self.layout.total

    def has_block(self, name: str) -> bool:
        return name in self.layout.names

    def block(self, q: np.ndarray, name: str) -> np.ndarray:
        return q[self.layout.block_slice(name)]

    def stepper(self, dt: float):
        """Midpoint stepper with the factorization cached per (system, dt)."""
        if dt not in self._steppers:
            from .integrator import MidpointStepper

            self._steppers[dt] = MidpointStepper(self, dt)
        return self._steppers[dt]


def _mechanical_blocks(config: BeamConfig, spaces, pxi_op: PxiOperator):
    """Mass and stiffness blocks shared by every electromagnetic variant."""
    g = config.geometry
    mt = config.materials
    d = config.derived
    v1s, v3s, ws = spaces["v1"], spaces["v3"], spaces["w"]

    M_blocks = {
        "v1": (fem.assemble_mass(v1s, mt.rho1 * g.h1).matrix),
        "v3": (fem.assemble_mass(v3s, mt.rho3 * g.h3).matrix),
        "w": (
            fem.assemble_mass(ws, d.m).matrix
            + fem.assemble_grad_grad(ws, d.K1).matrix
        ),
    }

    shear = mt.G2 / g.h2
    S_pxi = sp.csr_matrix(
        (mt.gamma**2 * g.h3 / mt.eps3) * pxi_op.stiffness_through_resolvent(v3s)
    )
    A_blocks = {
        ("v1", "v1"): fem.assemble_grad_grad(v1s, mt.alpha1 * g.h1).matrix
        + fem.assemble_mass(v1s, shear).matrix,
        ("v3", "v3"): fem.assemble_grad_grad(v3s, mt.alpha3 * g.h3).matrix
        + S_pxi
        + fem.assemble_mass(v3s, shear).matrix,
        ("w", "w"): fem.assemble_bend_bend(ws, d.K2).matrix
        + fem.assemble_grad_grad(ws, shear * d.H**2).matrix,
        # shear field s = (-v1 + v3 + H*w_x)/h2 couples the blocks pairwise
        ("v1", "v3"): fem.assemble_mixed(v1s, v3s, "u_v", -shear).matrix,
        ("v1", "w"): fem.assemble_mixed(v1s, ws, "ux_v", -shear * d.H).matrix,
        ("v3", "w"): fem.assemble_mixed(v3s, ws, "ux_v", shear * d.H).matrix,
    }
    A_blocks[("v3", "v1")] = A_blocks[("v1", "v3")].T.tocsr()
    A_blocks[("w", "v1")] = A_blocks[("v1", "w")].T.tocsr()
    A_blocks[("w", "v3")] = A_blocks[("v3", "w")].T.tocsr()
    return M_blocks, A_blocks


def assemble(config: BeamConfig, mesh: fem.Mesh1D, em, mode,
             xi: Optional[float] = None, strict_h2l: bool = False) -> FemSystem:
    """Build the semi-discrete system for one electromagnetic assumption.

    xi overrides the config-derived induced-potential scale (used by
    stiffening studies); strict_h2l additionally pins the w slope at x=L.

    Raises UnsupportedCombination for (electrostatic, current): with all
    magnetic effects dropped there is no work term through which a surface
    current could enter.
    """
    em = EmAssumption(em)
    mode = ActuationMode(mode)
    if mesh.n_elements < 2:
        raise InvalidConfig("n_elements must be >= 2")
    if em is EmAssumption.ELECTROSTATIC and mode is ActuationMode.CURRENT:
        raise UnsupportedCombination(
            "electrostatic + current actuation is not modeled: without magnetic "
            "effects the surface current does no work on the structure"
        )
    xi_eff = config.derived.xi if xi is None else float(xi)
    if xi_eff < 0:
        raise InvalidConfig("xi must be >= 0")
    if em is EmAssumption.FULLY_DYNAMIC and xi_eff == 0.0:
        raise InvalidConfig("fully dynamic assembly needs xi > 0 (theta mass vanishes)")

    g = config.geometry
    mt = config.materials
    d = config.derived

    w_constraints = [("value", 0), ("slope", 0)]
    if strict_h2l:
        w_constraints.append(("slope", mesh.length_L))
    spaces = {
        "v1": fem.FemSpace(mesh, fem.Family.LAGRANGE_P2, [("value", 0)]),
        "v3": fem.FemSpace(mesh, fem.Family.LAGRANGE_P2, [("value", 0)]),
        "w": fem.FemSpace(mesh, fem.Family.HERMITE_C1, w_constraints),
    }
    pxi_op = PxiOperator(mesh, xi_eff)
    M_blocks, A_blocks = _mechanical_blocks(config, spaces, pxi_op)

    names = ["v1", "v3", "w"]
    if em is EmAssumption.FULLY_DYNAMIC:
        thetas = fem.FemSpace(
            mesh, fem.Family.HERMITE_C1, [("value", 0), ("value", mesh.length_L)]
        )
        spaces["theta"] = thetas
        names.append("theta")
        # eta = xi*theta_x folds the eta mass into the theta block and turns
        # the magnetic energy mu*h3*|theta - eta_x|^2 into the Helmholtz-like
        # pairing (theta - xi*theta_xx, ...)
        M_blocks["theta"] = (
            fem.assemble_mass(thetas, xi_eff * mt.eps3 * g.h3).matrix
            + fem.assemble_grad_grad(thetas, xi_eff**2 * mt.eps3 * g.h3).matrix
        )
        A_blocks[("theta", "theta")] = (
            fem.assemble_mass(thetas, mt.mu * g.h3).matrix
            + fem.assemble_grad_grad(thetas, 2.0 * mt.mu * g.h3 * xi_eff).matrix
            + fem.assemble_bend_bend(thetas, mt.mu * g.h3 * xi_eff**2).matrix
        )

    layout = DofLayout(tuple(names), tuple(spaces[n].n_free for n in names))
    n = layout.total

    def grid(blocks):
        mat = [[blocks.get((r, c)) for c in names] for r in names]
        return sp.bmat(mat, format="csr")

    M = sp.block_diag([M_blocks[nm] for nm in names], format="csr")
    A = grid(A_blocks)

    if em is EmAssumption.FULLY_DYNAMIC:
        # gyroscopic velocity coupling between v3 and theta; the resolvent
        # contributions cancel exactly against the (P - I) split, leaving the
        # plain grad-grad pairing scaled by gamma*xi*h3
        R = fem.assemble_mixed(spaces["v3"], spaces["theta"], "ux_vx",
                               mt.gamma * xi_eff * g.h3).matrix.tocoo()
        off3 = layout.block_slice("v3").start
        offt = layout.block_slice("theta").start
        rows = np.concatenate([R.row + off3, R.col + offt])
        cols = np.concatenate([R.col + offt, R.row + off3])
        vals = np.concatenate([R.data, -R.data])
        D = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    else:
        D = sp.csr_matrix((n, n))

    def embed(name: str, vec: np.ndarray) -> np.ndarray:
        out = np.zeros(n)
        out[layout.block_slice(name)] = vec
        return out

    input_maps = {
        "g1": embed("v1", fem.boundary_functional(spaces["v1"], mesh.length_L, 0)),
        "sigma_s": embed(
            "v3",
            (-mt.gamma / mt.eps3)
            * fem.boundary_functional(spaces["v3"], mesh.length_L, 0),
        ),
        "g": embed("w", fem.boundary_functional(spaces["w"], mesh.length_L, 0)),
        # applied tip moment enters the weak form as -K2*M(t) times the tip
        # slope functional (sign convention documented in the README)
        "M_moment": embed(
            "w", -d.K2 * fem.boundary_functional(spaces["w"], mesh.length_L, 1)
        ),
    }
    if em is EmAssumption.FULLY_DYNAMIC:
        input_maps["i_s"] = embed("theta", spaces["theta"].integration_vector())

    return FemSystem(layout, spaces, M, A, D, input_maps, em, mode, config,
                     mesh, pxi_op, xi_eff)


def energy(system: FemSystem, q: np.ndarray, p: np.ndarray) -> float:
    """Total energy 0.5*(p'Mp + q'Aq) of a position/velocity pair."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    n = system.n_positions
    if q.shape != (n,) or p.shape != (n,):
        raise DimensionMismatch(f"expected vectors of length {n}")
    return 0.5 * (p @ (system.M @ p) + q @ (system.A @ q))


def input_vector(system: FemSystem, signals: ActuationSignals, t: float) -> np.ndarray:
    """Load vector B F(t); enforces charge/current signal exclusivity."""
    vals = signals.port_values(t)
    if system.mode is ActuationMode.CHARGE and vals["i_s"] != 0.0:
        raise ModeViolation("charge actuation requires i_s == 0")
    if system.mode is ActuationMode.CURRENT and vals["sigma_s"] != 0.0:
        raise ModeViolation("current actuation requires sigma_s == 0")
    out = np.zeros(system.n_positions)
    for name, vec in system.input_maps.items():
        v = vals[name]
        if v != 0.0:
            out += v * vec
    for load, block in ((signals.f1, "v1"), (signals.f3, "v3"), (signals.f, "w")):
        if load is not None:
            space = system.spaces[block]
            out[system.layout.block_slice(block)] += space.load_vector(
                lambda x: load(t, x)
            )
    return out


def shear_phi2(system: FemSystem, q: np.ndarray, xs) -> np.ndarray:
    """Core shear field (-v1 + v3 + H*w_x)/h2 evaluated at the given points."""
    v1 = system.spaces["v1"].evaluate(system.block(q, "v1"), xs)
    v3 = system.spaces["v3"].evaluate(system.block(q, "v3"), xs)
    wx = system.spaces["w"].evaluate(system.block(q, "w"), xs, deriv=1)
    H = system.config.derived.H
    h2 = system.config.geometry.h2
    return (-np.asarray(v1) + v3 + H * np.asarray(wx)) / h2


PROBE_FIELDS = ("v1", "v3", "w", "wx", "theta", "phi2")


def _eval_row(space: fem.FemSpace, x: float, deriv: int = 0) -> np.ndarray:
    """Row r over free DOFs with r @ coeffs = field^(deriv)(x)."""
    coords = space.mesh.node_coords
    e = int(np.clip(np.searchsorted(coords, x, side="right") - 1, 0,
                    space.mesh.n_elements - 1))
    h = space.mesh.element_size(e)
    t = (x - coords[e]) / h
    vals = fem._shape(space.family, t, h, deriv)
    row = np.zeros(space.n_free)
    for local, dof in enumerate(space.element_dofs(e)):
        free = space._free_index[dof]
        if free >= 0:
            row[free] = vals[local]
    return row


def probe_row(system: FemSystem, field: str, x: float) -> np.ndarray:
    """Linear functional over positions q extracting a field value at x."""
    if field not in PROBE_FIELDS:
        raise ValueError(f"unknown probe field {field!r}; choose from {PROBE_FIELDS}")
    if not 0.0 <= x <= system.mesh.length_L:
        raise OutOfDomain(f"probe location {x} outside [0, {system.mesh.length_L}]")
    n = system.n_positions
    row = np.zeros(n)
    if field == "phi2":
        H = system.config.derived.H
        h2 = system.config.geometry.h2
        row[system.layout.block_slice("v1")] = -_eval_row(system.spaces["v1"], x) / h2
        row[system.layout.block_slice("v3")] = _eval_row(system.spaces["v3"], x) / h2
        row[system.layout.block_slice("w")] = (H / h2) * _eval_row(
            system.spaces["w"], x, deriv=1
        )
        return row
    if field == "theta" and not system.has_block("theta"):
        raise WrongVariant("theta probes require the fully dynamic variant")
    block = {"v1": "v1", "v3": "v3", "w": "w", "wx": "w", "theta": "theta"}[field]
    deriv = 1 if field == "wx" else 0
    row[system.layout.block_slice(block)] = _eval_row(system.spaces[block], x, deriv)
    return row


def eval_field(system: FemSystem, q: np.ndarray, field: str, xs, deriv: int = 0):
    """Evaluate a named position field; 'eta' reconstructs xi * theta_x."""
    if field == "eta":
        if not system.has_block("theta"):
            raise WrongVariant("eta exists only in the fully dynamic variant")
        slope = system.spaces["theta"].evaluate(
            system.block(q, "theta"), xs, deriv=1
        )
        return system.xi * slope
    if field == "phi2":
        return shear_phi2(system, q, xs)
    return system.spaces[field].evaluate(system.block(q, field), xs, deriv=deriv)


def recover_quasistatic_em(system: FemSystem, v3_velocity: np.ndarray,
                           i_s_value: float):
    """Post-process the static magnetic fields of the quasi-static variant.

    Solves the two SPD Helmholtz-type problems

        mu*h3*(theta - xi*theta_xx) = i_s - gamma*xi*h3*(P v3dot_x)_x,
            theta(0) = theta(L) = 0,
        mu*h3*(eta - xi*eta_xx) = -gamma*xi*h3*(P - I) v3dot_x,
            eta_x(0) = eta_x(L) = 0 (natural),

    on quadratic Lagrange recovery spaces. Returns
    ((theta_space, theta), (eta_space, eta), residual).
    """
    if system.em is not EmAssumption.QUASISTATIC:
        raise WrongVariant("magnetic recovery applies to the quasi-static variant")
    mesh = system.mesh
    mt = system.config.materials
    h3 = system.config.geometry.h3
    xi = system.xi
    gxh = mt.gamma * xi * h3

    theta_space = fem.FemSpace(
        mesh, fem.Family.LAGRANGE_P2, [("value", 0), ("value", mesh.length_L)]
    )
    eta_space = fem.FemSpace(mesh, fem.Family.LAGRANGE_P2)

    pxi_op = system.pxi
    u = pxi_op.apply_to_derivative(system.spaces["v3"], v3_velocity)
    dproj = pxi_op.project_derivative(system.spaces["v3"], v3_velocity)

    K_theta = (
        fem.assemble_mass(theta_space, mt.mu * h3).matrix
        + fem.assemble_grad_grad(theta_space, mt.mu * h3 * xi).matrix
    ).toarray()
    T1 = fem.assemble_mixed(theta_space, pxi_op.helper_space, "u_vx", 1.0).matrix
    rhs_theta = i_s_value * theta_space.integration_vector() + gxh * (T1 @ u)
    theta = np.linalg.solve(K_theta, rhs_theta)

    K_eta = (
        fem.assemble_mass(eta_space, mt.mu * h3).matrix
        + fem.assemble_grad_grad(eta_space, mt.mu * h3 * xi).matrix
    ).toarray()
    T2 = fem.assemble_mixed(eta_space, pxi_op.helper_space, "u_v", 1.0).matrix
    rhs_eta = -gxh * (T2 @ (u - dproj))
    eta = np.linalg.solve(K_eta, rhs_eta)

    res_theta = np.max(np.abs(K_theta @ theta - rhs_theta))
    res_eta = np.max(np.abs(K_eta @ eta - rhs_eta))
    scale = 1.0 + max(np.max(np.abs(rhs_theta), initial=0.0),
                      np.max(np.abs(rhs_eta), initial=0.0))
    residual = max(res_theta, res_eta) / scale
    return (theta_space, theta), (eta_space, eta), residual


def export_system(system: FemSystem, directory) -> None:
    """Write M/A/D as coordinate triplets plus a block-layout manifest."""
    os.makedirs(directory, exist_ok=True)
    fem.write_matrix_coo(system.M, os.path.join(directory, "mass.coo"))
    fem.write_matrix_coo(system.A, os.path.join(directory, "stiffness.coo"))
    fem.write_matrix_coo(system.D, os.path.join(directory, "gyroscopic.coo"))
    with open(os.path.join(directory, "system_manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"em = {system.em.value}\n")
        fh.write(f"actuation = {system.mode.value}\n")
        fh.write(f"n_elements = {system.mesh.n_elements}\n")
        fh.write(f"n_positions = {system.n_positions}\n")
        for name, size, off in zip(system.layout.names, system.layout.sizes,
                                   system.layout.offsets):
            fh.write(f"block {name} offset={off} size={size}\n")
