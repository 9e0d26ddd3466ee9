"""Geometrically nonlinear planar beam finite elements.

Two-node shear-deformable beam elements in a corotational frame. Each
element carries an exact small-strain Timoshenko response inside a frame
that rotates with the element, so large rigid translations and rotations
are represented exactly while local strains stay small. The local bending
block is the closed-form shear-deformable stiffness, which has no shear
locking at any slenderness and reduces to the Euler-Bernoulli element as
the shear rigidity grows.

Conventions:

* Units are mm, N and rad. EI is N*mm^2, EA and kGA are N, moments N*mm.
* A mesh with E elements has E + 1 nodes and 3 DOFs per node,
  ordered (ux, uy, phi); phi is the cross-section rotation measured from
  the node's rest orientation.
* Reactions are the forces the constraints exert on the beam. The force
  the beam applies to whatever is holding it is the negative.

Solvers never mutate their input mesh, so solves on independent meshes
are safe to run concurrently.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ConvergenceError",
    "SingularModelError",
    "InsufficientSectionDataError",
    "NodeState",
    "SectionProperties",
    "DirichletBC",
    "Reaction",
    "ElementResultants",
    "SolveResult",
    "BeamMesh",
    "element_stiffness",
    "internal_forces",
    "assemble_global",
    "solve_quasistatic",
    "recover_resultants",
    "snapped_node_arcs",
    "straight_wire_mesh",
    "centerline_mesh",
    "dump_solution_csv",
    "wrap_angle",
]

_DOF_NAMES = ("ux", "uy", "phi")

#: Dimensionless multiplier for the inextensibility default EA = 1e4 * max(EI) / L^2.
AXIAL_RIGIDITY_FACTOR = 1.0e4

#: Shear coefficient of a solid circular section.
DEFAULT_KAPPA = 0.9

#: Poisson ratio used when deriving G from E.
DEFAULT_NU = 0.3


class ConvergenceError(RuntimeError):
    """Equilibrium iterations failed to reach the force tolerance."""

    def __init__(self, message: str, residual_norm: float, increment: int):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.increment = increment


class SingularModelError(RuntimeError):
    """Tangent stiffness is singular; the message names the free mode."""


class InsufficientSectionDataError(ValueError):
    """Stress recovery needs both the outer radius and the second moment."""


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    return np.arctan2(np.sin(a), np.cos(a))


@dataclass(frozen=True)
class NodeState:
    """Position and cross-section rotation of one node.

    ``phi`` is measured from the node's rest orientation, so an unloaded
    mesh has phi = 0 everywhere.
    """

    x: float
    y: float
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.phi)):
            raise ValueError("node state must be finite")


@dataclass(frozen=True)
class SectionProperties:
    """Cross-section rigidities of one element.

    EI:    flexural rigidity, N*mm^2
    EA:    axial rigidity, N
    kGA:   effective shear rigidity kappa*G*A, N
    kappa: shear correction coefficient (0, 1]
    """

    EI: float
    EA: float
    kGA: float
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        if not (self.EI > 0 and math.isfinite(self.EI)):
            raise ValueError(f"EI must be positive and finite, got {self.EI}")
        if not (self.EA > 0 and math.isfinite(self.EA)):
            raise ValueError(f"EA must be positive and finite, got {self.EA}")
        if not (self.kGA > 0 and math.isfinite(self.kGA)):
            raise ValueError(f"kGA must be positive and finite, got {self.kGA}")
        if not (0.0 < self.kappa <= 1.0):
            raise ValueError(f"kappa must be in (0, 1], got {self.kappa}")


@dataclass(frozen=True)
class DirichletBC:
    """Prescribed nodal displacement.

    Values are displacements from the rest position; a ``None`` component
    leaves that translation free. The rotation DOF is clamped to zero only
    when ``rotation_constrained`` is set, which is the fixed base of a
    cantilever model.
    """

    node_index: int
    prescribed_ux: float | None = 0.0
    prescribed_uy: float | None = 0.0
    rotation_constrained: bool = False

    def __post_init__(self):
        if self.node_index < 0:
            raise ValueError("node_index must be non-negative")
        for v in (self.prescribed_ux, self.prescribed_uy):
            if v is not None and not math.isfinite(v):
                raise ValueError("prescribed displacements must be finite")
        if self.prescribed_ux is None and self.prescribed_uy is None and not self.rotation_constrained:
            raise ValueError("boundary condition constrains nothing")


@dataclass(frozen=True)
class Reaction:
    """Constraint force on the beam at one constrained node.

    ``moment`` is None when the rotation DOF is free.
    """

    node_index: int
    fx: float
    fy: float
    moment: float | None = None

    @property
    def force(self) -> np.ndarray:
        return np.array([self.fx, self.fy])

    @property
    def magnitude(self) -> float:
        return float(math.hypot(self.fx, self.fy))


@dataclass
class ElementResultants:
    """Per-element stress resultants recovered from a solved state.

    axial:       (E,) axial force, tension positive, N
    shear:       (E,) transverse shear force, N
    end_moments: (E, 2) internal bending moment at the element's two
                 nodes, N*mm
    stress:      (E,) outer-fiber bending stress, N/mm^2, present only
                 when section radius and second moment were supplied
    """

    axial: np.ndarray
    shear: np.ndarray
    end_moments: np.ndarray
    stress: np.ndarray | None = None

    @property
    def moment(self) -> np.ndarray:
        """Signed end moment of larger magnitude per element."""
        pick = np.argmax(np.abs(self.end_moments), axis=1)
        return self.end_moments[np.arange(len(pick)), pick]


@dataclass
class SolveResult:
    """Converged state of a quasi-static solve.

    deformed_nodes: (n_nodes, 3) columns x, y, phi
    reactions:      one entry per Dirichlet-constrained node
    """

    deformed_nodes: np.ndarray
    reactions: list[Reaction]
    element_resultants: ElementResultants
    converged: bool
    increments_used: int
    residual_norm: float

    def node_state(self, i: int) -> NodeState:
        x, y, phi = self.deformed_nodes[i]
        return NodeState(float(x), float(y), float(phi))

    def reaction_at(self, node_index: int) -> Reaction:
        for r in self.reactions:
            if r.node_index == node_index:
                return r
        raise KeyError(f"node {node_index} is not constrained")


@dataclass
class BeamMesh:
    """Planar beam discretization together with its current nodal state.

    rest_xy:  (n_nodes, 2) intrinsic (unloaded) node positions, mm
    sections: one SectionProperties per element; element i joins
              nodes i and i + 1
    node_xy:  current node positions, defaults to the rest shape
    node_phi: current nodal rotations from rest, defaults to zero
    """

    rest_xy: np.ndarray
    sections: list[SectionProperties]
    node_xy: np.ndarray | None = None
    node_phi: np.ndarray | None = None

    def __post_init__(self):
        self.rest_xy = np.array(self.rest_xy, dtype=float)
        if self.rest_xy.ndim != 2 or self.rest_xy.shape[1] != 2 or len(self.rest_xy) < 2:
            raise ValueError("rest_xy must be an (n_nodes, 2) array with n_nodes >= 2")
        if not np.all(np.isfinite(self.rest_xy)):
            raise ValueError("rest_xy must be finite")
        if len(self.sections) != len(self.rest_xy) - 1:
            raise ValueError(
                f"need {len(self.rest_xy) - 1} sections for {len(self.rest_xy)} nodes, "
                f"got {len(self.sections)}"
            )
        lengths = np.linalg.norm(np.diff(self.rest_xy, axis=0), axis=1)
        if np.any(lengths <= 0):
            raise ValueError("all element rest lengths must be positive")
        if self.node_xy is None:
            self.node_xy = self.rest_xy.copy()
        else:
            self.node_xy = np.array(self.node_xy, dtype=float)
            if self.node_xy.shape != self.rest_xy.shape:
                raise ValueError("node_xy must match rest_xy shape")
        if self.node_phi is None:
            self.node_phi = np.zeros(len(self.rest_xy))
        else:
            self.node_phi = np.array(self.node_phi, dtype=float)
            if self.node_phi.shape != (len(self.rest_xy),):
                raise ValueError("node_phi must have one entry per node")

    @property
    def n_nodes(self) -> int:
        return len(self.rest_xy)

    @property
    def n_elements(self) -> int:
        return len(self.rest_xy) - 1

    @property
    def dof_count(self) -> int:
        return 3 * self.n_nodes

    @property
    def rest_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.rest_xy, axis=0), axis=1)

    @property
    def arc(self) -> np.ndarray:
        """Arc length of each node along the rest shape, starting at 0."""
        return np.concatenate([[0.0], np.cumsum(self.rest_lengths)])

    @property
    def length(self) -> float:
        return float(self.arc[-1])

    def displacements(self) -> np.ndarray:
        """Current DOF vector (3 * n_nodes,) relative to the rest shape."""
        u = np.empty((self.n_nodes, 3))
        u[:, :2] = self.node_xy - self.rest_xy
        u[:, 2] = self.node_phi
        return u.ravel()

    def with_displacements(self, u: np.ndarray) -> "BeamMesh":
        """Return a new mesh at the state described by DOF vector ``u``."""
        uu = np.asarray(u, dtype=float).reshape(self.n_nodes, 3)
        return BeamMesh(
            rest_xy=self.rest_xy.copy(),
            sections=list(self.sections),
            node_xy=self.rest_xy + uu[:, :2],
            node_phi=uu[:, 2].copy(),
        )

    def node_state(self, i: int) -> NodeState:
        return NodeState(float(self.node_xy[i, 0]), float(self.node_xy[i, 1]), float(self.node_phi[i]))

    def node_at_arc(self, s: float) -> int:
        """Index of the node closest to arc position ``s``."""
        return int(np.argmin(np.abs(self.arc - s)))


# ---------------------------------------------------------------------------
# element matrices


def element_stiffness(props: SectionProperties, l: float, axial_force: float = 0.0) -> np.ndarray:
    """Local-frame 6x6 tangent stiffness of one element.

    Returns K_L + K_NL with DOF order (ux1, uy1, phi1, ux2, uy2, phi2) in
    the element frame (x along the element axis). K_L is the closed-form
    shear-deformable beam stiffness; K_NL is the consistent geometric
    stiffness scaled by the current axial force (tension positive), which
    couples the axial load with lateral deformation.
    """
    if not (l > 0 and math.isfinite(l)):
        raise ValueError(f"element length must be positive and finite, got {l}")
    if not isinstance(props, SectionProperties):
        props = SectionProperties(*props)

    phi_s = 12.0 * props.EI / (props.kGA * l * l)
    a = props.EA / l
    b = props.EI / (l**3 * (1.0 + phi_s))
    l2 = l * l

    k = np.array(
        [
            [a, 0.0, 0.0, -a, 0.0, 0.0],
            [0.0, 12 * b, 6 * b * l, 0.0, -12 * b, 6 * b * l],
            [0.0, 6 * b * l, (4 + phi_s) * b * l2, 0.0, -6 * b * l, (2 - phi_s) * b * l2],
            [-a, 0.0, 0.0, a, 0.0, 0.0],
            [0.0, -12 * b, -6 * b * l, 0.0, 12 * b, -6 * b * l],
            [0.0, 6 * b * l, (2 - phi_s) * b * l2, 0.0, -6 * b * l, (4 + phi_s) * b * l2],
        ]
    )

    if axial_force != 0.0:
        g = np.zeros((6, 6))
        g[1, 1] = g[4, 4] = 36.0
        g[1, 4] = g[4, 1] = -36.0
        g[1, 2] = g[2, 1] = g[1, 5] = g[5, 1] = 3.0 * l
        g[2, 4] = g[4, 2] = g[4, 5] = g[5, 4] = -3.0 * l
        g[2, 2] = g[5, 5] = 4.0 * l2
        g[2, 5] = g[5, 2] = -l2
        k = k + (axial_force / (30.0 * l)) * g

    return k


@dataclass
class _CorotState:
    """Per-element corotational kinematics and natural forces."""

    L0: np.ndarray
    Ln: np.ndarray
    c: np.ndarray
    s: np.ndarray
    N: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    r: np.ndarray  # (E, 6)
    z: np.ndarray  # (E, 6)
    B: np.ndarray  # (E, 3, 6)
    k_nat: np.ndarray  # (E, 3, 3)


def _section_arrays(mesh: BeamMesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    EI = np.array([sec.EI for sec in mesh.sections])
    EA = np.array([sec.EA for sec in mesh.sections])
    kGA = np.array([sec.kGA for sec in mesh.sections])
    return EI, EA, kGA


def _corot_state(mesh: BeamMesh, u: np.ndarray) -> _CorotState:
    uu = u.reshape(mesh.n_nodes, 3)
    cur = mesh.rest_xy + uu[:, :2]
    phi = uu[:, 2]

    d0 = np.diff(mesh.rest_xy, axis=0)
    L0 = np.linalg.norm(d0, axis=1)
    beta0 = np.arctan2(d0[:, 1], d0[:, 0])

    d = np.diff(cur, axis=0)
    Ln = np.linalg.norm(d, axis=1)
    if np.any(Ln < 1e-12 * np.max(L0)):
        bad = int(np.argmin(Ln))
        raise ValueError(f"element {bad} has collapsed to zero length")
    beta = np.arctan2(d[:, 1], d[:, 0])
    c = d[:, 0] / Ln
    s = d[:, 1] / Ln

    alpha = wrap_angle(beta - beta0)
    ubar = Ln - L0
    t1 = wrap_angle(phi[:-1] - alpha)
    t2 = wrap_angle(phi[1:] - alpha)

    EI, EA, kGA = _section_arrays(mesh)
    phi_s = 12.0 * EI / (kGA * L0 * L0)
    cb = EI / (L0 * (1.0 + phi_s))

    N = EA / L0 * ubar
    M1 = cb * ((4.0 + phi_s) * t1 + (2.0 - phi_s) * t2)
    M2 = cb * ((2.0 - phi_s) * t1 + (4.0 + phi_s) * t2)

    E = mesh.n_elements
    r = np.zeros((E, 6))
    r[:, 0] = -c
    r[:, 1] = -s
    r[:, 3] = c
    r[:, 4] = s
    z = np.zeros((E, 6))
    z[:, 0] = s
    z[:, 1] = -c
    z[:, 3] = -s
    z[:, 4] = c

    B = np.zeros((E, 3, 6))
    B[:, 0, :] = r
    B[:, 1, :] = -z / Ln[:, None]
    B[:, 1, 2] += 1.0
    B[:, 2, :] = -z / Ln[:, None]
    B[:, 2, 5] += 1.0

    k_nat = np.zeros((E, 3, 3))
    k_nat[:, 0, 0] = EA / L0
    k_nat[:, 1, 1] = (4.0 + phi_s) * cb
    k_nat[:, 2, 2] = (4.0 + phi_s) * cb
    k_nat[:, 1, 2] = (2.0 - phi_s) * cb
    k_nat[:, 2, 1] = (2.0 - phi_s) * cb

    return _CorotState(L0=L0, Ln=Ln, c=c, s=s, N=N, M1=M1, M2=M2, r=r, z=z, B=B, k_nat=k_nat)


def _element_dof_indices(n_elements: int) -> np.ndarray:
    return 3 * np.arange(n_elements)[:, None] + np.arange(6)[None, :]


def _forces_from_state(mesh: BeamMesh, st: _CorotState) -> np.ndarray:
    q = np.stack([st.N, st.M1, st.M2], axis=1)
    fe = np.einsum("eij,ei->ej", st.B, q)
    f = np.zeros(mesh.dof_count)
    idx = _element_dof_indices(mesh.n_elements)
    np.add.at(f, idx.ravel(), fe.ravel())
    return f


def _tangent_from_state(mesh: BeamMesh, st: _CorotState) -> np.ndarray:
    ke = np.einsum("eai,eab,ebj->eij", st.B, st.k_nat, st.B)
    ke += (st.N / st.Ln)[:, None, None] * np.einsum("ei,ej->eij", st.z, st.z)
    rz = np.einsum("ei,ej->eij", st.r, st.z)
    ke += ((st.M1 + st.M2) / st.Ln**2)[:, None, None] * (rz + np.swapaxes(rz, 1, 2))

    n = mesh.dof_count
    K = np.zeros((n, n))
    idx = _element_dof_indices(mesh.n_elements)
    rows = np.repeat(idx[:, :, None], 6, axis=2)
    cols = np.repeat(idx[:, None, :], 6, axis=1)
    np.add.at(K, (rows.ravel(), cols.ravel()), ke.ravel())
    return K


def internal_forces(mesh: BeamMesh, displacements: np.ndarray | None = None) -> np.ndarray:
    """Global internal force vector (gradient of the strain energy).

    Evaluated at the mesh's current state unless a DOF vector is given.
    At a constrained DOF with no external load this equals the reaction.
    """
    u = mesh.displacements() if displacements is None else np.asarray(displacements, float)
    return _forces_from_state(mesh, _corot_state(mesh, u))


def assemble_global(mesh: BeamMesh, displacements: np.ndarray | None = None) -> np.ndarray:
    """Global consistent tangent stiffness at the mesh's current state.

    Each element's stiffness is expressed in its current (rotated) frame
    and scatter-added by connectivity; the geometric terms from the
    current axial forces and end moments are included, so the matrix is
    the exact derivative of :func:`internal_forces`. At the rest state it
    reduces to the assembled rotated linear stiffness.
    """
    u = mesh.displacements() if displacements is None else np.asarray(displacements, float)
    return _tangent_from_state(mesh, _corot_state(mesh, u))


# ---------------------------------------------------------------------------
# quasi-static solve


def _null_mode_description(kff: np.ndarray, free_dofs: np.ndarray) -> str:
    w, v = np.linalg.eigh(0.5 * (kff + kff.T))
    i = int(np.argmin(np.abs(w)))
    mode = v[:, i]
    j = int(np.argmax(np.abs(mode)))
    dof = int(free_dofs[j])
    node, comp = divmod(dof, 3)
    return (
        f"unconstrained mode dominated by node {node} DOF {_DOF_NAMES[comp]} "
        f"(eigenvalue {w[i]:.3e})"
    )


def solve_quasistatic(
    mesh: BeamMesh,
    bcs: Sequence[DirichletBC],
    increments: int = 10,
    tol: float = 1e-6,
    max_iters: int = 50,
    external_loads: np.ndarray | None = None,
) -> SolveResult:
    """Incremental displacement-controlled equilibrium solve.

    Prescribed displacements (and any external nodal loads) are ramped in
    ``increments`` equal steps. Within each step, full Newton iterations
    on the free DOFs run until the out-of-balance force norm drops to
    ``tol`` (N). The input mesh is not modified.

    external_loads: optional (3 * n_nodes,) vector of nodal loads
    (fx, fy, moment per node) ramped together with the displacements;
    this is the force-controlled forward path.

    Raises ConvergenceError when an increment does not converge within
    ``max_iters`` iterations and SingularModelError when the tangent is
    singular (insufficient constraints).
    """
    if increments < 1:
        raise ValueError("increments must be >= 1")
    if not (tol > 0):
        raise ValueError("tol must be positive")
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    if not bcs:
        raise ValueError("at least one boundary condition is required")

    n = mesh.dof_count
    seen: set[int] = set()
    pres_dofs: list[int] = []
    pres_vals: list[float] = []
    for bc in bcs:
        if bc.node_index >= mesh.n_nodes:
            raise ValueError(f"BC node {bc.node_index} out of range for {mesh.n_nodes} nodes")
        if bc.node_index in seen:
            raise ValueError(f"duplicate boundary condition at node {bc.node_index}")
        seen.add(bc.node_index)
        base = 3 * bc.node_index
        if bc.prescribed_ux is not None:
            pres_dofs.append(base)
            pres_vals.append(bc.prescribed_ux)
        if bc.prescribed_uy is not None:
            pres_dofs.append(base + 1)
            pres_vals.append(bc.prescribed_uy)
        if bc.rotation_constrained:
            pres_dofs.append(base + 2)
            pres_vals.append(0.0)

    pres = np.array(pres_dofs, dtype=int)
    target = np.array(pres_vals, dtype=float)
    free = np.setdiff1d(np.arange(n), pres)

    if external_loads is None:
        R = np.zeros(n)
    else:
        R = np.asarray(external_loads, dtype=float)
        if R.shape != (n,):
            raise ValueError(f"external_loads must have shape ({n},)")

    u = mesh.displacements()
    u0_pres = u[pres].copy()

    def newton_at(lam: float, u_work: np.ndarray) -> tuple[bool, float]:
        u_work[pres] = u0_pres + lam * (target - u0_pres)
        rk = lam * R
        rn = 0.0
        best = math.inf
        stall = 0
        for it in range(max_iters + 1):
            st = _corot_state(mesh, u_work)
            f = _forces_from_state(mesh, st)
            res = f[free] - rk[free]
            rn = float(np.linalg.norm(res)) if free.size else 0.0
            if rn <= tol:
                return True, rn
            if it == max_iters:
                return False, rn
            # cycling guard: bail early (the caller bisects the step) when
            # the residual stops making headway
            if rn < 0.5 * best:
                best = rn
                stall = 0
            else:
                stall += 1
                if stall >= 8:
                    return False, rn
            K = _tangent_from_state(mesh, st)
            kff = K[np.ix_(free, free)]
            try:
                du = np.linalg.solve(kff, -res)
            except np.linalg.LinAlgError as exc:
                raise SingularModelError(
                    "singular tangent: " + _null_mode_description(kff, free)
                ) from exc
            lin_res = kff @ du + res
            if not np.all(np.isfinite(du)) or np.linalg.norm(lin_res) > 1e-6 * max(rn, tol):
                raise SingularModelError(
                    "singular tangent: " + _null_mode_description(kff, free)
                )
            u_work[free] += du
        return False, rn

    # equal ramp steps, with bisection of any step that fails to converge
    rn = 0.0
    min_step = max(1.0 / increments / 32.0, 1e-6)
    lam = 0.0
    pending = [k / increments for k in range(1, increments + 1)]
    steps_used = 0
    while pending:
        lam_next = pending[0]
        trial = u.copy()
        ok, rn = newton_at(lam_next, trial)
        if ok:
            u = trial
            lam = lam_next
            pending.pop(0)
            steps_used += 1
            continue
        if lam_next - lam <= min_step:
            raise ConvergenceError(
                f"no convergence at load fraction {lam_next:.4f} even with step "
                f"{lam_next - lam:.2e} (residual {rn:.3e} N, tol {tol:.1e} N, "
                f"{max_iters} iterations per step)",
                residual_norm=rn,
                increment=steps_used + 1,
            )
        pending.insert(0, 0.5 * (lam + lam_next))

    st = _corot_state(mesh, u)
    f = _forces_from_state(mesh, st)
    reactions = []
    for bc in bcs:
        base = 3 * bc.node_index
        moment = float(f[base + 2] - R[base + 2]) if bc.rotation_constrained else None
        # unconstrained components carry no constraint force
        fx = float(f[base] - R[base]) if bc.prescribed_ux is not None else 0.0
        fy = float(f[base + 1] - R[base + 1]) if bc.prescribed_uy is not None else 0.0
        reactions.append(Reaction(node_index=bc.node_index, fx=fx, fy=fy, moment=moment))

    uu = u.reshape(mesh.n_nodes, 3)
    deformed = np.column_stack([mesh.rest_xy + uu[:, :2], uu[:, 2]])
    resultants = _resultants_from_state(st)
    return SolveResult(
        deformed_nodes=deformed,
        reactions=reactions,
        element_resultants=resultants,
        converged=True,
        increments_used=steps_used,
        residual_norm=rn,
    )


def _resultants_from_state(st: _CorotState) -> ElementResultants:
    # Internal section moments: -M1 at the first node, +M2 at the second;
    # shear from the moment gradient over the element.
    return ElementResultants(
        axial=st.N.copy(),
        shear=(st.M1 + st.M2) / st.Ln,
        end_moments=np.column_stack([-st.M1, st.M2]),
    )


def recover_resultants(
    result: SolveResult,
    mesh: BeamMesh,
    radius: float | None = None,
    second_moment: float | None = None,
) -> ElementResultants:
    """Per-element axial force, shear force and end bending moments.

    When both ``radius`` (outer fiber distance, mm) and ``second_moment``
    (mm^4) are given, the outer-fiber bending stress M*c/I is attached
    for every element, covering the whole beam for contour export.
    Supplying only one of the two raises InsufficientSectionDataError:
    the rigidity EI alone does not determine the stress.
    """
    if not result.converged:
        raise ValueError("resultants require a converged result")
    uu = np.empty((mesh.n_nodes, 3))
    uu[:, :2] = result.deformed_nodes[:, :2] - mesh.rest_xy
    uu[:, 2] = result.deformed_nodes[:, 2]
    st = _corot_state(mesh, uu.ravel())
    res = _resultants_from_state(st)
    if (radius is None) != (second_moment is None):
        raise InsufficientSectionDataError(
            "insufficient section data: outer-fiber stress needs both radius and second_moment"
        )
    if radius is not None and second_moment is not None:
        if radius <= 0 or second_moment <= 0:
            raise ValueError("radius and second_moment must be positive")
        res.stress = np.max(np.abs(res.end_moments), axis=1) * radius / second_moment
    return res


# ---------------------------------------------------------------------------
# mesh builders


def snapped_node_arcs(length: float, n_elements: int, snap_arcs: Sequence[float] = ()) -> np.ndarray:
    """Uniform node arc positions with nodes snapped onto given arcs.

    Snapping moves the nearest interior (or tip) node onto each requested
    arc so that constraints there are nodal. The base node never moves.
    """
    if not (length > 0):
        raise ValueError("length must be positive")
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    arcs = np.linspace(0.0, length, n_elements + 1)
    used: set[int] = set()
    for s in sorted(float(s) for s in snap_arcs):
        if not (0.0 < s <= length):
            raise ValueError(f"snap arc {s} outside (0, {length}]")
        i = int(np.clip(np.argmin(np.abs(arcs - s)), 1, n_elements))
        while i in used and i < n_elements:
            i += 1
        if i in used:
            raise ValueError("snap arcs too close together for this element count")
        arcs[i] = s
        used.add(i)
    if np.any(np.diff(arcs) <= 0):
        raise ValueError("snap arcs too close together for this element count")
    return arcs


def _resolve_rigidities(
    ei: np.ndarray,
    total_length: float,
    radius: float | None,
    kappa: float,
    nu: float,
    axial_rigidity: float | None,
    shear_rigidity: float | None,
) -> tuple[np.ndarray, np.ndarray]:
    if radius is not None:
        if radius <= 0:
            raise ValueError("radius must be positive")
        second_moment = math.pi * radius**4 / 4.0
        area = math.pi * radius**2
        e_mod = ei / second_moment
        ea = e_mod * area
        kga = kappa * e_mod / (2.0 * (1.0 + nu)) * area
        return ea, kga
    ea_val = (
        float(axial_rigidity)
        if axial_rigidity is not None
        else AXIAL_RIGIDITY_FACTOR * float(np.max(ei)) / total_length**2
    )
    kga_val = (
        float(shear_rigidity)
        if shear_rigidity is not None
        else kappa * ea_val / (2.0 * (1.0 + nu))
    )
    return np.full_like(ei, ea_val), np.full_like(ei, kga_val)


def centerline_mesh(
    rest_xy: np.ndarray,
    ei_elements,
    radius: float | None = None,
    kappa: float = DEFAULT_KAPPA,
    nu: float = DEFAULT_NU,
    axial_rigidity: float | None = None,
    shear_rigidity: float | None = None,
) -> BeamMesh:
    """Mesh along an arbitrary rest centerline polyline.

    ei_elements is a scalar or an (n_elements,) array of flexural
    rigidities. When ``radius`` is given the axial and shear rigidities
    follow from the solid circular section (G = E / 2(1 + nu)); otherwise
    a near-inextensible default EA = 1e4 * max(EI) / L^2 is used, with
    kGA = kappa * EA / 2(1 + nu), both overridable.
    """
    rest_xy = np.asarray(rest_xy, dtype=float)
    n_el = len(rest_xy) - 1
    ei = np.broadcast_to(np.asarray(ei_elements, dtype=float), (n_el,)).copy()
    if np.any(ei <= 0):
        raise ValueError("all element EI values must be positive")
    total = float(np.sum(np.linalg.norm(np.diff(rest_xy, axis=0), axis=1)))
    ea, kga = _resolve_rigidities(ei, total, radius, kappa, nu, axial_rigidity, shear_rigidity)
    sections = [
        SectionProperties(EI=float(ei[i]), EA=float(ea[i]), kGA=float(kga[i]), kappa=kappa)
        for i in range(n_el)
    ]
    return BeamMesh(rest_xy=rest_xy, sections=sections)


def straight_wire_mesh(
    node_arcs: np.ndarray,
    ei_elements,
    radius: float | None = None,
    kappa: float = DEFAULT_KAPPA,
    nu: float = DEFAULT_NU,
    axial_rigidity: float | None = None,
    shear_rigidity: float | None = None,
) -> BeamMesh:
    """Straight rest-shape mesh along +x with nodes at the given arcs."""
    node_arcs = np.asarray(node_arcs, dtype=float)
    rest_xy = np.column_stack([node_arcs, np.zeros_like(node_arcs)])
    return centerline_mesh(
        rest_xy,
        ei_elements,
        radius=radius,
        kappa=kappa,
        nu=nu,
        axial_rigidity=axial_rigidity,
        shear_rigidity=shear_rigidity,
    )


def dump_solution_csv(path, mesh: BeamMesh, result: SolveResult) -> None:
    """Debug dump of the solved state: one row per node."""
    constrained = {r.node_index: r for r in result.reactions}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x_mm", "y_mm", "phi_rad", "reaction_fx_N", "reaction_fy_N", "reaction_m_Nmm"])
        for i in range(mesh.n_nodes):
            x, y, phi = result.deformed_nodes[i]
            r = constrained.get(i)
            if r is None:
                w.writerow([i, f"{x:.9g}", f"{y:.9g}", f"{phi:.9g}", "", "", ""])
            else:
                m = "" if r.moment is None else f"{r.moment:.9g}"
                w.writerow([i, f"{x:.9g}", f"{y:.9g}", f"{phi:.9g}", f"{r.fx:.9g}", f"{r.fy:.9g}", m])
