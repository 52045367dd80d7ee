"""Inverse and forward dynamics on kinematic trees.

Recursive Newton-Euler runs batched over frames (spatial vectors kept as
separate angular/linear 3-vector arrays); the mass matrix comes from the
composite-rigid-body recursion, and forward dynamics solves
M(q) qdd = tau - bias with a Cholesky factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .tree import KinematicTree, TreeError


class DynamicsError(Exception):
    pass


class DivergedRollout(DynamicsError):
    pass


@dataclass
class GeneralizedState:
    """One (q, qd, qdd) sample, or a whole trajectory when arrays are 2-D."""

    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64)
        self.qd = np.asarray(self.qd, dtype=np.float64)
        self.qdd = np.asarray(self.qdd, dtype=np.float64)
        if not (self.q.shape == self.qd.shape == self.qdd.shape):
            raise DynamicsError("q/qd/qdd shapes differ")
        for a in (self.q, self.qd, self.qdd):
            if not np.isfinite(a).all():
                raise DynamicsError("non-finite generalized state")


@dataclass(frozen=True)
class ExternalForce:
    link: int
    point: tuple[float, float, float]  # application point, link frame
    force: tuple[float, float, float]  # world frame, N
    torque: tuple[float, float, float] = (0.0, 0.0, 0.0)  # world frame, N*m


def _ext_body_wrench(tree: KinematicTree, ext, r_world, p_world, f):
    """Per-internal-body spatial force (n, f) in body coordinates."""
    nb = len(tree._bodies)
    wrench_n = np.zeros((f, nb, 3))
    wrench_f = np.zeros((f, nb, 3))
    for e in ext:
        if not (0 <= e.link < tree.n_links):
            raise DynamicsError(f"external force on unknown link {e.link}")
        bi = tree._link_body[e.link]
        rw = r_world[:, bi]
        fw = np.asarray(e.force, dtype=np.float64)
        tw = np.asarray(e.torque, dtype=np.float64)
        pt = np.asarray(e.point, dtype=np.float64)
        if not (np.isfinite(fw).all() and np.isfinite(tw).all() and np.isfinite(pt).all()):
            raise DynamicsError("non-finite external force")
        f_l = np.einsum("fij,j->fi", rw.transpose(0, 2, 1), fw)
        t_l = np.einsum("fij,j->fi", rw.transpose(0, 2, 1), tw)
        wrench_f[:, bi] += f_l
        wrench_n[:, bi] += np.cross(np.broadcast_to(pt, f_l.shape), f_l) + t_l
    return wrench_n, wrench_f


def rnea(
    tree: KinematicTree,
    state: GeneralizedState,
    ext: list[ExternalForce] | None = None,
    gravity: np.ndarray | None = None,
) -> np.ndarray:
    """Generalized forces required to realize (q, qd, qdd) under `ext`.

    Accepts a single state or a trajectory of shape (F, n_dof); output
    matches. For a free-root tree the first six entries are the residual
    root wrench, which is not an actuation label.
    """
    q, qd, qdd = state.q, state.qd, state.qdd
    single = q.ndim == 1
    if single:
        q, qd, qdd = q[None], qd[None], qdd[None]
    if q.shape[1] != tree.n_dof:
        raise TreeError(f"state has {q.shape[1]} coordinates, tree has {tree.n_dof} DoF")
    f = q.shape[0]
    g = tree.gravity if gravity is None else np.asarray(gravity, dtype=np.float64)
    bodies = tree._bodies
    nb = len(bodies)

    r_world, p_world = tree.body_poses(q)
    if ext:
        ext_n, ext_f = _ext_body_wrench(tree, ext, r_world, p_world, f)
    else:
        ext_n = ext_f = None

    w = np.zeros((f, nb, 3))  # angular velocity, body coords
    v = np.zeros((f, nb, 3))  # linear velocity of body origin
    al = np.zeros((f, nb, 3))  # angular acceleration (spatial)
    aa = np.zeros((f, nb, 3))  # linear acceleration (spatial)
    fn = np.zeros((f, nb, 3))  # net moment at body origin
    ff = np.zeros((f, nb, 3))  # net force

    a_base = np.broadcast_to(-g, (f, 3))

    for bi, b in enumerate(bodies):
        qi, qdi, qddi = q[:, b.dof], qd[:, b.dof], qdd[:, b.dof]
        if b.kind == "rev":
            from .tree import _rot_axis

            r_pc = b.r_fix @ _rot_axis(b.axis, qi)
            p_pc = np.broadcast_to(b.p_fix, (f, 3))
        else:
            r_pc = np.broadcast_to(b.r_fix, (f, 3, 3))
            p_pc = b.p_fix + (b.r_fix @ b.axis) * qi[:, None]
        e = r_pc.transpose(0, 2, 1)  # parent -> child
        if b.parent == -1:
            wp = vp = np.zeros((f, 3))
            alp = np.zeros((f, 3))
            aap = a_base
        else:
            wp, vp = w[:, b.parent], v[:, b.parent]
            alp, aap = al[:, b.parent], aa[:, b.parent]
        wi = np.einsum("fij,fj->fi", e, wp)
        vi = np.einsum("fij,fj->fi", e, vp + np.cross(wp, p_pc))
        ali = np.einsum("fij,fj->fi", e, alp)
        aai = np.einsum("fij,fj->fi", e, aap + np.cross(alp, p_pc))
        sj = b.axis[None, :] * qdi[:, None]
        if b.kind == "rev":
            wi = wi + sj
            ali = ali + b.axis[None, :] * qddi[:, None] + np.cross(wi, sj)
            aai = aai + np.cross(vi, sj)
        else:
            vi = vi + sj
            ali = ali
            aai = aai + b.axis[None, :] * qddi[:, None] + np.cross(wi, sj)
        w[:, bi], v[:, bi], al[:, bi], aa[:, bi] = wi, vi, ali, aai

        if b.mass == 0.0:
            ni = np.zeros((f, 3))
            fi = np.zeros((f, 3))
        else:
            m, c, ic = b.mass, b.com, b.inertia
            # spatial inertia applied to velocity: momentum (h_n, h_f)
            h_n = np.einsum("ij,fj->fi", ic, wi) - m * np.cross(c, np.cross(c, wi)) + m * np.cross(c, vi)
            h_f = m * (vi + np.cross(wi, c))
            i_al = np.einsum("ij,fj->fi", ic, ali) - m * np.cross(c, np.cross(c, ali)) + m * np.cross(c, aai)
            i_aa = m * (aai + np.cross(ali, c))
            ni = i_al + np.cross(wi, h_n) + np.cross(vi, h_f)
            fi = i_aa + np.cross(wi, h_f)
        if ext_n is not None:
            ni = ni - ext_n[:, bi]
            fi = fi - ext_f[:, bi]
        fn[:, bi], ff[:, bi] = ni, fi

    tau = np.zeros((f, tree.n_dof))
    for bi in range(nb - 1, -1, -1):
        b = bodies[bi]
        if b.kind == "rev":
            tau[:, b.dof] = np.einsum("fi,i->f", fn[:, bi], b.axis)
        else:
            tau[:, b.dof] = np.einsum("fi,i->f", ff[:, bi], b.axis)
        if b.parent != -1:
            qi = q[:, b.dof]
            if b.kind == "rev":
                from .tree import _rot_axis

                r_pc = b.r_fix @ _rot_axis(b.axis, qi)
                p_pc = np.broadcast_to(b.p_fix, (f, 3))
            else:
                r_pc = np.broadcast_to(b.r_fix, (f, 3, 3))
                p_pc = b.p_fix + (b.r_fix @ b.axis) * qi[:, None]
            f_par = np.einsum("fij,fj->fi", r_pc, ff[:, bi])
            n_par = np.einsum("fij,fj->fi", r_pc, fn[:, bi]) + np.cross(p_pc, f_par)
            fn[:, b.parent] += n_par
            ff[:, b.parent] += f_par
    return tau[0] if single else tau


def _spatial_inertia(b) -> np.ndarray:
    m, c, ic = b.mass, b.com, b.inertia
    cx = np.array([[0, -c[2], c[1]], [c[2], 0, -c[0]], [-c[1], c[0], 0]])
    out = np.zeros((6, 6))
    out[:3, :3] = ic - m * (cx @ cx)
    out[:3, 3:] = m * cx
    out[3:, :3] = -m * cx
    out[3:, 3:] = m * np.eye(3)
    return out


def _spatial_x(e: np.ndarray, r: np.ndarray) -> np.ndarray:
    """6x6 motion transform parent->child from E (parent->child) and r."""
    rx = np.array([[0, -r[2], r[1]], [r[2], 0, -r[0]], [-r[1], r[0], 0]])
    x = np.zeros((6, 6))
    x[:3, :3] = e
    x[3:, 3:] = e
    x[3:, :3] = -e @ rx
    return x


def mass_matrix(tree: KinematicTree, q: np.ndarray) -> np.ndarray:
    """Composite-rigid-body generalized inertia at configuration q."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != tree.n_dof:
        raise TreeError(f"q must be ({tree.n_dof},)")
    if not np.isfinite(q).all():
        raise DynamicsError("non-finite configuration")
    from .tree import _rot_axis

    bodies = tree._bodies
    nb = len(bodies)
    xs = []
    ss = []
    for b in bodies:
        if b.kind == "rev":
            r_pc = b.r_fix @ _rot_axis(b.axis, np.asarray(q[b.dof]))
            p_pc = b.p_fix
            s = np.concatenate([b.axis, np.zeros(3)])
        else:
            r_pc = b.r_fix
            p_pc = b.p_fix + (b.r_fix @ b.axis) * q[b.dof]
            s = np.concatenate([np.zeros(3), b.axis])
        xs.append(_spatial_x(r_pc.T, p_pc))
        ss.append(s)
    comp = [_spatial_inertia(b) for b in bodies]
    for bi in range(nb - 1, -1, -1):
        b = bodies[bi]
        if b.parent != -1:
            comp[b.parent] = comp[b.parent] + xs[bi].T @ comp[bi] @ xs[bi]
    m = np.zeros((tree.n_dof, tree.n_dof))
    for bi, b in enumerate(bodies):
        fvec = comp[bi] @ ss[bi]
        m[b.dof, b.dof] = ss[bi] @ fvec
        j = bi
        while bodies[j].parent != -1:
            fvec = xs[j].T @ fvec
            j = bodies[j].parent
            m[b.dof, bodies[j].dof] = ss[j] @ fvec
            m[bodies[j].dof, b.dof] = m[b.dof, bodies[j].dof]
    return m


def forward_dynamics(
    tree: KinematicTree,
    q: np.ndarray,
    qd: np.ndarray,
    tau: np.ndarray,
    ext: list[ExternalForce] | None = None,
) -> np.ndarray:
    """Accelerations produced by tau at (q, qd): solves the inverse relation."""
    q = np.asarray(q, dtype=np.float64)
    qd = np.asarray(qd, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    bias = rnea(tree, GeneralizedState(q, qd, np.zeros_like(q)), ext)
    m = mass_matrix(tree, q)
    try:
        factor = cho_factor(m, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - SPD by construction
        raise DynamicsError(f"mass matrix not positive definite: {exc}")
    return cho_solve(factor, tau - bias)


def step(
    tree: KinematicTree,
    q: np.ndarray,
    qd: np.ndarray,
    tau: np.ndarray,
    ext: list[ExternalForce] | None = None,
    dt: float = 1.0 / 90.0,
) -> tuple[np.ndarray, np.ndarray]:
    """One semi-implicit Euler step: velocity first, then position."""
    if dt <= 0:
        raise DynamicsError("dt must be positive")
    qdd = forward_dynamics(tree, q, qd, tau, ext)
    qd_next = qd + dt * qdd
    q_next = q + dt * qd_next
    if not (np.isfinite(q_next).all() and np.isfinite(qd_next).all()):
        raise DivergedRollout("integration step produced non-finite state")
    return q_next, qd_next


def total_energy(tree: KinematicTree, q: np.ndarray, qd: np.ndarray) -> float:
    """Kinetic plus gravitational potential energy (world z up the -gravity axis)."""
    m = mass_matrix(tree, q)
    kin = 0.5 * float(qd @ m @ qd)
    r, p = tree.body_poses(q[None, :])
    pot = 0.0
    for bi, b in enumerate(tree._bodies):
        if b.mass == 0.0:
            continue
        com_w = p[0, bi] + r[0, bi] @ b.com
        pot -= b.mass * float(tree.gravity @ com_w)
    return kin + pot
