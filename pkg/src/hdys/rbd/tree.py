"""Articulated kinematic trees and batched forward kinematics.

Joint types: `revolute` (1 DoF about a fixed axis), `spherical` (3 DoF,
decomposed internally into three orthogonal revolutes with intrinsic x-y-z
angles, so every coordinate stays a scalar angle), and `free` (6 DoF root:
x/y/z translation then x/y/z rotation). Public links stay as declared; the
decomposition only introduces massless internal bodies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

JOINT_DOF = {"revolute": 1, "spherical": 3, "free": 6}

_EYE3 = np.eye(3)
_AX = np.array([1.0, 0.0, 0.0])
_AY = np.array([0.0, 1.0, 0.0])
_AZ = np.array([0.0, 0.0, 1.0])


class TreeError(Exception):
    pass


@dataclass(frozen=True)
class Link:
    name: str
    parent: int  # -1 attaches to the world
    joint: str
    axis: Optional[tuple[float, float, float]]  # revolute only
    offset: tuple[float, float, float]  # joint origin in parent frame
    mass: float
    com: tuple[float, float, float]  # in link frame
    inertia: tuple  # 3x3 about the COM, link frame


@dataclass(frozen=True)
class _Body:
    """One internal 1-DoF body (revolute or prismatic)."""

    parent: int  # internal body index, -1 for world
    kind: str  # "rev" | "prism"
    axis: np.ndarray
    r_fix: np.ndarray  # 3x3
    p_fix: np.ndarray  # 3
    mass: float
    com: np.ndarray
    inertia: np.ndarray  # 3x3 about COM
    dof: int
    link: int  # owning public link


def _rot_axis(axis: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Rodrigues rotation, batched over leading axes of q."""
    q = np.asarray(q, dtype=np.float64)
    c = np.cos(q)[..., None, None]
    s = np.sin(q)[..., None, None]
    k = np.zeros((3, 3))
    k[0, 1], k[0, 2] = -axis[2], axis[1]
    k[1, 0], k[1, 2] = axis[2], -axis[0]
    k[2, 0], k[2, 1] = -axis[1], axis[0]
    return _EYE3 + s * k + (1.0 - c) * (k @ k)


class KinematicTree:
    """Immutable articulated chain with inertial data and marker sites."""

    def __init__(
        self,
        links: Sequence[Link],
        gravity=(0.0, 0.0, -9.81),
        marker_sites: Sequence[tuple[int, tuple[float, float, float]]] = (),
        name: str = "tree",
    ):
        self.links = list(links)
        self.gravity = np.asarray(gravity, dtype=np.float64)
        self.marker_sites = [(int(i), np.asarray(off, dtype=np.float64)) for i, off in marker_sites]
        self.name = name
        self._validate()
        self._build()

    # -- validation ---------------------------------------------------------

    def _validate(self) -> None:
        if not self.links:
            raise TreeError("tree has no links")
        roots = [i for i, l in enumerate(self.links) if l.parent == -1]
        if len(roots) != 1 or roots[0] != 0:
            raise TreeError("tree must have exactly one root at index 0")
        for i, l in enumerate(self.links):
            if l.joint not in JOINT_DOF:
                raise TreeError(f"link {i}: unknown joint type '{l.joint}'")
            if l.joint == "free" and i != 0:
                raise TreeError(f"link {i}: free joint only allowed at the root")
            if not (-1 <= l.parent < i):
                raise TreeError(f"link {i}: parent {l.parent} is not topologically sorted")
            if l.mass <= 0:
                raise TreeError(f"link {i}: mass must be positive")
            inertia = np.asarray(l.inertia, dtype=np.float64)
            if inertia.shape != (3, 3) or np.abs(inertia - inertia.T).max() > 1e-12:
                raise TreeError(f"link {i}: inertia must be symmetric 3x3")
            if np.linalg.eigvalsh(inertia).min() <= 0:
                raise TreeError(f"link {i}: inertia must be positive definite")
            if l.joint == "revolute":
                a = np.asarray(l.axis, dtype=np.float64)
                if abs(np.linalg.norm(a) - 1.0) > 1e-9:
                    raise TreeError(f"link {i}: revolute axis must be a unit vector")
        for li, off in self.marker_sites:
            if not (0 <= li < len(self.links)):
                raise TreeError(f"marker site on unknown link {li}")

    # -- internal 1-DoF decomposition ---------------------------------------

    def _build(self) -> None:
        bodies: list[_Body] = []
        link_body: list[int] = []
        dof = 0
        zero3 = np.zeros(3)
        zero33 = np.zeros((3, 3))
        for li, l in enumerate(self.links):
            parent_body = -1 if l.parent == -1 else link_body[l.parent]
            r_fix = _EYE3
            p_fix = np.asarray(l.offset, dtype=np.float64)
            mass = float(l.mass)
            com = np.asarray(l.com, dtype=np.float64)
            inertia = np.asarray(l.inertia, dtype=np.float64)
            if l.joint == "revolute":
                axis = np.asarray(l.axis, dtype=np.float64)
                bodies.append(_Body(parent_body, "rev", axis, r_fix, p_fix, mass, com, inertia, dof, li))
                dof += 1
            elif l.joint == "spherical":
                for j, ax in enumerate((_AX, _AY, _AZ)):
                    last = j == 2
                    bodies.append(
                        _Body(
                            parent_body if j == 0 else len(bodies) - 1,
                            "rev",
                            ax,
                            r_fix if j == 0 else _EYE3,
                            p_fix if j == 0 else zero3,
                            mass if last else 0.0,
                            com if last else zero3,
                            inertia if last else zero33,
                            dof + j,
                            li,
                        )
                    )
                dof += 3
            else:  # free
                for j, ax in enumerate((_AX, _AY, _AZ)):
                    bodies.append(
                        _Body(
                            parent_body if j == 0 else len(bodies) - 1,
                            "prism",
                            ax,
                            r_fix if j == 0 else _EYE3,
                            p_fix if j == 0 else zero3,
                            0.0,
                            zero3,
                            zero33,
                            dof + j,
                            li,
                        )
                    )
                for j, ax in enumerate((_AX, _AY, _AZ)):
                    last = j == 2
                    bodies.append(
                        _Body(
                            len(bodies) - 1,
                            "rev",
                            ax,
                            _EYE3,
                            zero3,
                            mass if last else 0.0,
                            com if last else zero3,
                            inertia if last else zero33,
                            dof + 3 + j,
                            li,
                        )
                    )
                dof += 6
            link_body.append(len(bodies) - 1)
        self._bodies = bodies
        self._link_body = link_body
        self.n_dof = dof
        self.root_dof = 6 if self.links[0].joint == "free" else 0
        self.n_actuated = self.n_dof - self.root_dof
        self.subject_mass = float(sum(l.mass for l in self.links))

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_markers(self) -> int:
        return len(self.marker_sites)

    # -- kinematics ---------------------------------------------------------

    def body_poses(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """World poses of every internal body; q is (n_dof,) or (F, n_dof).

        Returns (R, p) with shapes (F, n_bodies, 3, 3) and (F, n_bodies, 3).
        """
        q = np.asarray(q, dtype=np.float64)
        single = q.ndim == 1
        if single:
            q = q[None, :]
        if q.shape[-1] != self.n_dof:
            raise TreeError(f"q has {q.shape[-1]} coordinates, tree has {self.n_dof} DoF")
        f = q.shape[0]
        nb = len(self._bodies)
        r = np.empty((f, nb, 3, 3))
        p = np.empty((f, nb, 3))
        for bi, b in enumerate(self._bodies):
            qi = q[:, b.dof]
            if b.kind == "rev":
                r_pc = b.r_fix @ _rot_axis(b.axis, qi)
                p_pc = np.broadcast_to(b.p_fix, (f, 3))
            else:
                r_pc = np.broadcast_to(b.r_fix, (f, 3, 3))
                p_pc = b.p_fix + (b.r_fix @ b.axis) * qi[:, None]
            if b.parent == -1:
                r[:, bi] = r_pc
                p[:, bi] = p_pc
            else:
                rp = r[:, b.parent]
                r[:, bi] = rp @ r_pc
                p[:, bi] = p[:, b.parent] + np.einsum("fij,fj->fi", rp, p_pc)
        return r, p

    def forward_kinematics(self, q: np.ndarray):
        """Per-link world transforms, marker positions and joint positions.

        Returns (link_R, link_p, markers, joints); leading frame axis is kept
        only when q is 2-D.
        """
        q = np.asarray(q, dtype=np.float64)
        single = q.ndim == 1
        r, p = self.body_poses(q[None, :] if single else q)
        idx = np.asarray(self._link_body)
        link_r = r[:, idx]
        link_p = p[:, idx]
        joints = link_p.copy()
        if self.marker_sites:
            site_link = np.asarray([self._link_body[li] for li, _ in self.marker_sites])
            offs = np.stack([off for _, off in self.marker_sites])
            markers = p[:, site_link] + np.einsum("fsij,sj->fsi", r[:, site_link], offs)
        else:
            markers = np.zeros((link_p.shape[0], 0, 3))
        if single:
            return link_r[0], link_p[0], markers[0], joints[0]
        return link_r, link_p, markers, joints
