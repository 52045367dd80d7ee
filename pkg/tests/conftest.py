import os

import numpy as np
import pytest

from hdys.datahub import DatasetManifest, default_profiles, generate_dataset, load_manifest
from hdys.rbd import KinematicTree, Link


def random_chain(rng: np.random.Generator, n_links: int, spherical_ok: bool = True) -> KinematicTree:
    """Random fixed-base chain with valid inertial data."""
    links = []
    for i in range(n_links):
        jt = rng.choice(["revolute", "spherical"]) if spherical_ok else "revolute"
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        a = rng.normal(size=(3, 3)) * 0.1
        inertia = a @ a.T + np.eye(3) * 0.05
        links.append(
            Link(
                f"link{i}",
                i - 1,
                jt,
                tuple(axis) if jt == "revolute" else None,
                tuple(rng.uniform(-0.3, 0.3, 3)),
                float(rng.uniform(0.5, 4.0)),
                tuple(rng.uniform(-0.2, 0.2, 3)),
                inertia,
            )
        )
    sites = [(int(rng.integers(0, n_links)), tuple(rng.uniform(-0.2, 0.2, 3))) for _ in range(8)]
    return KinematicTree(links, marker_sites=sites)


def make_pendulum(m: float = 2.0, lc: float = 1.0, iy: float = 0.04) -> KinematicTree:
    """Revolute about y, hanging along -z at q=0; analytic torque m*g*lc*sin(q)."""
    return KinematicTree(
        [Link("p", -1, "revolute", (0, 1, 0), (0, 0, 0), m, (0, 0, -lc), np.diag([0.04, iy, 0.04]))],
        marker_sites=[(0, (0.05, 0.0, -0.5)), (0, (-0.05, 0.02, -0.9))],
    )


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Five-profile dataset at reduced size, generated once per session."""
    root = str(tmp_path_factory.mktemp("data-small"))
    manifest = DatasetManifest(seed=0, profiles=default_profiles(n_train=8, n_test=3))
    generate_dataset(root, manifest)
    return root, load_manifest(root)


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory):
    """Full desk-scale dataset; reuses a prebuilt copy when HDYS_DATA_DIR points at one."""
    env = os.environ.get("HDYS_DATA_DIR")
    if env and os.path.exists(os.path.join(env, "manifest.json")):
        return env, load_manifest(env)
    root = str(tmp_path_factory.mktemp("data-desk"))
    manifest = DatasetManifest(seed=0, profiles=default_profiles())
    generate_dataset(root, manifest)
    return root, load_manifest(root)
