"""Versioned JSON description of a kinematic tree ("rbd-tree/1")."""

from __future__ import annotations

import json

import numpy as np

from .muscle import MuscleSet
from .tree import KinematicTree, Link, TreeError

SCHEMA = "rbd-tree/1"


def tree_to_dict(tree: KinematicTree, muscles: MuscleSet | None = None) -> dict:
    doc = {
        "schema": SCHEMA,
        "name": tree.name,
        "gravity": tree.gravity.tolist(),
        "links": [
            {
                "name": l.name,
                "parent": l.parent,
                "joint": l.joint,
                "axis": list(l.axis) if l.axis is not None else None,
                "offset": list(l.offset),
                "mass": l.mass,
                "com": list(l.com),
                "inertia": np.asarray(l.inertia).tolist(),
            }
            for l in tree.links
        ],
        "markers": [{"link": li, "offset": off.tolist()} for li, off in tree.marker_sites],
        "subject_mass": tree.subject_mass,
    }
    if muscles is not None:
        doc["muscles"] = {
            "names": list(muscles.names),
            "moment_arms": muscles.moment_arms.tolist(),
            "f_max": muscles.f_max.tolist(),
        }
    return doc


def tree_from_dict(doc: dict) -> tuple[KinematicTree, MuscleSet | None]:
    if doc.get("schema") != SCHEMA:
        raise TreeError(f"unsupported tree schema: {doc.get('schema')!r}")
    links = [
        Link(
            d["name"],
            int(d["parent"]),
            d["joint"],
            tuple(d["axis"]) if d.get("axis") is not None else None,
            tuple(d["offset"]),
            float(d["mass"]),
            tuple(d["com"]),
            np.asarray(d["inertia"], dtype=np.float64),
        )
        for d in doc["links"]
    ]
    tree = KinematicTree(
        links,
        gravity=doc.get("gravity", (0.0, 0.0, -9.81)),
        marker_sites=[(m["link"], tuple(m["offset"])) for m in doc.get("markers", [])],
        name=doc.get("name", "tree"),
    )
    declared = doc.get("subject_mass")
    if declared is not None and abs(declared - tree.subject_mass) > 1e-9:
        raise TreeError("declared subject mass does not match the sum of link masses")
    muscles = None
    if "muscles" in doc:
        m = doc["muscles"]
        muscles = MuscleSet(
            tuple(m["names"]),
            np.asarray(m["moment_arms"], dtype=np.float64),
            np.asarray(m["f_max"], dtype=np.float64),
        )
    return tree, muscles


def save_tree(path, tree: KinematicTree, muscles: MuscleSet | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(tree_to_dict(tree, muscles), fh, indent=1)


def load_tree(path) -> tuple[KinematicTree, MuscleSet | None]:
    with open(path) as fh:
        return tree_from_dict(json.load(fh))
