"""Deterministic CSV/JSON artifact writing with atomic replacement."""

from __future__ import annotations

import hashlib
import json
import os


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns: list[str], rows: list[dict]) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c, "")) for c in columns) + "\n")
    os.replace(tmp, path)


def write_json(path, payload: dict) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def provenance(out_dir, config_hash: str, dataset_manifest_path: str, seeds: list[int], extra: dict | None = None) -> None:
    payload = {
        "config_hash": config_hash,
        "dataset_hash": file_sha256(dataset_manifest_path),
        "seeds": list(seeds),
    }
    if extra:
        payload.update(extra)
    write_json(os.path.join(out_dir, "provenance.json"), payload)
