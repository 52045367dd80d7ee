"""The comparative run grid: profile contribution, loss/branch ablations,
latent sizes and data-scale variants, all on shared seeds, shared test
splits and an equal per-epoch sample budget.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from ..datahub import DatasetManifest, fifty_fifty, restrict_profiles, single_profile_50
from ..model import HDySConfig
from .evaluate import evaluate
from .report import write_csv
from .train import RecordCache, TrainError, train

CSV_COLUMNS = [
    "run", "seed", "profile", "dyn_channel", "representation",
    "mpje", "rmse", "pcc", "headline", "param_count", "train_seconds",
]


@dataclass
class RunSpec:
    name: str
    manifest: DatasetManifest
    cfg: HDySConfig
    eval_profiles: list[str]


@dataclass
class AblationResult:
    rows: list[dict] = field(default_factory=list)
    csv_path: str = ""


def _with_quota(cfg: HDySConfig, base_profiles: int, run_profiles: int) -> HDySConfig:
    # equal seen samples per epoch across dataset mixes
    quota = max(1, round(cfg.train.quota * base_profiles / run_profiles))
    return replace(cfg, train=replace(cfg.train, quota=quota))


def grid(base_cfg: HDySConfig, manifest: DatasetManifest, target: str = "A") -> list[RunSpec]:
    """The 20-run comparison: full, per-profile-only, drop-one, loss/branch
    flags, three latent sizes and the three data-scale variants."""
    pids = [p.profile_id for p in manifest.profiles]
    n = len(pids)
    runs: list[RunSpec] = [RunSpec("full", manifest, base_cfg, pids)]
    for pid in pids:
        sub = restrict_profiles(manifest, [pid])
        runs.append(RunSpec(f"only-{pid}", sub, _with_quota(base_cfg, n, 1), [pid]))
    for pid in pids:
        keep = [p for p in pids if p != pid]
        sub = restrict_profiles(manifest, keep)
        runs.append(RunSpec(f"drop-{pid}", sub, _with_quota(base_cfg, n, n - 1), keep))
    for flag in ("no_align", "no_fdae", "no_temporal_refinement"):
        cfg = replace(base_cfg, model=replace(base_cfg.model, **{flag: True}))
        runs.append(RunSpec(flag.replace("_", "-"), manifest, cfg, pids))
    for dim in (32, 64, 128):
        cfg = replace(base_cfg, model=replace(base_cfg.model, latent_dim=dim))
        runs.append(RunSpec(f"dim-{dim}", manifest, cfg, pids))
    runs.append(
        RunSpec(f"single50-{target}", single_profile_50(manifest, target),
                _with_quota(base_cfg, n, 1), [target])
    )
    ff = fifty_fifty(manifest, target)
    runs.append(RunSpec(f"5050-{target}", ff, _with_quota(base_cfg, n, len(ff.profiles)), [target]))
    runs.append(
        RunSpec(f"single-{target}", restrict_profiles(manifest, [target]),
                _with_quota(base_cfg, n, 1), [target])
    )
    return runs


def run_one(spec: RunSpec, root: str, out_dir: str, seed: int) -> list[dict]:
    cache = RecordCache.load(root, spec.manifest)
    result = train(spec.cfg, cache, out_dir, seed=seed)
    report = evaluate(result.model, result.stdizer, spec.cfg, cache, profiles=spec.eval_profiles)
    rows = []
    for r in report.rows:
        rows.append(
            {
                "run": spec.name,
                "seed": seed,
                "profile": r.profile,
                "dyn_channel": r.dyn_channel,
                "representation": r.representation,
                "mpje": r.mpje,
                "rmse": r.rmse,
                "pcc": r.pcc,
                "headline": r.headline,
                "param_count": result.param_count,
                "train_seconds": round(result.seconds, 2),
            }
        )
    return rows


def ablation_suite(
    base_cfg: HDySConfig,
    root: str,
    manifest: DatasetManifest,
    out_dir: str,
    seeds=(0,),
    target: str = "A",
    log=None,
) -> AblationResult:
    os.makedirs(out_dir, exist_ok=True)
    result = AblationResult()
    runs = grid(base_cfg, manifest, target=target)
    for spec in runs:
        for seed in seeds:
            run_dir = os.path.join(out_dir, f"{spec.name}-s{seed}")
            if log:
                log(f"[ablation] {spec.name} seed {seed}")
            try:
                result.rows.extend(run_one(spec, root, run_dir, seed))
            except TrainError as exc:
                raise TrainError(f"run {spec.name} seed {seed}: {exc}") from exc
    csv_path = os.path.join(out_dir, "ablation.csv")
    write_csv(csv_path, CSV_COLUMNS, result.rows)
    result.csv_path = csv_path
    return result
