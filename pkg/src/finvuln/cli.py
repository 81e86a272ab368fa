"""Pipeline orchestration as composable subcommands.

Stages read and write only their documented artifacts inside the stage
directory, every invocation writes a manifest, and all randomness flows
from the master seed through named substreams, so any stage can be
deleted and re-run in isolation with identical results.

Exit codes: 0 ok, 1 validation error, 2 missing upstream artifact,
3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
import traceback
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .audit import composition, correlation_matrix, default_proxy_features, measure_leakage
from .config import (
    ConfigError,
    PipelineConfig,
    apply_env_overrides,
    config_hash,
    load_config,
    write_config,
)
from .features import (
    FeatureTable,
    build_feature_vector,
    feature_dictionary,
    FEATURE_NAMES,
    read_features_csv,
)
from .ingest import (
    AccountHistory,
    GivenDemographics,
    IngestError,
    check_eligibility,
    filter_eligible,
    group_histories,
    history_from_transactions,
    iter_account_rows,
    parse_transactions,
    write_transactions_csv,
)
from .labels import (
    FVI_NAMES,
    PROTECTED_NAMES,
    LabelThresholds,
    build_label_table,
    build_protected_table,
    read_labels_csv,
    write_labels_csv,
    write_protected_csv,
)
from .learn.protocol import run_matrix, save_model
from .manifest import OutputDirLocked, RunManifest, StageRecord, file_digest, output_lock
from .rules import DEFAULT_RULES, load_rules, write_rules
from .seeding import derive_int
from .segment import fit_pca, kmeans, profile_clusters, select_k, silhouette_mean, tsne_embed
from .synthgen import SynthConfigError, default_personas, generate_to_files
from .taxonomy import DEFAULT_FLOW_CLASSES, load_flow_classes, write_flow_classes

STAGE_ORDER = ["synth", "ingest", "features", "label", "train", "cluster", "audit", "report"]


class MissingArtifactError(FileNotFoundError):
    def __init__(self, path: Path, stage: str):
        super().__init__(f"missing artifact {path.name}: run the {stage!r} stage first")
        self.stage = stage


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(path, producer)
    return path


def _write_csv(path: Path, header: List[str], rows: List[Sequence], comment: Optional[str] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: Path) -> Tuple[List[str], List[List[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


def _provenance(cfg: PipelineConfig) -> str:
    return f"config_hash={config_hash(cfg)} seed={cfg.seed}"


def _load_rules(cfg: PipelineConfig):
    return load_rules(cfg.rules_file) if cfg.rules_file else DEFAULT_RULES


def _load_flow(cfg: PipelineConfig):
    return load_flow_classes(cfg.taxonomy_file) if cfg.taxonomy_file else DEFAULT_FLOW_CLASSES


def _iter_clean_histories(cfg: PipelineConfig, stage_dir: Path, demographics=None):
    clean = _require(stage_dir / "transactions_clean.csv", "ingest")
    demographics = demographics or {}
    for account_id, txns, _rejections in iter_account_rows(clean):
        yield history_from_transactions(account_id, txns, demographics.get(account_id))


def _read_demographics(cfg: PipelineConfig, stage_dir: Path) -> Dict[str, GivenDemographics]:
    path = Path(cfg.demographics_file) if cfg.demographics_file else stage_dir / "ground_truth.csv"
    if not path.exists():
        return {}
    header, rows = _read_csv(path)
    idx = {name: i for i, name in enumerate(header)}
    if "account_id" not in idx:
        raise IngestError(f"{path}: demographics file needs an account_id column")
    out = {}
    for rec in rows:
        gender = rec[idx["gender"]] if "gender" in idx else None
        age = int(rec[idx["age"]]) if "age" in idx and rec[idx["age"]] else None
        out[rec[idx["account_id"]]] = GivenDemographics(gender=gender, age=age)
    return out


# ---------------------------------------------------------------------------
# Stages


def stage_synth(cfg: PipelineConfig, stage_dir: Path) -> StageRecord:
    synth_cfg = dataclasses.replace(cfg.synth, seed=cfg.seed)
    tx_path, gt_path = generate_to_files(synth_cfg, stage_dir, cfg.personas)
    return StageRecord(
        name="synth",
        inputs={},
        outputs={p.name: file_digest(p) for p in (tx_path, gt_path)},
        seed=cfg.seed,
    )


def stage_ingest(cfg: PipelineConfig, stage_dir: Path) -> StageRecord:
    if cfg.input_file:
        source = Path(cfg.input_file)
        if not source.exists():
            raise MissingArtifactError(source, "synth")
    else:
        source = _require(stage_dir / "transactions.csv", "synth")
    rules = _load_rules(cfg)  # validates the file early
    del rules
    clean_path = stage_dir / "transactions_clean.csv"
    elig_path = stage_dir / "eligibility.csv"
    rejects_path = stage_dir / "rejects.csv"
    windows_path = stage_dir / "windows.csv"

    elig_rows: List[Sequence] = []
    reject_rows: List[Sequence] = []
    window_rows: List[Sequence] = []
    try:
        with open(clean_path, "w", encoding="utf-8", newline="") as out:
            out.write("account_id,date,amount_pence,description,category,balance_pence\n")
            for account_id, txns, rejections in iter_account_rows(source):
                for r in rejections:
                    reject_rows.append([r.line, r.reason])
                history = history_from_transactions(account_id, txns)
                rec = check_eligibility(history, cfg.ingest.min_months, cfg.ingest.min_txns_per_month)
                elig_rows.append(
                    [rec.account_id, rec.span_months, rec.min_monthly_txns, int(rec.eligible), rec.reason]
                )
                if rec.eligible:
                    writer = csv.writer(out, lineterminator="\n")
                    for t in history.transactions():
                        writer.writerow(
                            [t.account_id, t.date.isoformat(), t.amount, t.description, t.category.value, t.balance_after]
                        )
                    window_rows.append([account_id, int(history.month_keys[-1]) // 3])
    except IngestError as exc:
        if "not contiguous" not in str(exc):
            raise
        # ungrouped input: fall back to a full in-memory parse
        txns, rejections = parse_transactions(source, fmt="csv")
        histories = group_histories(txns)
        kept, report = filter_eligible(histories, cfg.ingest.min_months, cfg.ingest.min_txns_per_month)
        reject_rows = [[r.line, r.reason] for r in rejections]
        elig_rows = [
            [r.account_id, r.span_months, r.min_monthly_txns, int(r.eligible), r.reason] for r in report
        ]
        window_rows = [[h.account_id, int(h.month_keys[-1]) // 3] for h in kept]

        def all_txns():
            for h in kept:
                yield from h.transactions()

        write_transactions_csv(all_txns(), clean_path)
    _write_csv(elig_path, ["account_id", "span_months", "min_monthly_txns", "eligible", "reason"], elig_rows)
    _write_csv(rejects_path, ["line", "reason"], reject_rows)
    _write_csv(windows_path, ["account_id", "window"], window_rows)
    return StageRecord(
        name="ingest",
        inputs={source.name: file_digest(source)},
        outputs={p.name: file_digest(p) for p in (clean_path, elig_path, rejects_path, windows_path)},
        seed=cfg.seed,
    )


def stage_features(cfg: PipelineConfig, stage_dir: Path) -> StageRecord:
    clean = _require(stage_dir / "transactions_clean.csv", "ingest")
    rules = _load_rules(cfg)
    flow = _load_flow(cfg)
    feat_path = stage_dir / "features.csv"
    dict_path = stage_dir / "feature_dictionary.json"
    with open(feat_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["account_id"] + FEATURE_NAMES)
        for account_id, txns, _rej in iter_account_rows(clean):
            history = history_from_transactions(account_id, txns)
            vec = build_feature_vector(history, rules, flow)
            row = [account_id]
            for name in FEATURE_NAMES:
                v = vec[name]
                row.append("" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v)))
            writer.writerow(row)
    dict_path.write_text(json.dumps(feature_dictionary(), indent=2) + "\n", encoding="utf-8")
    return StageRecord(
        name="features",
        inputs={clean.name: file_digest(clean)},
        outputs={p.name: file_digest(p) for p in (feat_path, dict_path)},
        seed=cfg.seed,
    )


def stage_label(cfg: PipelineConfig, stage_dir: Path) -> StageRecord:
    clean = _require(stage_dir / "transactions_clean.csv", "ingest")
    demographics = _read_demographics(cfg, stage_dir)
    thresholds = cfg.thresholds
    histories = list(_iter_clean_histories(cfg, stage_dir, demographics))
    label_table = build_label_table(histories, thresholds)
    protected_table, profiles = build_protected_table(histories)
    labels_path = stage_dir / "labels.csv"
    protected_path = stage_dir / "protected.csv"
    write_labels_csv(label_table, labels_path)
    write_protected_csv(label_table.account_ids, profiles, protected_path)
    return StageRecord(
        name="label",
        inputs={clean.name: file_digest(clean)},
        outputs={p.name: file_digest(p) for p in (labels_path, protected_path)},
        seed=cfg.seed,
    )


def _read_windows(stage_dir: Path) -> Dict[str, int]:
    path = _require(stage_dir / "windows.csv", "ingest")
    _header, rows = _read_csv(path)
    return {r[0]: int(r[1]) for r in rows}


def _read_protected_columns(stage_dir: Path) -> Tuple[List[str], Dict[str, np.ndarray]]:
    path = _require(stage_dir / "protected.csv", "label")
    header, rows = _read_csv(path)
    idx = {name: i for i, name in enumerate(header)}
    ids = [r[idx["account_id"]] for r in rows]
    out: Dict[str, np.ndarray] = {}
    female = []
    for r in rows:
        g = r[idx["gender"]]
        female.append(math.nan if g == "other/unknown" else float(g == "female"))
    out["female"] = np.array(female)
    for name in ("disability", "carer", "has_child"):
        out[name] = np.array([float(r[idx[name]]) for r in rows])
    out["age"] = np.array(
        [float(r[idx["age"]]) if r[idx["age"]] else math.nan for r in rows]
    )
    return ids, out


def stage_train(cfg: PipelineConfig, stage_dir: Path) -> StageRecord:
    features = read_features_csv(_require(stage_dir / "features.csv", "features"))
    labels = read_labels_csv(_require(stage_dir / "labels.csv", "label"))
    prot_ids, protected = _read_protected_columns(stage_dir)
    windows_map = _read_windows(stage_dir)
    if labels.account_ids != features.account_ids or prot_ids != features.account_ids:
        raise IngestError("stage files disagree on account rows; re-run upstream stages")
    windows = np.array([windows_map[a] for a in features.account_ids], dtype=np.int64)

    targets: Dict[str, np.ndarray] = {}
    for name in cfg.learn.targets:
        if name in FVI_NAMES:
            targets[name] = labels.column(name)
        elif name in PROTECTED_NAMES:
            targets[name] = protected[name]
    reports, skipped, models = run_matrix(
        features.X,
        features.names,
        features.account_ids,
        windows,
        targets,
        grids=cfg.learn.runtime_grids(),
        kinds=cfg.learn.kinds,
        seed=cfg.seed,
        cv_folds=cfg.learn.cv_folds,
        keep_models=cfg.learn.save_models,
    )
    payload = {
        "provenance": {"config_hash": config_hash(cfg), "seed": cfg.seed, "version": __version__},
        "reports": [r.to_json() for r in reports],
        "skipped": skipped,
    }
    out_path = stage_dir / "eval_reports.json"
    out_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    outputs = {out_path.name: file_digest(out_path)}
    if cfg.learn.save_models:
        model_dir = stage_dir / "models"
        model_dir.mkdir(exist_ok=True)
        for (target, kind), model in models.items():
            path = model_dir / f"{target}_{kind}.json"
            save_model(model, path)
            outputs[f"models/{path.name}"] = file_digest(path)
    return StageRecord(
        name="train",
        inputs={
            "features.csv": file_digest(stage_dir / "features.csv"),
            "labels.csv": file_digest(stage_dir / "labels.csv"),
            "protected.csv": file_digest(stage_dir / "protected.csv"),
        },
        outputs=outputs,
        seed=cfg.seed,
    )


def stage_cluster(cfg: PipelineConfig, stage_dir: Path) -> StageRecord:
    features = read_features_csv(_require(stage_dir / "features.csv", "features"))
    labels = read_labels_csv(_require(stage_dir / "labels.csv", "label"))
    prot_ids, protected = _read_protected_columns(stage_dir)
    if labels.account_ids != features.account_ids or prot_ids != features.account_ids:
        raise IngestError("stage files disagree on account rows; re-run upstream stages")
    from .learn.protocol import Imputer

    imputer = Imputer.fit(features.X, features.names)
    X = imputer.transform(features.X)[:, : sum(imputer.keep)]  # indicator cols stay out of clustering
    seg = cfg.segment
    pca = fit_pca(
        X,
        n_components=seg.n_components,
        variance_target=seg.variance_target,
        names=[n for n, k in zip(features.names, imputer.keep) if k],
    )
    points = pca.transform(X)
    seed = derive_int(cfg.seed, "segment")
    selection, results = select_k(points, range(seg.k_min, seg.k_max + 1), seed=seed)
    k = seg.cluster_k or selection.recommended_k
    result = results.get(k) or kmeans(points, k, seed=seed)

    clusters_path = stage_dir / "clusters.csv"
    _write_csv(
        clusters_path,
        ["account_id", "cluster"],
        [[a, int(c)] for a, c in zip(features.account_ids, result.assignment)],
        comment=_provenance(cfg),
    )
    diag_path = stage_dir / "diagnostics.csv"
    _write_csv(
        diag_path,
        ["k", "inertia", "silhouette", "recommended", "weak_structure"],
        [
            [row["k"], repr(row["inertia"]), repr(row["silhouette"]),
             int(row["k"] == selection.recommended_k), int(selection.weak_structure)]
            for row in selection.table
        ],
        comment=_provenance(cfg),
    )
    trace_path = stage_dir / "kmeans_iterations.csv"
    trace_rows = []
    for kk, res in sorted(results.items()):
        for it, inertia in enumerate(res.inertia_trace, start=1):
            trace_rows.append([kk, it, repr(inertia)])
    _write_csv(trace_path, ["k", "iteration", "inertia"], trace_rows, comment=_provenance(cfg))

    n = points.shape[0]
    perplexity = seg.tsne_perplexity or min(30.0, max((n - 1) / 3.0 - 1.0, 2.0))
    embedding = tsne_embed(points, perplexity=perplexity, seed=derive_int(cfg.seed, "tsne"), n_iter=seg.tsne_iters)
    embed_path = stage_dir / "embedding.csv"
    _write_csv(
        embed_path,
        ["account_id", "x", "y"],
        [[a, repr(float(x)), repr(float(y))] for a, (x, y) in zip(features.account_ids, embedding)],
        comment=_provenance(cfg),
    )

    columns: Dict[str, np.ndarray] = {n_: features.X[:, j] for j, n_ in enumerate(features.names)}
    for name in labels.columns:
        columns[f"fvi_{name}"] = labels.column(name)
    for name, col in protected.items():
        columns[f"protected_{name}"] = col
    profile = profile_clusters(result.assignment, columns)
    profile_path = stage_dir / "cluster_profile.csv"
    rows = [
        [r["column"], r["cluster"], "" if r["mean"] is None else repr(r["mean"]), int(r["is_min"]), int(r["is_max"])]
        for r in profile.rows()
    ]
    _write_csv(profile_path, ["column", "cluster", "mean", "is_min", "is_max"], rows, comment=_provenance(cfg))
    sizes_path = stage_dir / "cluster_sizes.csv"
    _write_csv(
        sizes_path,
        ["cluster", "size", "share"],
        [[c, s, repr(sh)] for c, s, sh in zip(profile.clusters, profile.sizes, profile.shares)],
        comment=_provenance(cfg),
    )
    return StageRecord(
        name="cluster",
        inputs={
            "features.csv": file_digest(stage_dir / "features.csv"),
            "labels.csv": file_digest(stage_dir / "labels.csv"),
            "protected.csv": file_digest(stage_dir / "protected.csv"),
        },
        outputs={
            p.name: file_digest(p)
            for p in (clusters_path, diag_path, trace_path, embed_path, profile_path, sizes_path)
        },
        seed=cfg.seed,
    )


def stage_audit(cfg: PipelineConfig, stage_dir: Path) -> StageRecord:
    features = read_features_csv(_require(stage_dir / "features.csv", "features"))
    labels = read_labels_csv(_require(stage_dir / "labels.csv", "label"))
    prot_ids, protected = _read_protected_columns(stage_dir)
    windows_map = _read_windows(stage_dir)
    clusters_path = _require(stage_dir / "clusters.csv", "cluster")
    _header, cluster_rows = _read_csv(clusters_path)
    assignment = np.array([int(r[1]) for r in cluster_rows])
    windows = np.array([windows_map[a] for a in features.account_ids], dtype=np.int64)

    columns: Dict[str, np.ndarray] = {n_: features.X[:, j] for j, n_ in enumerate(features.names)}
    for name in labels.columns:
        columns[f"fvi_{name}"] = labels.column(name)
    for name, col in protected.items():
        columns[f"protected_{name}"] = col
    corr = correlation_matrix(columns, significance=cfg.audit.significance)
    corr_path = stage_dir / "correlation_report.csv"
    _write_csv(
        corr_path,
        ["a", "b", "r", "p", "n", "significant"],
        [
            [r["a"], r["b"], "" if r["r"] is None else repr(r["r"]),
             "" if r["p"] is None else repr(r["p"]), r["n"], int(r["significant"])]
            for r in corr.rows()
        ],
        comment=_provenance(cfg),
    )

    attributes = {k: v for k, v in protected.items() if k != "age"}
    leakage = measure_leakage(
        features.X,
        features.names,
        features.account_ids,
        windows,
        attributes,
        proxy_features=cfg.audit.proxy_features or None,
        grids=cfg.learn.runtime_grids(),
        kinds=cfg.learn.kinds,
        seed=cfg.seed,
        cv_folds=cfg.learn.cv_folds,
        direct_threshold=cfg.audit.direct_auroc,
        indirect_threshold=cfg.audit.indirect_auroc,
    )
    leak_path = stage_dir / "leakage_report.json"
    leak_payload = leakage.to_json()
    leak_payload["provenance"] = {"config_hash": config_hash(cfg), "seed": cfg.seed}
    leak_path.write_text(json.dumps(leak_payload, indent=2) + "\n", encoding="utf-8")

    comp_cols = {f"protected_{k}": v for k, v in attributes.items()}
    for name in labels.columns:
        comp_cols[f"fvi_{name}"] = labels.column(name)
    comp = composition(assignment, comp_cols, lift_factor=cfg.audit.lift_factor)
    comp_path = stage_dir / "composition.csv"
    _write_csv(
        comp_path,
        ["cluster", "attribute", "rate", "population_rate", "lift", "flagged"],
        [
            [r["cluster"], r["attribute"], repr(r["rate"]), repr(r["population_rate"]),
             repr(r["lift"]), int(r["flagged"])]
            for r in comp.rows()
        ],
        comment=_provenance(cfg),
    )
    return StageRecord(
        name="audit",
        inputs={
            "features.csv": file_digest(stage_dir / "features.csv"),
            "labels.csv": file_digest(stage_dir / "labels.csv"),
            "protected.csv": file_digest(stage_dir / "protected.csv"),
            "clusters.csv": file_digest(clusters_path),
        },
        outputs={p.name: file_digest(p) for p in (corr_path, leak_path, comp_path)},
        seed=cfg.seed,
    )


def _html_table(title: str, header: List[str], rows: List[Sequence]) -> str:
    cells = "".join(f"<th>{h}</th>" for h in header)
    body = "".join(
        "<tr>" + "".join(f"<td>{v}</td>" for v in row) + "</tr>" for row in rows
    )
    return f"<h2>{title}</h2><table><tr>{cells}</tr>{body}</table>"


def stage_report(cfg: PipelineConfig, stage_dir: Path) -> StageRecord:
    gaps: List[str] = []
    report: Dict = {
        "provenance": {"config_hash": config_hash(cfg), "seed": cfg.seed, "version": __version__}
    }
    inputs: Dict[str, str] = {}
    report_dir = stage_dir / "report"
    report_dir.mkdir(exist_ok=True)
    html_parts: List[str] = []

    eval_path = stage_dir / "eval_reports.json"
    if eval_path.exists():
        inputs[eval_path.name] = file_digest(eval_path)
        payload = json.loads(eval_path.read_text(encoding="utf-8"))
        grid_rows = []
        importances: Dict[str, List[dict]] = {}
        by_target_kind = {}
        for rep in payload["reports"]:
            grid_rows.append(
                [
                    rep["target"],
                    rep["kind"],
                    rep["auroc"],
                    rep["metrics"]["accuracy"],
                    rep["metrics"]["precision"],
                    rep["metrics"]["recall"],
                    rep["metrics"]["f1"],
                ]
            )
            by_target_kind[(rep["target"], rep["kind"])] = rep
        for (target, kind), rep in by_target_kind.items():
            if kind != "GBT" or not rep.get("importances"):
                continue
            top = sorted(rep["importances"], key=lambda d: d["mean"], reverse=True)[:8]
            importances[target] = top
        report["metric_grid"] = [
            {
                "target": r[0], "kind": r[1], "auroc": r[2], "accuracy": r[3],
                "precision": r[4], "recall": r[5], "f1": r[6],
            }
            for r in grid_rows
        ]
        report["top_importances"] = importances
        report["skipped_targets"] = payload["skipped"]
        _write_csv(
            report_dir / "metric_grid.csv",
            ["target", "kind", "auroc", "accuracy", "precision", "recall", "f1"],
            [[c if c is not None else "" for c in r] for r in grid_rows],
        )
        imp_rows = []
        for target, top in importances.items():
            for rank, d in enumerate(top, start=1):
                imp_rows.append([target, rank, d["feature"], d["mean"], d["sd"]])
        _write_csv(report_dir / "importances.csv", ["target", "rank", "feature", "mean", "sd"], imp_rows)
        html_parts.append(_html_table("Model performance", ["target", "kind", "auroc", "accuracy", "precision", "recall", "f1"], grid_rows))
    else:
        gaps.append("train stage outputs missing")

    profile_path = stage_dir / "cluster_profile.csv"
    if profile_path.exists():
        inputs[profile_path.name] = file_digest(profile_path)
        header, rows = _read_csv(profile_path)
        report["cluster_profile"] = [dict(zip(header, r)) for r in rows]
        _write_csv(report_dir / "cluster_profile.csv", header, rows)
        sizes_path = stage_dir / "cluster_sizes.csv"
        if sizes_path.exists():
            inputs[sizes_path.name] = file_digest(sizes_path)
            sheader, srows = _read_csv(sizes_path)
            report["cluster_sizes"] = [dict(zip(sheader, r)) for r in srows]
    else:
        gaps.append("cluster stage outputs missing")

    leak_path = stage_dir / "leakage_report.json"
    if leak_path.exists():
        inputs[leak_path.name] = file_digest(leak_path)
        report["leakage"] = json.loads(leak_path.read_text(encoding="utf-8"))
        leak_rows = [
            [a["attribute"], a["auroc_all"], a["auroc_stripped"], a["verdict"]]
            for a in report["leakage"]["attributes"]
        ]
        html_parts.append(
            _html_table("Proxy leakage", ["attribute", "auroc_all", "auroc_stripped", "verdict"], leak_rows)
        )
    else:
        gaps.append("audit stage outputs missing")

    comp_path = stage_dir / "composition.csv"
    if comp_path.exists():
        inputs[comp_path.name] = file_digest(comp_path)
        header, rows = _read_csv(comp_path)
        report["composition"] = [dict(zip(header, r)) for r in rows]
        _write_csv(report_dir / "composition.csv", header, rows)

    report["gaps"] = gaps
    report_path = stage_dir / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    html_path = stage_dir / "report.html"
    html = (
        "<html><head><style>table{border-collapse:collapse}td,th{border:1px solid #999;padding:4px}</style></head><body>"
        + f"<h1>finvuln report</h1><p>{_provenance(cfg)}</p>"
        + "".join(html_parts)
        + (f"<h2>Gaps</h2><ul>{''.join(f'<li>{g}</li>' for g in gaps)}</ul>" if gaps else "")
        + "</body></html>"
    )
    html_path.write_text(html, encoding="utf-8")
    outputs = {report_path.name: file_digest(report_path), html_path.name: file_digest(html_path)}
    for p in sorted(report_dir.glob("*.csv")):
        outputs[f"report/{p.name}"] = file_digest(p)
    return StageRecord(name="report", inputs=inputs, outputs=outputs, seed=cfg.seed)


STAGES = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "features": stage_features,
    "label": stage_label,
    "train": stage_train,
    "cluster": stage_cluster,
    "audit": stage_audit,
    "report": stage_report,
}


# ---------------------------------------------------------------------------
# Entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finvuln",
        description="Transaction-analytics pipeline: synthetic cohorts, features, "
        "vulnerability labels, classifiers, segmentation and fairness audits.",
    )
    parser.add_argument("--version", action="version", version=f"finvuln {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=str, default=None, help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--jobs", type=int, default=None, help="worker threads for numba kernels")
        p.add_argument("--stage-dir", type=str, default=None, help="artifact directory override")

    for name in STAGE_ORDER:
        p = sub.add_parser(name, help=f"run the {name} stage")
        add_common(p)
        if name == "train":
            p.add_argument("--targets", type=str, default=None, help="comma-separated target subset")
            p.add_argument("--kinds", type=str, default=None, help="comma-separated model kinds")
            p.add_argument("--save-models", action="store_true", help="write model files")

    p = sub.add_parser("run-all", help="run every stage in order")
    add_common(p)

    p = sub.add_parser("config", help="configuration utilities")
    config_sub = p.add_subparsers(dest="config_command", required=True)
    init = config_sub.add_parser("init", help="write default config, rules and taxonomy files")
    init.add_argument("--dir", type=str, default=".", help="directory for the generated files")
    return parser


def _load_effective_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    cfg = apply_env_overrides(cfg, dict(os.environ))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.jobs is not None:
        cfg = dataclasses.replace(cfg, jobs=args.jobs)
    if args.stage_dir is not None:
        cfg = dataclasses.replace(cfg, output_dir=args.stage_dir)
    problems = cfg.validate()
    if problems:
        raise ConfigError(problems)
    return cfg


def _apply_jobs(cfg: PipelineConfig) -> None:
    if cfg.jobs > 0:
        from ._accel import HAVE_NUMBA

        if HAVE_NUMBA:
            import numba

            numba.set_num_threads(max(cfg.jobs, 1))


def _run_stages(cfg: PipelineConfig, names: List[str], train_args=None) -> int:
    stage_dir = Path(cfg.output_dir)
    if train_args is not None:
        learn = cfg.learn
        if train_args.targets:
            learn = dataclasses.replace(learn, targets=train_args.targets.split(","))
        if train_args.kinds:
            learn = dataclasses.replace(learn, kinds=train_args.kinds.split(","))
        if train_args.save_models:
            learn = dataclasses.replace(learn, save_models=True)
        cfg = dataclasses.replace(cfg, learn=learn)
        problems = cfg.validate()
        if problems:
            raise ConfigError(problems)
    _apply_jobs(cfg)
    manifest = RunManifest(config_hash=config_hash(cfg), version=__version__)
    with output_lock(stage_dir):
        for name in names:
            if name == "synth" and cfg.input_file:
                continue  # external data replaces the generator
            started = time.monotonic()
            record = STAGES[name](cfg, stage_dir)
            record.seconds = round(time.monotonic() - started, 3)
            manifest.stages.append(record)
            print(f"[{record.name}] done in {record.seconds}s: {', '.join(record.outputs) or '-'}")
        manifest.write(stage_dir / "manifest.json")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "config":
            if args.config_command == "init":
                target = Path(args.dir)
                target.mkdir(parents=True, exist_ok=True)
                write_config(PipelineConfig(), target / "config.toml")
                write_rules(target / "rules.txt")
                write_flow_classes(target / "taxonomy.csv")
                print(f"wrote {target / 'config.toml'}, {target / 'rules.txt'}, {target / 'taxonomy.csv'}")
                return 0
            return 1
        cfg = _load_effective_config(args)
        if args.command == "run-all":
            return _run_stages(cfg, STAGE_ORDER)
        train_args = args if args.command == "train" else None
        return _run_stages(cfg, [args.command], train_args=train_args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 1
    except (SynthConfigError, IngestError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OutputDirLocked as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
