"""Structured-text report files shared by all subcommands.

Reports are canonical JSON: sorted keys, fixed separators, one trailing
newline.  Identical inputs therefore serialize to identical bytes, which is
what makes the CLI determinism contract testable.  Every report embeds the
fully resolved configuration so a run can be reproduced from the file alone.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baselines import BaselineReport
from .errors import ValidationError
from .estimator import PosteriorExplanation

REPORT_SCHEMA_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def dump_report(report: dict, path=None) -> bytes:
    """Serialize to canonical JSON bytes, optionally writing them to path."""
    data = (
        json.dumps(_jsonable(report), sort_keys=True, separators=(",", ": "), indent=1)
        + "\n"
    ).encode("utf-8")
    if path is not None:
        Path(path).write_bytes(data)
    return data


def load_report(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"report file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"report is not valid JSON: {exc}") from exc


def explanation_report(
    expl: PosteriorExplanation, concept_names, label_names, extra_config=None
) -> dict:
    """Per-label concept table for the posterior estimator.

    The comparison score of this method is mu / sigma, recorded per entry as
    "score" alongside the posterior quantities.
    """
    per_label = []
    for y, label in enumerate(label_names):
        entries = [
            {
                "concept": name,
                "mu": float(expl.mu[y, k]),
                "sigma": float(np.sqrt(expl.sigma_diag[y, k])),
                "importance": float(expl.importance[y, k]),
                "sparse_weight": float(expl.w_sparse[y, k]),
                "score": float(expl.importance[y, k]),
            }
            for k, name in enumerate(concept_names)
        ]
        per_label.append({"label": label, "entries": entries})
    config = {
        "lambda": expl.lambda_used,
        "beta": expl.beta_used,
        "kappa": expl.sparsify_config.kappa,
        "tune": expl.config.tune,
        "tune_steps": expl.config.tune_steps,
        "tune_lr": expl.config.tune_lr,
        "tune_noise_samples": expl.config.tune_noise_samples,
        "seed": expl.config.seed,
    }
    config.update(extra_config or {})
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "explanation",
        "method": "uace",
        "config": config,
        "per_label": per_label,
    }


def baseline_report(
    report: BaselineReport, concept_names, label_names, extra_config=None
) -> dict:
    per_label = []
    for y, label in enumerate(label_names):
        entries = [
            {"concept": name, "score": float(report.scores[y, k])}
            for k, name in enumerate(concept_names)
            if report.scored[k]
        ]
        per_label.append({"label": label, "entries": entries})
    config = dict(report.metadata)
    config.update(extra_config or {})
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "explanation",
        "method": report.method,
        "config": _jsonable(config),
        "per_label": per_label,
    }


def report_label_scores(report: dict, label) -> tuple[list[str], np.ndarray]:
    """Extract (concept names, comparison scores) for one label of a report."""
    if report.get("kind") != "explanation":
        raise ValidationError("not an explanation report")
    labels = [pl["label"] for pl in report["per_label"]]
    if isinstance(label, int):
        if not 0 <= label < len(labels):
            raise ValidationError(f"label index {label} out of range")
        entry = report["per_label"][label]
    else:
        if label not in labels:
            raise ValidationError(f"label {label!r} not present in report")
        entry = report["per_label"][labels.index(label)]
    names = [e["concept"] for e in entry["entries"]]
    scores = np.array([e["score"] for e in entry["entries"]], dtype=np.float64)
    return names, scores
