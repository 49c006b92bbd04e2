"""File formats: score matrices, experiment reports, configs, saved models.

Score files are plain CSV, one row per sample: ``sample_id, true_label``
followed by one confidence column per enrolled subject. The header's
confidence columns are named ``<modality>_<index>``, which carries both
the modality tag and the class count. Floats are written with ``repr`` so
a write/read round trip is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .core import ConfidenceMatrix, PairedDataset, ValidationError, minmax_normalize_rows
from .evaluation import (
    ExperimentReport,
    FoldResult,
    MeanStd,
    ReportSummary,
    RunConfig,
)
from .fusion import DifferenceVector, FusionModel

__all__ = [
    "load_score_matrix",
    "write_score_matrix",
    "load_paired_dataset",
    "dump_dataset_scores",
    "render_report_text",
    "report_to_dict",
    "report_from_dict",
    "write_report",
    "load_report",
    "save_fusion_model",
    "load_fusion_model",
    "parse_config_file",
]


def load_score_matrix(path, normalize: bool = True) -> tuple[ConfidenceMatrix, np.ndarray]:
    """Parse one modality's score CSV into a matrix and its label vector.

    Labels may use any contiguous integer range; they are remapped to
    0-based indices. With ``normalize`` (the default) every row is min-max
    rescaled; disable it for files that are already in [0, 1].
    """
    p = Path(path)
    try:
        raw_lines = p.read_text().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read score file {p}: {exc}") from exc
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw_lines) if ln.strip()]
    if not lines:
        raise ValidationError(f"{p}: empty score file")

    header_no, header = lines[0]
    cols = [c.strip() for c in header.split(",")]
    if len(cols) < 4 or cols[0] != "sample_id" or cols[1] != "true_label":
        raise ValidationError(
            f"{p}:{header_no}: header must be 'sample_id,true_label,<modality>_0,...'"
        )
    conf_cols = cols[2:]
    modality, _, first_idx = conf_cols[0].rpartition("_")
    if not modality or first_idx != "0":
        raise ValidationError(f"{p}:{header_no}: first confidence column must be '<modality>_0'")
    expected = [f"{modality}_{j}" for j in range(len(conf_cols))]
    if conf_cols != expected:
        raise ValidationError(
            f"{p}:{header_no}: confidence columns must be {modality}_0..{modality}_{len(conf_cols) - 1}"
        )
    m = len(conf_cols)

    ids: list[str] = []
    labels: list[int] = []
    rows: list[list[float]] = []
    label_lines: list[int] = []
    seen: set[str] = set()
    for lineno, ln in lines[1:]:
        parts = [x.strip() for x in ln.split(",")]
        if len(parts) != m + 2:
            raise ValidationError(f"{p}:{lineno}: expected {m + 2} fields, got {len(parts)}")
        sid = parts[0]
        if sid in seen:
            raise ValidationError(f"{p}:{lineno}: duplicate sample_id {sid!r}")
        seen.add(sid)
        try:
            label = int(parts[1])
            conf = [float(x) for x in parts[2:]]
        except ValueError as exc:
            raise ValidationError(f"{p}:{lineno}: non-numeric field") from exc
        ids.append(sid)
        labels.append(label)
        label_lines.append(lineno)
        rows.append(conf)
    if not rows:
        raise ValidationError(f"{p}: no data rows")

    y = np.asarray(labels, dtype=np.int64)
    y -= y.min()  # contiguous external labels become 0-based indices
    bad = np.nonzero(y >= m)[0]
    if bad.size:
        raise ValidationError(
            f"{p}:{label_lines[bad[0]]}: label out of range for {m} classes"
        )
    values = np.asarray(rows, dtype=np.float64)
    if normalize:
        values = minmax_normalize_rows(values)
    return ConfidenceMatrix(values=values, sample_ids=tuple(ids), modality=modality), y


def write_score_matrix(matrix: ConfidenceMatrix, labels, path) -> None:
    """Write one modality's scores in the CSV format ``load_score_matrix`` reads."""
    y = np.asarray(labels, dtype=np.int64)
    if y.size != matrix.num_samples:
        raise ValidationError(f"{y.size} labels for {matrix.num_samples} rows")
    header = ["sample_id", "true_label"] + [
        f"{matrix.modality}_{j}" for j in range(matrix.num_classes)
    ]
    out = [",".join(header)]
    for sid, label, row in zip(matrix.sample_ids, y, matrix.values):
        out.append(",".join([sid, str(int(label))] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(out) + "\n")


def load_paired_dataset(face_path, ecg_path, normalize: bool = True) -> PairedDataset:
    """Load and align the two modalities' score files into one dataset.

    The files must cover the same sample_ids with the same labels; the ECG
    rows are reordered to the face file's sample order if needed.
    """
    face, y_face = load_score_matrix(face_path, normalize=normalize)
    ecg, y_ecg = load_score_matrix(ecg_path, normalize=normalize)
    if set(face.sample_ids) != set(ecg.sample_ids):
        only_face = set(face.sample_ids) - set(ecg.sample_ids)
        only_ecg = set(ecg.sample_ids) - set(face.sample_ids)
        raise ValidationError(
            f"modality files cover different samples "
            f"({len(only_face)} only in {face_path}, {len(only_ecg)} only in {ecg_path})"
        )
    if face.sample_ids != ecg.sample_ids:
        pos = {sid: i for i, sid in enumerate(ecg.sample_ids)}
        order = [pos[sid] for sid in face.sample_ids]
        ecg = ecg.take(order)
        y_ecg = y_ecg[order]
    if not np.array_equal(y_face, y_ecg):
        raise ValidationError("modality files disagree on true labels")
    return PairedDataset(face=face, ecg=ecg, labels=y_face)


def dump_dataset_scores(dataset: PairedDataset, directory) -> tuple[Path, Path]:
    """Export both modalities of a dataset as score CSVs; returns the paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    face_path = d / "face_scores.csv"
    ecg_path = d / "ecg_scores.csv"
    write_score_matrix(dataset.face, dataset.labels, face_path)
    write_score_matrix(dataset.ecg, dataset.labels, ecg_path)
    return face_path, ecg_path


# -- experiment reports -------------------------------------------------


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "config": asdict(report.config),
        "folds": [asdict(f) for f in report.folds],
        "summary": asdict(report.summary),
    }


def report_from_dict(data: dict) -> ExperimentReport:
    try:
        config = RunConfig(**data["config"])
        folds = tuple(FoldResult(**f) for f in data["folds"])
        summary = ReportSummary(
            **{k: MeanStd(**v) for k, v in data["summary"].items()}
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed report document: {exc}") from exc
    return ExperimentReport(config=config, folds=folds, summary=summary)


def render_report_text(report: ExperimentReport) -> str:
    """Human-readable per-fold table with an aggregate row."""
    c = report.config
    head = (
        f"scenario: {c.scenario}  seed: {c.seed}  folds: {c.folds}  "
        f"bound: {c.bound}  rank_depth: {c.rank_depth}  "
        f"samples: {c.n_samples}  classes: {c.n_classes}"
    )
    cols = ["fold", "face(%)", "ecg(%)", "fused(%)", "weighted_sum(%)"]
    rows = [
        [
            str(f.fold_id),
            f"{100 * f.acc_face:.3f}",
            f"{100 * f.acc_ecg:.3f}",
            f"{100 * f.acc_fused:.3f}",
            f"{100 * f.acc_weighted_sum:.3f}",
        ]
        for f in report.folds
    ]
    s = report.summary
    rows.append(
        [
            "avg±std",
            f"{100 * s.face.mean:.3f}±{100 * s.face.std:.2f}",
            f"{100 * s.ecg.mean:.3f}±{100 * s.ecg.std:.2f}",
            f"{100 * s.fused.mean:.3f}±{100 * s.fused.std:.2f}",
            f"{100 * s.weighted_sum.mean:.3f}±{100 * s.weighted_sum.std:.2f}",
        ]
    )
    widths = [max(len(r[i]) for r in rows + [cols]) for i in range(len(cols))]
    lines = [head, "  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


def write_report(report: ExperimentReport, path, fmt: str = "text") -> None:
    """Serialize a report; ``fmt`` is 'text' or 'structured' (JSON)."""
    if fmt == "text":
        payload = render_report_text(report)
    elif fmt == "structured":
        payload = json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    else:
        raise ValidationError(f"unknown report format {fmt!r}")
    Path(path).write_text(payload)


def load_report(path) -> ExperimentReport:
    """Reload a structured (JSON) report."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a structured report: {exc}") from exc
    return report_from_dict(data)


# -- fusion model persistence -------------------------------------------


def save_fusion_model(model: FusionModel, path) -> None:
    doc = {
        "modality_order": list(model.modality_order),
        "bound": model.difference.bound,
        "difference": [float(v) for v in model.difference.values],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_fusion_model(path) -> FusionModel:
    try:
        doc = json.loads(Path(path).read_text())
        order = tuple(doc["modality_order"])
        diff = DifferenceVector(
            values=np.asarray(doc["difference"], dtype=np.float64),
            bound=float(doc["bound"]),
        )
    except OSError as exc:
        raise ValidationError(f"cannot read model {path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: not a fusion model file: {exc}") from exc
    return FusionModel(difference=diff, modality_order=order)


# -- flat key-value config files ----------------------------------------


def parse_config_file(path) -> dict[str, str]:
    """Read a flat ``key = value`` config; keys match CLI flag names."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {p}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, ln in enumerate(text.splitlines(), start=1):
        line = ln.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{p}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ValidationError(f"{p}:{lineno}: empty key or value")
        if key in out:
            raise ValidationError(f"{p}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out
