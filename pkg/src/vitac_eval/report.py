"""
Report files.

Every CSV starts with the resolved run config as `# key = value` lines.
Precision rows are `query,candidate,top1,top3,n_trials` (query modality
searched against candidate-modality images). Confusion matrices are written as
a labelled CSV plus an 8-bit greyscale PGM heatmap whose pixels are
round(255 * p / row_max); a PNG rendering is optional.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from vitac_common.exception import FileFormatError
from vitac_common.logger import get_logger
from vitac_data.records import Modality
from vitac_eval.confusion import ConfusionMatrix
from vitac_eval.retrieval import PrecisionCell, PrecisionReport
from vitac_ingest.components.pnm import PixelImage, write_pnm

log = get_logger(__name__)

DIRECTION_NOTE = "rows: query modality -> candidate modality"


def _open_with_echo(path: Path, echo: Sequence[str], notes: Sequence[str] = ()):
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = path.open("w", encoding="utf-8", newline="")
    for line in [*echo, *notes]:
        fh.write(f"# {line}\n")
    return fh


def write_precision_csv(report: PrecisionReport, path: Path, echo: Sequence[str] = ()) -> Path:
    path = Path(path)
    with _open_with_echo(path, echo, [DIRECTION_NOTE]) as fh:
        report.to_frame().to_csv(fh, index=False, float_format="%.6f", lineterminator="\n")
    log.info("Wrote %d precision cells -> %s", len(report.cells), path)
    return path


def read_precision_csv(path: Path) -> PrecisionReport:
    frame = pd.read_csv(path, comment="#")
    top_cols = [c for c in frame.columns if c.startswith("top")]
    if "query" not in frame.columns or "candidate" not in frame.columns or not top_cols:
        raise FileFormatError(f"{path} is not a precision report")
    top_ks = tuple(int(c[3:]) for c in top_cols)
    cells = [
        PrecisionCell(
            query=Modality(row["query"]),
            candidate=Modality(row["candidate"]),
            precision={k: float(row[f"top{k}"]) for k in top_ks},
            n_trials=int(row["n_trials"]),
        )
        for _, row in frame.iterrows()
    ]
    return PrecisionReport(cells=cells, top_ks=top_ks)


def heatmap_image(matrix: ConfusionMatrix) -> PixelImage:
    values = np.nan_to_num(np.asarray(matrix.values, dtype=np.float64), nan=0.0)
    row_max = values.max(axis=1, keepdims=True) if values.size else values
    scaled = np.divide(255.0 * values, row_max, out=np.zeros_like(values), where=row_max > 0)
    pixels = np.floor(scaled + 0.5).astype(np.int64)
    n = matrix.size
    return PixelImage(width=n, height=n, channels=1, max_value=255, pixels=pixels.reshape(n, n, 1))


def write_confusion_csv(matrix: ConfusionMatrix, path: Path, echo: Sequence[str] = ()) -> Path:
    path = Path(path)
    note = f"{matrix.kind} confusion {matrix.query_modality.value}->{matrix.candidate_modality.value}"
    with _open_with_echo(path, echo, [DIRECTION_NOTE, note]) as fh:
        matrix.to_frame().to_csv(fh, float_format="%.9g", lineterminator="\n")
    return path


def read_confusion_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", index_col=0)


def save_heatmap_png(matrix: ConfusionMatrix, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(matrix.values, cmap="viridis", interpolation="nearest")
    ax.set_xlabel(f"{matrix.candidate_modality.value} {matrix.kind}")
    ax.set_ylabel(f"{matrix.query_modality.value} {matrix.kind}")
    if matrix.size <= 30:
        ax.set_xticks(range(matrix.size), [str(x) for x in matrix.labels], rotation=90, fontsize=6)
        ax.set_yticks(range(matrix.size), [str(x) for x in matrix.labels], fontsize=6)
    fig.colorbar(im, ax=ax, label="mean P")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def export_report(
    report: PrecisionReport | ConfusionMatrix,
    path: Path,
    echo: Sequence[str] = (),
    png: bool = False,
) -> list[Path]:
    """Write a precision table or a confusion matrix; returns the files written."""
    path = Path(path)
    if isinstance(report, PrecisionReport):
        return [write_precision_csv(report, path, echo)]
    written = [write_confusion_csv(report, path, echo)]
    written.append(write_pnm(heatmap_image(report), path.with_suffix(".pgm")))
    if png:
        written.append(save_heatmap_png(report, path.with_suffix(".png")))
    log.info("Wrote %dx%d %s confusion -> %s", report.size, report.size, report.kind,
             ", ".join(str(p) for p in written))
    return written
