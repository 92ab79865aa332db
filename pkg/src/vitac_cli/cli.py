"""
vitac command line.

Commands
--------
vitac gen      : synthesize a fabric collection and write a dataset file
vitac ingest   : featurize a PNM image tree into a dataset file
vitac train    : train a joint model, write checkpoint + loss CSV
vitac eval     : pick-1-from-N precision grid over every modality pair
vitac confuse  : fabric and cluster confusion matrices + heatmaps

Exit codes: 0 ok, 2 config, 3 I/O or file format, 4 numeric, 5 data or
model compatibility, 1 anything else.
"""
from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import typer
from rich.console import Console
from rich.table import Table

from vitac_cli.run_config import RunConfig, load_run_config
from vitac_common.exception import (
    ConfigError,
    DataValidationError,
    FileFormatError,
    IngestError,
    ModelCompatibilityError,
    NumericError,
    ShapeError,
    VitacError,
    error_message_detail,
)
from vitac_common.logger import get_logger
from vitac_common.seeding import derive_seed
from vitac_data.dataset_io import load_dataset, save_dataset
from vitac_data.fabrics import generate_fabrics
from vitac_data.records import Dataset, Modality
from vitac_data.split import cluster_and_split
from vitac_data.synth import SynthWorld, synthesize_dataset
from vitac_eval.confusion import cluster_confusion, confusion_matrix
from vitac_eval.report import export_report
from vitac_eval.retrieval import precision_grid
from vitac_ingest.pipeline.ingest_pipeline import IngestPipeline
from vitac_model.checkpoint import load_checkpoint
from vitac_model.joint import JointModel
from vitac_model.pipeline.train_pipeline import TrainPipeline, check_compatible

log = get_logger(__name__)

app = typer.Typer(add_completion=False, help="Visuo-tactile fabric association experiments.")
console = Console()
err_console = Console(stderr=True)

EXIT_CODES: list[tuple[type[BaseException], int]] = [
    (ConfigError, 2),
    (FileFormatError, 3),
    (IngestError, 3),
    (OSError, 3),
    (NumericError, 4),
    (DataValidationError, 5),
    (ModelCompatibilityError, 5),
    (ShapeError, 5),
    (VitacError, 1),
]

ConfigOpt = typer.Option(None, "--config", "-c", help="Run file with `section.key = value` lines")


@contextmanager
def _exit_on_error() -> Iterator[None]:
    try:
        yield
    except typer.Exit:
        raise
    except Exception as exc:
        for kind, code in EXIT_CODES:
            if isinstance(exc, kind):
                break
        else:
            code = 1
        log.error(error_message_detail(exc))
        err_console.print(f"[bold red]error:[/] {exc}")
        raise typer.Exit(code) from exc


def _load_pair(checkpoint: Path, dataset_path: Path) -> tuple[JointModel, Dataset]:
    model = load_checkpoint(checkpoint)
    dataset = load_dataset(dataset_path)
    check_compatible(model, dataset)
    if model.backbone_seed is not None and dataset.seeds.get("backbone_seed") not in (None, model.backbone_seed):
        log.warning("Checkpoint backbone seed %s differs from dataset backbone seed %s",
                    model.backbone_seed, dataset.seeds.get("backbone_seed"))
    return model, dataset


def _modality_option(flag: str, value: str) -> Modality:
    try:
        return Modality.parse(value)
    except DataValidationError as exc:
        raise ConfigError(f"--{flag}: {exc}") from exc


def _dataset_summary(dataset: Dataset, path: Path) -> None:
    table = Table(title=f"{path.name}: {len(dataset.fabrics)} fabrics, F={dataset.feature_dim}")
    table.add_column("modality")
    table.add_column("observations", justify="right")
    for mod in Modality:
        table.add_row(mod.value, str(dataset.count(mod)))
    console.print(table)
    console.print(f"train/test fabrics: {len(dataset.train_ids)}/{len(dataset.test_ids)}")


@app.command("gen")
def gen(
    config: Optional[Path] = ConfigOpt,
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Dataset file (default paths.dataset)"),
):
    """Generate fabrics, cluster, split and synthesize every observation."""
    with _exit_on_error():
        cfg = load_run_config(config)
        w = cfg.world
        fabrics = generate_fabrics(w.n_fabrics, derive_seed(w.seed, "fabrics"))
        clustered, test_ids = cluster_and_split(
            fabrics, cfg.cluster.k, cfg.cluster.seed, cfg.split.n_test, cfg.split.seed, cfg.cluster.n_init
        )
        world = SynthWorld(
            seed=w.seed,
            feature_dim=w.feature_dim,
            noise_std=w.noise_std,
            hidden_width=w.hidden_width,
            nuisance_scale=w.nuisance_scale,
            contact_jitter=w.contact_jitter,
        )
        dataset = synthesize_dataset(
            world, clustered, w.counts, test_ids,
            seeds={"cluster_seed": cfg.cluster.seed, "split_seed": cfg.split.seed},
        )
        path = save_dataset(dataset, output or cfg.paths.dataset)
        _dataset_summary(dataset, path)


@app.command("ingest")
def ingest(
    root_dir: Path = typer.Argument(..., help="Image root: <fabric_id>/<modality>/<instance>.pnm"),
    config: Optional[Path] = ConfigOpt,
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Dataset file (default paths.dataset)"),
    augment: Optional[bool] = typer.Option(None, "--augment/--no-augment", help="Override ingest.augment"),
):
    """Parse, optionally augment and featurize an image tree."""
    with _exit_on_error():
        cfg = load_run_config(config).updated("ingest", augment=augment)
        result = IngestPipeline(root_dir, cfg.ingest).run(
            cluster_k=cfg.cluster.k,
            n_test=cfg.split.n_test,
            cluster_seed=cfg.cluster.seed,
            split_seed=cfg.split.seed,
        )
        path = save_dataset(result.dataset, output or cfg.paths.dataset)
        _dataset_summary(result.dataset, path)
        for bad_path, reason in result.errors:
            err_console.print(f"[yellow]skipped[/] {bad_path}: {reason}")


@app.command("train")
def train(
    config: Optional[Path] = ConfigOpt,
    dataset: Optional[Path] = typer.Option(None, "--dataset", "-d", help="Dataset file (default paths.dataset)"),
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Output checkpoint"),
    loss_csv: Optional[Path] = typer.Option(None, "--loss-csv", help="Output `iteration,loss` CSV"),
    iterations: Optional[int] = typer.Option(None, "--iterations", help="Override train.iterations"),
):
    """Train the configured architecture on the training fabrics."""
    with _exit_on_error():
        cfg = load_run_config(config).updated("train", iterations=iterations)
        pipeline = TrainPipeline(
            dataset_path=dataset or cfg.paths.dataset,
            checkpoint_path=checkpoint or cfg.paths.checkpoint,
            loss_csv_path=loss_csv or cfg.paths.loss_csv,
            model_config=cfg.model,
            train_config=cfg.train,
            echo=cfg.echo(),
        )
        result = pipeline.run()
        tail = result.history[-max(1, len(result.history) // 10):] if result.history else []
        final = sum(tail) / len(tail) if tail else float("nan")
        console.print(f"final mean batch loss: {final:.6f}")


@app.command("eval")
def evaluate(
    config: Optional[Path] = ConfigOpt,
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Checkpoint (default paths.checkpoint)"),
    dataset: Optional[Path] = typer.Option(None, "--dataset", "-d", help="Dataset file (default paths.dataset)"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Precision CSV (default paths.precision_csv)"),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", help="Parallel evaluation workers"),
    split: Optional[str] = typer.Option(None, "--split", help="test, train or all"),
):
    """Top-k precision for every ordered pair of the model's modalities."""
    with _exit_on_error():
        cfg = load_run_config(config).updated("eval", workers=workers, split=split)
        model, data = _load_pair(checkpoint or cfg.paths.checkpoint, dataset or cfg.paths.dataset)
        report = precision_grid(model, data, model.modalities, cfg.eval)
        export_report(report, output or cfg.paths.precision_csv, echo=cfg.echo())

        table = Table(title=f"{model.architecture.value} pick-1-from-{cfg.eval.n_candidates} ({cfg.eval.split})")
        table.add_column("query -> candidate")
        for k in cfg.eval.top_ks:
            table.add_column(f"top-{k}", justify="right")
        table.add_column("trials", justify="right")
        for cell in report.cells:
            table.add_row(cell.label, *(f"{cell.precision[k]:.4f}" for k in cfg.eval.top_ks), str(cell.n_trials))
        console.print(table)


@app.command("confuse")
def confuse(
    config: Optional[Path] = ConfigOpt,
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Checkpoint (default paths.checkpoint)"),
    dataset: Optional[Path] = typer.Option(None, "--dataset", "-d", help="Dataset file (default paths.dataset)"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Confusion CSV (default paths.confusion_csv)"),
    query: Optional[str] = typer.Option(None, "--query", help="Query modality (default: last branch)"),
    candidate: str = typer.Option("depth", "--candidate", help="Candidate modality"),
    split: Optional[str] = typer.Option(None, "--split", help="test, train or all"),
    png: bool = typer.Option(False, "--png/--no-png", help="Also render PNG heatmaps"),
):
    """Mean match-probability confusion between fabrics and between clusters."""
    with _exit_on_error():
        cfg = load_run_config(config).updated("eval", split=split)
        query_mod = _modality_option("query", query) if query else None
        cand_mod = _modality_option("candidate", candidate)
        model, data = _load_pair(checkpoint or cfg.paths.checkpoint, dataset or cfg.paths.dataset)
        query_mod = query_mod or model.branches[-1]

        matrix = confusion_matrix(model, data, query_mod, cand_mod, cfg.eval)
        out = Path(output or cfg.paths.confusion_csv)
        written = export_report(matrix, out, echo=cfg.echo(), png=png)

        top = max((f.cluster_id for f in data.fabrics if f.cluster_id is not None), default=-1)
        if top >= 0:
            clusters = cluster_confusion(matrix, data.fabrics, max(cfg.cluster.k, top + 1))
            cluster_out = out.with_name(f"{out.stem}_clusters{out.suffix}")
            written += export_report(clusters, cluster_out, echo=cfg.echo(), png=png)
        else:
            log.warning("Dataset carries no cluster ids; cluster confusion skipped")
        for path in written:
            console.print(f"wrote {path}")


if __name__ == "__main__":
    app()
