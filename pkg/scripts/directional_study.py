"""
Run the directional studies on the synthetic world and print per-seed tables.

    python scripts/directional_study.py --study all --seeds 5 --iterations 3000
"""
from __future__ import annotations

import pandas as pd
import typer
from rich.console import Console
from rich.table import Table

from vitac_common.logger import get_logger
from vitac_eval.studies import StudySetup, architecture_comparison, flat_vs_fold, touch_helps_vision

log = get_logger(__name__)
console = Console()

STUDIES = {
    "flat_vs_fold": flat_vs_fold,
    "architectures": architecture_comparison,
    "touch_helps_vision": touch_helps_vision,
}


def show(title: str, frame: pd.DataFrame) -> None:
    table = Table(title=title)
    for col in frame.columns:
        table.add_column(str(col), justify="right")
    for row in frame.itertuples(index=False):
        table.add_row(*(f"{v:.4f}" if isinstance(v, float) else str(v) for v in row))
    means = frame.drop(columns="seed").mean()
    table.add_row("mean", *(f"{v:.4f}" for v in means), style="bold")
    console.print(table)


def main(
    study: str = typer.Option("all", help="flat_vs_fold, architectures, touch_helps_vision or all"),
    seeds: int = typer.Option(5, help="Number of seeds (0..n-1)"),
    iterations: int = typer.Option(2000, help="Training iterations per model"),
    n_fabrics: int = typer.Option(50),
    n_test: int = typer.Option(10),
):
    setup = StudySetup(n_fabrics=n_fabrics, n_test=n_test, iterations=iterations)
    names = list(STUDIES) if study == "all" else [study]
    for name in names:
        if name not in STUDIES:
            raise typer.BadParameter(f"unknown study {name!r}")
        log.info("Running %s over %d seeds", name, seeds)
        show(name, STUDIES[name](setup, list(range(seeds))))


if __name__ == "__main__":
    typer.run(main)
