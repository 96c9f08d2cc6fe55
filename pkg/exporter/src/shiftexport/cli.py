"""Command-line entry point mirroring ExportSpec."""

from __future__ import annotations

import sys

import click

from .export import ExportSpec, export
from .models import ExportError


@click.command()
@click.option("--model", required=True, help="Builtin model name or torchvision architecture.")
@click.option(
    "--data-root",
    required=True,
    type=click.Path(file_okay=False),
    help="Directory with train/, val/, test/ split folders of class subdirectories.",
)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--checkpoint", default=None, type=click.Path(dir_okay=False))
@click.option("--head", default=None, help="Dotted name of the final linear head (override).")
@click.option("--num-classes", default=None, type=int)
@click.option("--batch-size", default=32, show_default=True, type=int)
@click.option("--image-size", default=32, show_default=True, type=int)
@click.option("--device", default="cpu", show_default=True)
@click.option("--name", default="", help="Dataset name recorded in the manifest.")
@click.option("--seed", default=0, show_default=True, type=int)
def main(**kwargs) -> None:
    """Export penultimate-layer embeddings, logits and labels to a bundle
    directory readable by the shiftcheck CLI."""
    spec = ExportSpec(**kwargs)
    try:
        out = export(spec)
    except FileNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except ExportError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(out)


if __name__ == "__main__":
    main()
