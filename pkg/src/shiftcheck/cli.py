"""Command-line front door.

The CLI is a thin client over the HTTP service: by default it mounts the
FastAPI app in-process, and with ``--server URL`` it talks to a running
instance instead. Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from typing import Optional

import click


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class ServiceClient:
    """POSTs to the shiftcheck service, in-process unless a URL is given."""

    def __init__(self, server: Optional[str] = None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        if response.status_code >= 400:
            try:
                body = response.json()
            except ValueError:
                body = {}
            message = body.get("error") or body.get("detail") or response.text
            kind = body.get("kind", "validation")
            click.echo(f"error: {message}", err=True)
            sys.exit(2 if kind == "io" else 1)
        return response.json()


def _dump(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _config_payload(kwargs: dict) -> dict:
    return {
        "k": kwargs["k"],
        "quantile": kwargs["quantile"],
        "classwise": kwargs["classwise"],
        "normalize": kwargs["normalize"],
        "max_ref": kwargs["max_ref"],
        "min_samples": kwargs["min_samples"],
        "seed": kwargs["seed"],
        "self_exclude": kwargs["self_exclude"],
        "cot_batch_size": kwargs["cot_batch_size"],
        "cot_max_samples": kwargs["cot_max_samples"],
    }


def config_options(fn):
    opts = [
        click.option("--k", default=25, show_default=True, help="Neighbour count."),
        click.option("--quantile", default=0.99, show_default=True, help="Rejection quantile."),
        click.option("--classwise/--no-classwise", default=False, show_default=True),
        click.option("--normalize/--no-normalize", default=False, show_default=True),
        click.option("--max-ref", default=50_000, show_default=True, help="Reference-set cap."),
        click.option("--min-samples", default=20, show_default=True, help="Class-wise fallback."),
        click.option("--seed", default=0, show_default=True),
        click.option("--self-exclude/--no-self-exclude", default=False, show_default=True),
        click.option("--cot-batch-size", default=2500, show_default=True),
        click.option("--cot-max-samples", default=25_000, show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group()
@click.option("--server", default=None, help="Service URL; defaults to in-process.")
@click.pass_context
def main(ctx: click.Context, server: Optional[str]) -> None:
    """Label-free accuracy estimation under covariate shift."""
    ctx.obj = {"server": server}


@main.command()
@click.option("--preset", default=None, help="Named scenario preset.")
@click.option("--scenario", default=None, type=click.Path(), help="Scenario JSON file.")
@click.option("--seed", default=None, type=int)
@click.option("--out", required=True, type=click.Path(), help="Bundle output directory.")
@click.pass_context
def synth(ctx, preset, scenario, seed, out) -> None:
    """Generate a synthetic bundle from a preset or a scenario JSON file."""
    payload = {"out_dir": out, "preset": preset, "seed": seed}
    if scenario is not None:
        try:
            with open(scenario, "r", encoding="utf-8") as fh:
                payload["scenario"] = json.load(fh)
        except FileNotFoundError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except json.JSONDecodeError as exc:
            click.echo(f"error: invalid scenario JSON: {exc}", err=True)
            sys.exit(1)
    result = ServiceClient(ctx.obj["server"]).post("/synth", payload)
    click.echo(_dump(result), nl=False)


@main.command()
@click.option("--bundle", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Fitted-model directory.")
@config_options
@click.pass_context
def fit(ctx, bundle, out, **kwargs) -> None:
    """Fit the distance checker and ATC model on a bundle and serialize them."""
    payload = {"bundle": bundle, "out_dir": out, "config": _config_payload(kwargs)}
    result = ServiceClient(ctx.obj["server"]).post("/fit", payload)
    click.echo(_dump(result), nl=False)


@main.command()
@click.option("--bundle", required=True, type=click.Path())
@click.option("--bundle-b", default=None, type=click.Path(), help="Second bundle (GDE).")
@click.option(
    "--method",
    "methods",
    multiple=True,
    required=True,
    help="Estimator name; repeatable.",
)
@click.option("--fitted", default=None, type=click.Path(), help="Directory from `fit`.")
@click.option("--out", default=None, type=click.Path(), help="Also write the JSON report here.")
@config_options
@click.pass_context
def estimate(ctx, bundle, bundle_b, methods, fitted, out, **kwargs) -> None:
    """Run one or more estimators on a bundle; JSON report on stdout."""
    payload = {
        "bundle": bundle,
        "bundle_b": bundle_b,
        "methods": list(methods),
        "fitted_dir": fitted,
        "config": _config_payload(kwargs),
    }
    result = ServiceClient(ctx.obj["server"]).post("/estimate", payload)
    text = _dump(result)
    click.echo(text, nl=False)
    if out is not None:
        try:
            _atomic_write(out, text)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)


@main.command()
@click.option("--bundle", "bundles", multiple=True, required=True, type=click.Path())
@click.option("--bundle-b", "bundles_b", multiple=True, type=click.Path())
@click.option("--method", "methods", multiple=True, required=True)
@click.option("--out", required=True, type=click.Path(), help="CSV output directory.")
@click.option("--dataset-family", default="all", show_default=True)
@config_options
@click.pass_context
def evaluate(ctx, bundles, bundles_b, methods, out, dataset_family, **kwargs) -> None:
    """Sweep bundles x methods and emit the evaluation CSVs."""
    payload = {
        "bundles": list(bundles),
        "bundles_b": list(bundles_b) or None,
        "methods": list(methods),
        "out_dir": out,
        "dataset_family": dataset_family,
        "config": _config_payload(kwargs),
    }
    result = ServiceClient(ctx.obj["server"]).post("/evaluate", payload)
    click.echo(_dump(result), nl=False)


@main.command()
def acceptance() -> None:
    """Run the full acceptance suite; nonzero exit on any failure."""
    from .acceptance import run_all

    results = run_all(verbose=True)
    sys.exit(0 if all(passed for _, passed, _ in results) else 1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("shiftcheck.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
