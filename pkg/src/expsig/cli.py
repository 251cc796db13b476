"""Command-line client for the experiment service.

Each experiment subcommand loads a config file, posts it to the service's
/experiments/run endpoint and writes the returned artifacts (summary.json,
samples.csv, plot.svg) to the output directory.  Without --server the app
is mounted in-process over an ASGI transport, so no network or separate
process is involved; with --server the same requests go to a remote
instance.

Exit codes: 0 success, 2 config validation failure, 1 numeric failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx
import yaml

from . import __version__
from .config import EXPERIMENT_KINDS


class _InProcessClient:
    """Sync facade over the ASGI app; the default transport when no --server."""

    def __init__(self) -> None:
        from .service import create_app

        self._transport = httpx.ASGITransport(app=create_app())

    def __enter__(self) -> "_InProcessClient":
        return self

    def __exit__(self, *exc) -> None:
        pass

    def _request(self, method: str, url: str, **kwargs) -> httpx.Response:
        import asyncio

        async def go() -> httpx.Response:
            async with httpx.AsyncClient(
                transport=self._transport, base_url="http://expsig.local", timeout=None
            ) as client:
                return await client.request(method, url, **kwargs)

        return asyncio.run(go())

    def post(self, url: str, **kwargs) -> httpx.Response:
        return self._request("POST", url, **kwargs)

    def get(self, url: str, **kwargs) -> httpx.Response:
        return self._request("GET", url, **kwargs)


def _client(server: Optional[str]):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    return _InProcessClient()


class ConfigError(ValueError):
    pass


def _load_config_data(config_path: Optional[str], kind: str, seed, threads) -> dict:
    data = {}
    if config_path:
        text = Path(config_path).read_text()
        loaded = yaml.safe_load(text)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping at the top level")
        data = loaded
    if data.get("kind", kind) != kind:
        raise ConfigError(
            f"config file declares kind {data.get('kind')!r} but the subcommand is {kind!r}"
        )
    data["kind"] = kind
    if seed is not None:
        data["seed"] = seed
    if threads is not None:
        data["threads"] = threads
    if "seed" not in data:
        raise ConfigError("seed is required (config field or --seed)")
    return data


def _write_outputs(out_dir: str, payload: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = json.dumps(payload["summary"], sort_keys=True, indent=2) + "\n"
    (out / "summary.json").write_text(summary)
    (out / "samples.csv").write_text(payload["samples_csv"])
    if payload.get("plot_svg"):
        (out / "plot.svg").write_text(payload["plot_svg"])


def _run_experiment_command(kind: str, config, out, seed, threads, server) -> None:
    try:
        data = _load_config_data(config, kind, seed, threads)
    except (ConfigError, yaml.YAMLError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    with _client(server) as client:
        try:
            response = client.post("/experiments/run", json=data)
        except httpx.HTTPError as exc:
            click.echo(f"service unreachable: {exc}", err=True)
            sys.exit(1)
    if response.status_code == 422:
        click.echo(f"config validation failed: {response.text}", err=True)
        sys.exit(2)
    if response.status_code != 200:
        click.echo(f"experiment failed: {response.text}", err=True)
        sys.exit(1)
    payload = response.json()
    _write_outputs(out, payload)
    click.echo(f"{kind}: wrote summary.json, samples.csv to {out}")


@click.group()
@click.version_option(version=__version__, prog_name="expsig")
def main() -> None:
    """Expected-signature experiment harness."""


def _register(kind: str) -> None:
    @main.command(name=kind, help=f"Run the {kind} experiment from a config file.")
    @click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
    @click.option("--out", type=click.Path(file_okay=False), default="out")
    @click.option("--seed", type=int, default=None, help="Overrides the config seed.")
    @click.option("--threads", type=int, default=None, help="Worker hint; never changes results.")
    @click.option("--server", type=str, default=None, help="Remote service URL (default: in-process).")
    def _cmd(config, out, seed, threads, server, _kind=kind) -> None:
        _run_experiment_command(_kind, config, out, seed, threads, server)


for _kind in EXPERIMENT_KINDS:
    _register(_kind)


@main.command()
@click.option("--server", type=str, default=None)
def selftest(server) -> None:
    """Quick algebraic identity checks; exits non-zero on any failure."""
    import numpy as np

    from .paths import Partition, PiecewiseLinearPath, insert_midpoint
    from .signatures import signature, signature_causal
    from .tensor import tensor_exp, tensor_product
    from .words import Word, shuffle, shuffle_mass

    rng = np.random.default_rng(0)
    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    masses = []
    for _ in range(20):
        la = tuple(rng.integers(1, 3, rng.integers(0, 4)))
        lb = tuple(rng.integers(1, 3, rng.integers(0, 4)))
        poly = shuffle(Word(la, 2), Word(lb, 2))
        masses.append(poly.total_mass() == shuffle_mass(Word(la, 2), Word(lb, 2)))
    check("shuffle coefficient mass", all(masses))

    ok = True
    for _ in range(10):
        m = int(rng.integers(2, 12))
        times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 1.0, m))])
        pts = rng.standard_normal((m + 1, 2))
        p = PiecewiseLinearPath(Partition(times), pts)
        s = signature(p, 3)
        mid = m // 2
        left = PiecewiseLinearPath(Partition(times[: mid + 1]), pts[: mid + 1])
        right = PiecewiseLinearPath(Partition(times[mid:]), pts[mid:])
        chen = tensor_product(signature(left, 3), signature(right, 3))
        ok &= s.max_abs_diff(chen) < 1e-12
        ok &= signature_causal(p, 3).max_abs_diff(s) < 1e-10
        refined = insert_midpoint(p, int(rng.integers(0, m)))
        ok &= signature(refined, 3).max_abs_diff(s) < 1e-12
    check("Chen / causal / refinement identities", ok)

    x = rng.standard_normal(3)
    prod = tensor_product(tensor_exp(x, 4), tensor_exp(-x, 4))
    unit = tensor_exp(np.zeros(3), 4)
    check("tensor exp inverse", prod.max_abs_diff(unit) < 1e-12)

    if server:
        with _client(server) as client:
            r = client.get("/health")
            check("service health", r.status_code == 200)

    if failures:
        click.echo(f"{failures} check(s) failed", err=True)
        sys.exit(1)
    click.echo("selftest ok")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host: str, port: int) -> None:
    """Run the FastAPI service under uvicorn."""
    import uvicorn

    uvicorn.run("expsig.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
