"""Command-line entry points for batch workflows and the query service.

Commands compose the library modules: generate or ingest velocity datasets,
build the dynamics cache, run similarity queries against it, compute FTLE
validation fields, and serve the interactive HTTP API.

Environment variables: PATHDYN_PORT (default service port) and
PATHDYN_CACHE_DIR (directory against which bare cache names are resolved).
"""

from __future__ import annotations

import functools
import os
import sys

import click
import numpy as np

from . import distribution, dynamics, field as field_mod, simfield, store
from .advect import IntegrationParams

_KNOWN_ERRORS = (
    ValueError,
    OSError,
)


def _fail_cleanly(fn):
    """Map domain errors to a machine-parsable stderr line and exit code 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _KNOWN_ERRORS as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Pathline-dynamics similarity engine."""


@main.command("gen-field")
@click.argument("name", type=click.Choice(sorted(field_mod.ANALYTIC_FIELDS)))
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--nx", type=int, default=None, help="Grid nodes in x.")
@click.option("--ny", type=int, default=None, help="Grid nodes in y.")
@click.option("--nt", type=int, default=None, help="Stored time steps.")
@click.option("--origin", nargs=2, type=float, default=None, help="Domain origin (x y).")
@click.option("--extent", nargs=2, type=float, default=None, help="Domain size (width height).")
@click.option("--tmin", type=float, default=None)
@click.option("--tmax", type=float, default=None)
@_fail_cleanly
def gen_field(name, out, nx, ny, nt, origin, extent, tmin, tmax):
    """Rasterize a built-in analytic flow to a dataset file."""
    base = field_mod.DEFAULT_GRIDS[name]
    nx = nx or base.nx
    ny = ny or base.ny
    nt = nt or base.nt
    origin = tuple(origin) if origin else base.origin
    if extent:
        spacing = (extent[0] / (nx - 1), extent[1] / (ny - 1))
    else:
        spacing = (base.spacing[0] * (base.nx - 1) / (nx - 1),
                   base.spacing[1] * (base.ny - 1) / (ny - 1))
    tmin = base.t_min if tmin is None else tmin
    tmax = base.t_max if tmax is None else tmax
    spec = field_mod.GridSpec(origin, spacing, nx, ny, tmin, tmax, nt)
    fld = field_mod.make_analytic(name, spec)
    field_mod.save_dataset(fld, out)
    click.echo(f"wrote {out}: {name} {nx}x{ny}x{nt}, "
               f"x [{origin[0]}, {spec.x_max}], y [{origin[1]}, {spec.y_max}], t [{tmin}, {tmax}]")


@main.command()
@click.argument("src", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
@_fail_cleanly
def ingest(src, out):
    """Validate a dataset file and rewrite it in canonical form."""
    fld = field_mod.load_dataset(src)
    field_mod.save_dataset(fld, out)
    sp = fld.spec
    click.echo(f"ingested {src}: {sp.nx}x{sp.ny}x{sp.nt} "
               f"({fld.frames.nbytes / 1e6:.1f} MB payload) -> {out}")


@main.command("build-dynamics")
@click.argument("field_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_cache", type=click.Path(dir_okay=False))
@click.option("--t0", type=float, required=True, help="Start time.")
@click.option("--tau", type=float, required=True, help="Signed integration time (negative = backward).")
@click.option("--dt", type=float, default=0.01, show_default=True, help="Sample distance.")
@click.option("--rk-tol", type=float, default=1e-6, show_default=True)
@click.option("--stride", type=int, default=1, show_default=True, help="Seed every stride-th node.")
@click.option("--workers", type=int, default=None, help="Parallel workers (default: all).")
@_fail_cleanly
def build_dynamics(field_path, out_cache, t0, tau, dt, rk_tol, stride, workers):
    """Integrate all seeds and persist their invariant progressions."""
    fld = field_mod.load_dataset(field_path)
    params = IntegrationParams(t0=t0, tau=tau, dt_sample=dt, rk_tol=rk_tol)
    cache = store.build_cache(fld, params, stride=stride, workers=workers)
    store.save_cache(cache, out_cache)
    click.echo(f"built dynamics: M={cache.m_seeds} seeds, N={cache.n_steps} steps, "
               f"{cache.byte_size / 1e6:.1f} MB in {cache.build_seconds:.2f}s -> {out_cache}")


def _resolve_cache_path(path: str) -> str:
    if os.path.exists(path):
        return path
    cache_dir = os.environ.get("PATHDYN_CACHE_DIR")
    if cache_dir:
        candidate = os.path.join(cache_dir, path)
        if os.path.exists(candidate):
            return candidate
    return path


@main.command()
@click.argument("cache_path", type=click.Path(dir_okay=False))
@click.option("--region", "region_text", required=True,
              help='Region: "circle:cx,cy,r", "ellipse:cx,cy,rx,ry" or "polygon:x1,y1,...".')
@click.option("--bins", default="auto", show_default=True, help='Bins per invariant or "auto".')
@click.option("--out-image", type=click.Path(dir_okay=False), default=None, help="PNG output.")
@click.option("--out-field", type=click.Path(dir_okay=False), default=None, help="Raw scalar-grid output.")
@click.option("--colormap", default="viridis", show_default=True,
              type=click.Choice(["viridis", "grayscale", "diverging"]))
@click.option("--workers", type=int, default=None)
@_fail_cleanly
def similarity(cache_path, region_text, bins, out_image, out_field, colormap, workers):
    """Divergence field of all pathlines against a reference region."""
    cache = store.load_cache(_resolve_cache_path(cache_path))
    region = distribution.parse_region_text(region_text)
    engine = simfield.SimilarityEngine(cache, workers=workers)
    n = bins if bins == "auto" else int(bins)
    fld, ref, timing = engine.query(region, n)
    click.echo(f"query: reference {timing['reference_ms']:.1f} ms, "
               f"field {timing['field_ms']:.1f} ms, n={fld.query.policy['n']}")
    finite = np.isfinite(fld.values)
    click.echo(f"divergence: mean {np.nanmean(fld.values):.4f}, "
               f"max {np.nanmax(fld.values):.4f}, masked {int((~finite).sum())} seeds")
    if out_image:
        simfield.render(fld, colormap, out_image)
        click.echo(f"wrote {out_image}")
    if out_field:
        simfield.export_field(fld, out_field)
        click.echo(f"wrote {out_field} (+ .json sidecar)")


@main.command()
@click.argument("field_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["flow_map", "localized", "strain_sum"]),
              default="flow_map", show_default=True)
@click.option("--t0", type=float, required=True)
@click.option("--tau", type=float, required=True)
@click.option("--dt", type=float, default=0.01, show_default=True)
@click.option("--rk-tol", type=float, default=1e-6, show_default=True)
@click.option("--stride", type=int, default=1, show_default=True)
@click.option("--out-image", type=click.Path(dir_okay=False), default=None)
@click.option("--out-field", type=click.Path(dir_okay=False), default=None)
@click.option("--colormap", default="viridis", show_default=True,
              type=click.Choice(["viridis", "grayscale", "diverging"]))
@click.option("--workers", type=int, default=None)
@_fail_cleanly
def ftle(field_path, method, t0, tau, dt, rk_tol, stride, out_image, out_field, colormap, workers):
    """Compute an FTLE (or reconstruction) field for validation."""
    fld = field_mod.load_dataset(field_path)
    params = IntegrationParams(t0=t0, tau=tau, dt_sample=dt, rk_tol=rk_tol)
    fn = {"flow_map": dynamics.ftle_flow_map,
          "localized": dynamics.ftle_localized_field,
          "strain_sum": dynamics.ftle_strain_sum_field}[method]
    result = fn(fld, params, stride=stride, workers=workers)
    finite = np.isfinite(result.values)
    click.echo(f"{method}: min {np.nanmin(result.values):.4f}, max {np.nanmax(result.values):.4f}, "
               f"defined {int(finite.sum())}/{result.values.size} seeds")
    if out_image:
        simfield.render_array(simfield.normalized(result.values), colormap, out_image)
        click.echo(f"wrote {out_image} (min-max normalized)")
    if out_field:
        div = simfield.DivergenceField(
            spec=result.spec, values=result.values,
            query=simfield.QueryProvenance(
                region={"kind": "ftle", "method": method}, t0=t0, tau=tau,
                dt_sample=dt, n_steps=params.n_steps, policy={},
                fingerprint=fld.fingerprint().hex(), rk_tol=rk_tol))
        simfield.export_field(div, out_field)
        click.echo(f"wrote {out_field} (+ .json sidecar)")


@main.command()
@click.argument("caches", nargs=-1, required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None, help="Default: $PATHDYN_PORT or 8000.")
@click.option("--ui", "ui_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Serve a built explorer UI from this directory.")
@_fail_cleanly
def serve(caches, host, port, ui_dir):
    """Serve loaded caches over the HTTP query API."""
    import uvicorn

    from .service import create_app

    loaded = {}
    for path in caches:
        resolved = _resolve_cache_path(path)
        cache_id = os.path.splitext(os.path.basename(resolved))[0]
        loaded[cache_id] = store.load_cache(resolved)
        click.echo(f"loaded cache {cache_id!r}: M={loaded[cache_id].m_seeds}, "
                   f"N={loaded[cache_id].n_steps}")
    app = create_app(loaded, ui_dir=ui_dir)
    port = port or int(os.environ.get("PATHDYN_PORT", "8000"))
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the query-request JSON schema (default: stdout).")
@_fail_cleanly
def schema(out):
    """Dump the JSON schema of the service query request (client contract)."""
    import json

    from .service import QueryRequest

    text = json.dumps(QueryRequest.model_json_schema(), indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


if __name__ == "__main__":
    main()
