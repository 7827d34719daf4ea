"""HTTP query service for the interactive region-exploration loop.

Caches are loaded once at startup and shared immutably between requests;
queries never touch velocity data.  Responses carry full provenance and the
reference/field timing split so clients can display where the latency goes.

Endpoints (see docs/API.md for the field-level reference):

    GET  /datasets                    loaded caches and their geometry
    GET  /cache/{id}/info             one cache's header
    POST /cache/{id}/query            region query -> divergence field
    GET  /cache/{id}/probe?x=&y=&n=   per-seed histogram and progressions

Error codes: 400 malformed request bodies, 404 unknown cache or probe
outside the seed grid, 422 region selecting no seeds.
"""

from __future__ import annotations

import base64
import io
from typing import Literal, Union

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, field_validator

from .distribution import EmptyRegionError, Region
from .simfield import SimilarityEngine, render_array
from .store import DynamicsCache


class CircleRegion(BaseModel):
    kind: Literal["circle"]
    center: tuple[float, float]
    radius: float = Field(gt=0)


class EllipseRegion(BaseModel):
    kind: Literal["ellipse"]
    center: tuple[float, float]
    radii: tuple[float, float]

    @field_validator("radii")
    @classmethod
    def _positive(cls, v):
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("ellipse radii must be positive")
        return v


class PolygonRegion(BaseModel):
    kind: Literal["polygon"]
    vertices: list[tuple[float, float]] = Field(min_length=3, max_length=256)


RegionSpec = Union[CircleRegion, EllipseRegion, PolygonRegion]


class QueryRequest(BaseModel):
    """Region query against a loaded cache."""

    region: RegionSpec = Field(discriminator="kind")
    bins: Union[int, Literal["auto"]] = "auto"
    include_grid: bool = True
    include_raster: bool = False
    include_reference: bool = True
    probe: tuple[float, float] | None = None
    colormap: Literal["viridis", "grayscale", "diverging"] = "viridis"

    @field_validator("bins")
    @classmethod
    def _bins_range(cls, v):
        if isinstance(v, int) and not 2 <= v <= 4096:
            raise ValueError("bins must be in [2, 4096]")
        return v


def _region_from_model(model: RegionSpec) -> Region:
    return Region.from_dict(model.model_dump())


def _grid_b64(values: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(values, dtype="<f4").tobytes()).decode("ascii")


def _raster_b64(values: np.ndarray, colormap: str) -> str:
    buf = io.BytesIO()
    render_array(values, colormap, buf)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _nearest_seed(cache: DynamicsCache, x: float, y: float):
    sp = cache.seed_spec
    if not (sp.origin[0] <= x <= sp.x_max and sp.origin[1] <= y <= sp.y_max):
        return None
    i = int(round((x - sp.origin[0]) / sp.spacing[0]))
    j = int(round((y - sp.origin[1]) / sp.spacing[1]))
    i = min(max(i, 0), sp.nx - 1)
    j = min(max(j, 0), sp.ny - 1)
    return j * sp.nx + i, i, j


def _cache_summary(cache_id: str, cache: DynamicsCache) -> dict:
    sp = cache.seed_spec
    return {
        "id": cache_id,
        "seeds": cache.m_seeds,
        "nx": sp.nx,
        "ny": sp.ny,
        "n_steps": cache.n_steps,
        "t0": cache.t0,
        "tau": cache.tau,
        "dt_sample": cache.dt_sample,
        "direction": cache.direction,
        "origin": list(sp.origin),
        "spacing": list(sp.spacing),
        "extent": [sp.x_max, sp.y_max],
        "byte_size": cache.byte_size,
        "fingerprint": cache.fingerprint.hex(),
    }


def create_app(caches: dict[str, DynamicsCache], ui_dir=None,
               workers: int | None = None) -> FastAPI:
    """Build the service around a set of loaded caches."""
    app = FastAPI(title="pathdyn query service", version="0.1.0")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    engines = {cid: SimilarityEngine(c, workers=workers) for cid, c in caches.items()}

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        from fastapi.encoders import jsonable_encoder

        detail = jsonable_encoder(exc.errors(), custom_encoder={Exception: str})
        return JSONResponse(status_code=400, content={"error": "schema", "detail": detail})

    def _get_engine(cache_id: str) -> SimilarityEngine:
        engine = engines.get(cache_id)
        if engine is None:
            raise _NotFound(f"unknown cache {cache_id!r}")
        return engine

    class _NotFound(Exception):
        def __init__(self, message):
            self.message = message

    @app.exception_handler(_NotFound)
    async def _not_found(request: Request, exc: _NotFound):
        return JSONResponse(status_code=404, content={"error": "not_found", "detail": exc.message})

    @app.exception_handler(EmptyRegionError)
    async def _empty_region(request: Request, exc: EmptyRegionError):
        return JSONResponse(status_code=422, content={"error": "empty_region", "detail": str(exc)})

    @app.get("/datasets")
    def datasets():
        return {"caches": [_cache_summary(cid, caches[cid]) for cid in sorted(caches)]}

    @app.get("/cache/{cache_id}/info")
    def cache_info(cache_id: str):
        _get_engine(cache_id)
        return _cache_summary(cache_id, caches[cache_id])

    @app.post("/cache/{cache_id}/query")
    def query(cache_id: str, req: QueryRequest):
        engine = _get_engine(cache_id)
        region = _region_from_model(req.region)
        fld, ref, timing = engine.query(region, req.bins)
        values = fld.values
        policy = engine.policy(req.bins)

        payload = {
            "cache_id": cache_id,
            "field": {
                "nx": fld.spec.nx,
                "ny": fld.spec.ny,
                "origin": list(fld.spec.origin),
                "spacing": list(fld.spec.spacing),
                "encoding": "float32 little-endian, y-major rows",
            },
            "reference_bins": None,
            "most_dissimilar": None,
            "probe": None,
            "timing": timing,
            "provenance": fld.query.to_dict() | {"cache_id": cache_id, "bins": policy.n},
        }
        if req.include_grid:
            payload["field"]["grid_b64"] = _grid_b64(values)
        if req.include_raster:
            payload["field"]["raster_png_b64"] = _raster_b64(values, req.colormap)
        if req.include_reference:
            payload["reference_bins"] = ref.bins.tolist()
            flat = values.ravel()
            if np.isfinite(flat).any():
                idx = int(np.nanargmax(flat))
                payload["most_dissimilar"] = _seed_payload(engine, idx, req.bins) | {
                    "divergence": float(flat[idx])}
        if req.probe is not None:
            near = _nearest_seed(engine.cache, req.probe[0], req.probe[1])
            if near is None:
                raise _NotFound(f"probe {req.probe} outside the seed grid")
            idx = near[0]
            div = float(values.ravel()[idx])
            payload["probe"] = _seed_payload(engine, idx, req.bins) | {
                "divergence": div if np.isfinite(div) else None}
        return payload

    def _seed_payload(engine: SimilarityEngine, index: int, n) -> dict:
        cache = engine.cache
        v = int(cache.valid_steps[index])
        bins = None
        if v > 0:
            bins = engine.seed_histogram(index, n).bins.tolist()
        return {
            "index": index,
            "seed": cache.seed_points[index].tolist(),
            "valid_steps": v,
            "bins": bins,
        }

    @app.get("/cache/{cache_id}/probe")
    def probe(cache_id: str, x: float, y: float, n: str = "auto"):
        engine = _get_engine(cache_id)
        near = _nearest_seed(engine.cache, x, y)
        if near is None:
            raise _NotFound(f"probe ({x}, {y}) outside the seed grid")
        idx, i, j = near
        if n == "auto":
            n_arg = "auto"
        else:
            try:
                n_arg = int(n)
            except ValueError:
                return JSONResponse(status_code=400,
                                    content={"error": "schema", "detail": f"bad bin count {n!r}"})
        cache = engine.cache
        v = int(cache.valid_steps[idx])
        out = _seed_payload(engine, idx, n_arg) | {
            "grid_index": [i, j],
            "alphas": cache.alphas[idx, :v].astype(float).tolist(),
            "betas": cache.betas[idx, :v].astype(float).tolist(),
        }
        return out

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
