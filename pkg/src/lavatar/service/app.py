"""FastAPI service wrapping the avatar toolkit.

REST endpoints bake, inspect, download and render assets; the WebSocket
endpoint bridges streaming sessions, carrying exactly the framed session
bytes of PROTOCOL.md (one frame per binary message) so the browser viewer
and the TCP client share a single protocol.
"""

from __future__ import annotations

import io
import secrets
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .. import __version__, codec, protocol, raster, stream
from ..baker import bake_asset
from ..errors import CodecError, LavatarError
from ..imgio import write_png
from ..scenes import SCENE_PRESETS, BakeConfig, make_scene
from ..types import ExpressionParams
from .models import (
    AssetMetaModel,
    BakeRequest,
    BakeResponse,
    FramesRequest,
    FramesResponse,
    HealthResponse,
    RenderRequest,
)
from .store import AssetEntry, AssetStore

VIEWER_DIST = Path(__file__).resolve().parents[3].parent / "frontend" / "dist"


def _meta_model(asset_id: str, entry: AssetEntry) -> AssetMetaModel:
    info = codec.inspect_container(entry.blob)
    return AssetMetaModel(
        asset_id=asset_id,
        N=info["N"],
        W=info["W"],
        T=info["T"],
        p=info["p"],
        grid_res=info["grid_res"],
        tex_res=info["tex_res"],
        warp_res=info["warp_res"],
        scene_center=info["scene_center"],
        has_specular=info["has_specular"],
        file_size=info["file_size"],
        chunks=info["chunks"],
        frames=len(entry.frames),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="lavatar", version=__version__)
    store = AssetStore()
    app.state.store = store

    def entry_or_404(asset_id: str) -> AssetEntry:
        entry = store.get(asset_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"no asset {asset_id!r}")
        return entry

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return HealthResponse(status="ok", version=__version__)

    @app.get("/assets")
    def list_assets() -> list[str]:
        return store.ids()

    @app.post("/assets/bake", response_model=BakeResponse)
    def bake(req: BakeRequest):
        if req.preset not in SCENE_PRESETS:
            raise HTTPException(status_code=422, detail=f"unknown preset {req.preset!r}")
        scene_kwargs = {}
        for key, value in (
            ("seed", req.seed),
            ("layers", req.layers),
            ("warps", req.warps),
            ("textures", req.textures),
            ("p", req.p),
            ("texture_style", req.texture_style),
            ("warp_style", req.warp_style),
        ):
            if value is not None:
                scene_kwargs[key] = value
        if req.specular:
            scene_kwargs["specular"] = True
        try:
            scene = make_scene(req.preset, **scene_kwargs)
            config = BakeConfig(
                grid_res=req.grid_res,
                tex_res=req.tex_res,
                warp_res=req.warp_res,
                include_specular=req.specular,
            )
            asset = bake_asset(scene, config)
        except (LavatarError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        blob = codec.encode_asset(asset, deflate=req.deflate)
        asset_id = req.asset_id or secrets.token_hex(6)
        entry = store.put(asset_id, asset, blob)
        return BakeResponse(asset_id=asset_id, meta=_meta_model(asset_id, entry))

    @app.put("/assets/{asset_id}/file", response_model=AssetMetaModel)
    async def put_file(asset_id: str, request: Request):
        blob = await request.body()
        try:
            asset = codec.decode_asset(blob)
        except CodecError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        entry = store.put(asset_id, asset, blob)
        return _meta_model(asset_id, entry)

    @app.get("/assets/{asset_id}/meta", response_model=AssetMetaModel)
    def meta(asset_id: str):
        return _meta_model(asset_id, entry_or_404(asset_id))

    @app.get("/assets/{asset_id}/file")
    def file(asset_id: str):
        entry = entry_or_404(asset_id)
        return Response(
            content=entry.blob,
            media_type="application/octet-stream",
            headers={"Content-Disposition": f'attachment; filename="{asset_id}.lava"'},
        )

    @app.post("/assets/{asset_id}/frames", response_model=FramesResponse)
    def set_frames(asset_id: str, req: FramesRequest):
        entry = entry_or_404(asset_id)
        p = entry.asset.meta.p
        frames = []
        for i, row in enumerate(req.frames):
            if len(row) != p:
                raise HTTPException(
                    status_code=422, detail=f"frame {i} has {len(row)} values, asset expects p={p}"
                )
            frames.append(ExpressionParams(row))
        store.set_frames(asset_id, frames)
        return FramesResponse(asset_id=asset_id, frames=len(frames))

    @app.post("/assets/{asset_id}/render")
    def render(asset_id: str, req: RenderRequest):
        entry = entry_or_404(asset_id)
        if len(req.params) != entry.asset.meta.p:
            raise HTTPException(
                status_code=422,
                detail=f"got {len(req.params)} params, asset expects p={entry.asset.meta.p}",
            )
        try:
            options = raster.RenderOptions(mode=req.mode, background=tuple(req.background))
            result = raster.render(
                entry.asset, ExpressionParams(req.params), req.camera.to_camera(), options
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        buf = io.BytesIO()
        write_png(buf, result.image)
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.websocket("/ws/assets/{asset_id}/session")
    async def ws_session(ws: WebSocket, asset_id: str):
        await ws.accept()
        entry = store.get(asset_id)
        if entry is None:
            await ws.send_bytes(
                protocol.frame_message(
                    protocol.MessageKind.ERROR,
                    protocol.pack_error(protocol.ERR_INTERNAL, f"no asset {asset_id!r}"),
                )
            )
            await ws.close()
            return
        mode = protocol.MODE_CLIENT_BLEND
        try:
            first = await ws.receive_bytes()
            kind, payload = protocol.split_message(first)
            if kind is protocol.MessageKind.HELLO:
                # The bridge honors whichever valid mode the client requests.
                _version, mode = protocol.parse_hello(payload)
            err = stream.validate_hello(kind, payload, mode)
            if err is not None:
                await ws.send_bytes(
                    protocol.frame_message(
                        protocol.MessageKind.ERROR, protocol.pack_error(err.code, str(err))
                    )
                )
                await ws.close()
                return
            for frame in stream.session_messages(entry.asset, entry.blob, entry.frames, mode):
                await ws.send_bytes(frame)
            await ws.close()
        except (WebSocketDisconnect, LavatarError):
            return

    if VIEWER_DIST.is_dir():
        app.mount("/viewer", StaticFiles(directory=str(VIEWER_DIST), html=True), name="viewer")

    return app
