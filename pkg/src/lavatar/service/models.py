"""Pydantic request/response schemas for the HTTP service."""

from __future__ import annotations

import math

from pydantic import BaseModel, Field

from ..types import Camera


class BakeRequest(BaseModel):
    preset: str = "ellipsoid"
    asset_id: str | None = None
    seed: int | None = None
    layers: int | None = None
    warps: int | None = None
    textures: int | None = None
    p: int | None = None
    texture_style: str | None = None
    warp_style: str | None = None
    grid_res: int = 128
    tex_res: int = 128
    warp_res: int | None = None
    specular: bool = False
    deflate: bool = False


class AssetMetaModel(BaseModel):
    asset_id: str
    N: int
    W: int
    T: int
    p: int
    grid_res: list[int]
    tex_res: int
    warp_res: int
    scene_center: list[float]
    has_specular: bool
    file_size: int
    chunks: dict[str, int]
    frames: int = 0


class BakeResponse(BaseModel):
    asset_id: str
    meta: AssetMetaModel


class CameraModel(BaseModel):
    position: list[float] = Field(min_length=3, max_length=3)
    target: list[float] = Field(min_length=3, max_length=3)
    up: list[float] = Field(default=[0.0, 1.0, 0.0], min_length=3, max_length=3)
    fov_deg: float = 30.0
    width: int = 256
    height: int = 256
    near: float = 0.05
    far: float = 100.0

    def to_camera(self) -> Camera:
        return Camera(
            position=self.position,
            target=self.target,
            up=self.up,
            fov_y=math.radians(self.fov_deg),
            width=self.width,
            height=self.height,
            near=self.near,
            far=self.far,
        )


class RenderRequest(BaseModel):
    params: list[float]
    camera: CameraModel
    mode: str = "prebaked"
    background: list[float] = Field(default=[0.0, 0.0, 0.0], min_length=3, max_length=3)


class FramesRequest(BaseModel):
    frames: list[list[float]]


class FramesResponse(BaseModel):
    asset_id: str
    frames: int


class HealthResponse(BaseModel):
    status: str
    version: str
