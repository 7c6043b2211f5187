"""In-memory asset store shared by the service endpoints."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from ..types import AvatarAsset, ExpressionParams


@dataclass
class AssetEntry:
    asset: AvatarAsset
    blob: bytes
    frames: list[ExpressionParams] = field(default_factory=list)


class AssetStore:
    def __init__(self):
        self._entries: dict[str, AssetEntry] = {}
        self._lock = threading.Lock()

    def put(self, asset_id: str, asset: AvatarAsset, blob: bytes) -> AssetEntry:
        entry = AssetEntry(asset=asset, blob=blob)
        with self._lock:
            self._entries[asset_id] = entry
        return entry

    def get(self, asset_id: str) -> AssetEntry | None:
        with self._lock:
            return self._entries.get(asset_id)

    def set_frames(self, asset_id: str, frames: list[ExpressionParams]) -> None:
        with self._lock:
            self._entries[asset_id].frames = list(frames)

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._entries)
