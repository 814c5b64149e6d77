"""Detection-document ingestion and 2D-to-3D inventory construction.

The upstream vision stack (object detector + OCR) writes a JSON document per
frame; this module validates it, back-projects bounding-box centers onto the
table plane (z = 0 in the world frame), and produces an InventorySnapshot.
Snapshots replace each other wholesale; they are never merged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import normalize_text
from .errors import (
    BehindCameraError,
    MalformedDocumentError,
    RayParallelToPlaneError,
    SchemaViolationError,
)

DEFAULT_CONFIDENCE_THRESHOLD = 0.5
DEFAULT_VOLUME_ML = 700.0


@dataclass(frozen=True)
class Detection:
    label: str
    text: str
    bbox: tuple[float, float, float, float]  # (u_min, v_min, u_max, v_max) pixels
    confidence: float

    def center(self) -> tuple[float, float]:
        u0, v0, u1, v1 = self.bbox
        return (u0 + u1) / 2.0, (v0 + v1) / 2.0


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus the camera-to-world rigid transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray  # 3x3 camera->world
    translation: np.ndarray  # camera origin in world, meters

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise SchemaViolationError("camera", f"focal lengths must be > 0, got fx={self.fx}, fy={self.fy}")
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (3, 3):
            raise SchemaViolationError("camera.rotation", "must be a 3x3 matrix")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6) or abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise SchemaViolationError("camera.rotation", "must be orthonormal with determinant +1")
        object.__setattr__(self, "rotation", r)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True)
class InventoryItem:
    item_id: str
    label: str
    pose_world: tuple[float, float, float]
    available_ml: float
    readable: bool


@dataclass(frozen=True)
class InventorySnapshot:
    timestamp: str
    items: tuple[InventoryItem, ...]

    def by_id(self, item_id: str) -> InventoryItem | None:
        for item in self.items:
            if item.item_id == item_id:
                return item
        return None


@dataclass(frozen=True)
class DetectionDocument:
    timestamp: str
    camera: CameraModel
    detections: tuple[Detection, ...]


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise SchemaViolationError(f"{path}.{key}" if path else key, "missing field")
    return mapping[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolationError(path, f"expected number, got {value!r}")
    return float(value)


def parse_document(document: bytes | str) -> DetectionDocument:
    """Parse and validate a full detection document (timestamp + camera + detections)."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocumentError(f"not UTF-8: {exc}") from exc
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolationError("", "top level must be an object")

    timestamp = str(_require(doc, "timestamp", ""))

    cam_doc = _require(doc, "camera", "")
    if not isinstance(cam_doc, dict):
        raise SchemaViolationError("camera", "must be an object")
    rotation = _require(cam_doc, "rotation", "camera")
    if not isinstance(rotation, list) or len(rotation) != 9:
        raise SchemaViolationError("camera.rotation", "must be a list of 9 numbers (row-major)")
    translation = _require(cam_doc, "translation", "camera")
    if not isinstance(translation, list) or len(translation) != 3:
        raise SchemaViolationError("camera.translation", "must be a list of 3 numbers")
    camera = CameraModel(
        fx=_number(_require(cam_doc, "fx", "camera"), "camera.fx"),
        fy=_number(_require(cam_doc, "fy", "camera"), "camera.fy"),
        cx=_number(_require(cam_doc, "cx", "camera"), "camera.cx"),
        cy=_number(_require(cam_doc, "cy", "camera"), "camera.cy"),
        rotation=np.array([_number(x, "camera.rotation") for x in rotation]).reshape(3, 3),
        translation=np.array([_number(x, "camera.translation") for x in translation]),
    )

    raw = _require(doc, "detections", "")
    if not isinstance(raw, list):
        raise SchemaViolationError("detections", "must be a list")
    detections = []
    for i, entry in enumerate(raw):
        path = f"detections[{i}]"
        if not isinstance(entry, dict):
            raise SchemaViolationError(path, "must be an object")
        bbox = _require(entry, "bbox", path)
        if not isinstance(bbox, list) or len(bbox) != 4:
            raise SchemaViolationError(f"{path}.bbox", "must be [u_min, v_min, u_max, v_max]")
        u0, v0, u1, v1 = (_number(x, f"{path}.bbox") for x in bbox)
        if not (u0 < u1 and v0 < v1):
            raise SchemaViolationError(f"{path}.bbox", f"degenerate box {bbox}")
        confidence = _number(_require(entry, "confidence", path), f"{path}.confidence")
        if not (0.0 <= confidence <= 1.0):
            raise SchemaViolationError(f"{path}.confidence", f"must be in [0, 1], got {confidence}")
        detections.append(
            Detection(
                label=str(_require(entry, "label", path)),
                text=str(entry.get("text", "")),
                bbox=(u0, v0, u1, v1),
                confidence=confidence,
            )
        )
    return DetectionDocument(timestamp=timestamp, camera=camera, detections=tuple(detections))


def parse_detections(document: bytes | str) -> list[Detection]:
    """Parse a detection document and return just the validated detections."""
    return list(parse_document(document).detections)


def backproject(pixel: tuple[float, float], cam: CameraModel) -> tuple[float, float, float]:
    """Intersect the camera ray through a pixel with the table plane z = 0.

    Ray direction in the world frame is R @ ((u-cx)/fx, (v-cy)/fy, 1); the
    intersection parameter is t = -o_z / d_z for camera origin o.
    """
    u, v = pixel
    d_cam = np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
    d = cam.rotation @ d_cam
    o = cam.translation
    if abs(d[2]) < 1e-12:
        raise RayParallelToPlaneError(f"ray through pixel ({u}, {v}) is parallel to the table plane")
    t = -o[2] / d[2]
    if t <= 0:
        raise BehindCameraError(f"table intersection for pixel ({u}, {v}) lies behind the camera (t={t:.3g})")
    p = o + t * d
    return (float(p[0]), float(p[1]), 0.0)


def build_snapshot(
    detections: list[Detection],
    cam: CameraModel,
    volume_defaults: dict[str, float] | None = None,
    *,
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
    default_volume_ml: float = DEFAULT_VOLUME_ML,
    timestamp: str = "",
) -> InventorySnapshot:
    """Turn validated detections into an InventorySnapshot.

    Detections below the confidence threshold are dropped. The label comes
    from the OCR text when present (readable=True), else from the detector
    class (readable=False). Available volume is seeded from the per-label
    defaults table since vision cannot observe fill level.
    """
    volume_defaults = volume_defaults or {}
    items = []
    for i, det in enumerate(detections):
        if det.confidence < confidence_threshold:
            continue
        readable = det.text.strip() != ""
        label = normalize_text(det.text) if readable else normalize_text(det.label)
        pose = backproject(det.center(), cam)
        items.append(
            InventoryItem(
                item_id=f"item-{i:03d}",
                label=label,
                pose_world=pose,
                available_ml=float(volume_defaults.get(label, default_volume_ml)),
                readable=readable,
            )
        )
    return InventorySnapshot(timestamp=timestamp, items=tuple(items))


def snapshot_from_document(
    document: bytes | str,
    volume_defaults: dict[str, float] | None = None,
    *,
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
    default_volume_ml: float = DEFAULT_VOLUME_ML,
) -> InventorySnapshot:
    doc = parse_document(document)
    return build_snapshot(
        list(doc.detections),
        doc.camera,
        volume_defaults,
        confidence_threshold=confidence_threshold,
        default_volume_ml=default_volume_ml,
        timestamp=doc.timestamp,
    )


def snapshot_to_dict(snapshot: InventorySnapshot) -> dict:
    return {
        "timestamp": snapshot.timestamp,
        "items": [
            {
                "item_id": item.item_id,
                "label": item.label,
                "pose_world": list(item.pose_world),
                "available_ml": item.available_ml,
                "readable": item.readable,
            }
            for item in snapshot.items
        ],
    }
