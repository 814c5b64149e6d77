from __future__ import annotations

import json
import math
import random

import numpy as np
import pytest

from mixcell.errors import (
    BehindCameraError,
    MalformedDocumentError,
    RayParallelToPlaneError,
    SchemaViolationError,
)
from mixcell.perception import (
    CameraModel,
    backproject,
    build_snapshot,
    parse_detections,
    parse_document,
    snapshot_from_document,
)

from conftest import look_at_camera, make_detection_doc, project_pinhole


class TestParseDetections:
    def test_valid_document_round_trips(self):
        doc = make_detection_doc(
            [
                {"text": "Lime Juice", "confidence": 0.95},
                {"text": "", "label": "bottle"},
                {"text": "Gin", "confidence": 0.7},
            ]
        )
        detections = parse_detections(doc)
        assert len(detections) == 3
        assert detections[0].text == "Lime Juice"
        assert detections[1].label == "bottle"

    def test_malformed_json(self):
        with pytest.raises(MalformedDocumentError):
            parse_detections(b'{"timestamp": ')

    def test_degenerate_bbox_names_field(self):
        doc = make_detection_doc([{"bbox": [200.0, 100.0, 100.0, 140.0]}])
        with pytest.raises(SchemaViolationError) as exc_info:
            parse_detections(doc)
        assert "bbox" in exc_info.value.field

    def test_out_of_range_confidence_names_field(self):
        doc = make_detection_doc([{"confidence": 1.3}])
        with pytest.raises(SchemaViolationError) as exc_info:
            parse_detections(doc)
        assert "confidence" in exc_info.value.field

    def test_missing_camera_field(self):
        raw = json.loads(make_detection_doc([]))
        del raw["camera"]["fx"]
        with pytest.raises(SchemaViolationError) as exc_info:
            parse_detections(json.dumps(raw).encode())
        assert exc_info.value.field == "camera.fx"

    def test_non_orthonormal_rotation_rejected(self):
        raw = json.loads(make_detection_doc([]))
        raw["camera"]["rotation"] = [1, 0, 0, 0, 1, 0, 0, 0, 2]
        with pytest.raises(SchemaViolationError):
            parse_detections(json.dumps(raw).encode())

    def test_timestamp_preserved(self):
        doc = parse_document(make_detection_doc([]))
        assert doc.timestamp == "2026-01-01T00:00:00Z"


class TestBackproject:
    def test_principal_point_maps_to_origin(self, overhead_camera):
        cam = overhead_camera
        point = backproject((cam.cx, cam.cy), cam)
        assert point == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)

    def test_one_focal_length_offset_is_one_meter(self):
        # Camera 1 m above the table looking straight down, fx = fy = 500:
        # the ray through (cx+500, cy) is 45 degrees out, so it lands 1 m
        # along the camera x-axis, which the mount maps to world +x.
        cam = CameraModel(
            fx=500.0,
            fy=500.0,
            cx=320.0,
            cy=240.0,
            rotation=np.array([[1.0, 0, 0], [0, -1.0, 0], [0, 0, -1.0]]),
            translation=np.array([0.0, 0.0, 1.0]),
        )
        point = backproject((cam.cx + 500.0, cam.cy), cam)
        assert point == pytest.approx((1.0, 0.0, 0.0), abs=1e-12)

    def test_ray_parallel_to_plane(self):
        # Camera looking horizontally: the principal ray never meets z = 0.
        cam = CameraModel(
            fx=500.0,
            fy=500.0,
            cx=320.0,
            cy=240.0,
            # camera z -> world +x, camera x -> world +y, camera y -> world +z
            rotation=np.array([[0.0, 0, 1.0], [1.0, 0, 0], [0, 1.0, 0]]),
            translation=np.array([0.0, 0.0, 0.5]),
        )
        with pytest.raises(RayParallelToPlaneError):
            backproject((cam.cx, cam.cy), cam)

    def test_intersection_behind_camera(self):
        # Camera below the plane looking further down: intersection at t < 0.
        cam = CameraModel(
            fx=500.0,
            fy=500.0,
            cx=320.0,
            cy=240.0,
            rotation=np.array([[1.0, 0, 0], [0, -1.0, 0], [0, 0, -1.0]]),
            translation=np.array([0.0, 0.0, -1.0]),
        )
        with pytest.raises(BehindCameraError):
            backproject((cam.cx, cam.cy), cam)

    def test_round_trip_recovers_table_points(self):
        # Project random table points with an independent forward model,
        # then back-project; 1000 valid pairs must agree to 1e-6 m.
        rng = random.Random(424242)
        checked = 0
        while checked < 1000:
            position = (
                rng.uniform(-1.5, 1.5),
                rng.uniform(-1.5, 1.5),
                rng.uniform(0.3, 2.5),
            )
            target = (rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0.0)
            cam = look_at_camera(position, target, fx=rng.uniform(300, 900), fy=rng.uniform(300, 900))
            point = (
                target[0] + rng.uniform(-0.3, 0.3),
                target[1] + rng.uniform(-0.3, 0.3),
                0.0,
            )
            u, v, depth = project_pinhole(point, cam)
            if u is None or depth < 0.05:
                continue
            recovered = backproject((u, v), cam)
            assert math.dist(recovered, point) < 1e-6
            checked += 1


class TestBuildSnapshot:
    def test_readable_label_from_text(self, overhead_camera):
        detections = parse_detections(make_detection_doc([{"text": "Lime Juice"}]))
        snapshot = build_snapshot(detections, overhead_camera)
        assert snapshot.items[0].label == "lime juice"
        assert snapshot.items[0].readable is True

    def test_unreadable_label_from_detector_class(self, overhead_camera):
        detections = parse_detections(make_detection_doc([{"text": "", "label": "Bottle"}]))
        snapshot = build_snapshot(detections, overhead_camera)
        assert snapshot.items[0].label == "bottle"
        assert snapshot.items[0].readable is False

    def test_unique_item_ids(self, overhead_camera):
        detections = parse_detections(
            make_detection_doc([{"text": "gin"}, {"text": "gin"}])
        )
        snapshot = build_snapshot(detections, overhead_camera)
        ids = [item.item_id for item in snapshot.items]
        assert len(set(ids)) == 2

    def test_confidence_threshold_filters(self, overhead_camera):
        detections = parse_detections(
            make_detection_doc([{"text": "gin", "confidence": 0.4}, {"text": "rum", "confidence": 0.8}])
        )
        snapshot = build_snapshot(detections, overhead_camera, confidence_threshold=0.5)
        assert [item.label for item in snapshot.items] == ["rum"]

    def test_monotone_filtering(self, overhead_camera):
        detections = parse_detections(
            make_detection_doc(
                [{"text": f"b{i}", "confidence": 0.1 * i} for i in range(1, 10)]
            )
        )
        previous = None
        for threshold in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]:
            snapshot = build_snapshot(detections, overhead_camera, confidence_threshold=threshold)
            labels = {item.label for item in snapshot.items}
            if previous is not None:
                assert labels <= previous
            previous = labels

    def test_idempotent_including_order(self, overhead_camera):
        detections = parse_detections(
            make_detection_doc([{"text": "gin"}, {"text": "rum"}, {"text": "cola"}])
        )
        a = build_snapshot(detections, overhead_camera, timestamp="t")
        b = build_snapshot(detections, overhead_camera, timestamp="t")
        assert a == b

    def test_volume_defaults_table(self, overhead_camera):
        detections = parse_detections(make_detection_doc([{"text": "gin"}, {"text": "rum"}]))
        snapshot = build_snapshot(
            detections, overhead_camera, volume_defaults={"gin": 350.0}, default_volume_ml=700.0
        )
        by_label = {item.label: item.available_ml for item in snapshot.items}
        assert by_label == {"gin": 350.0, "rum": 700.0}

    def test_items_lie_on_table_plane(self, overhead_camera):
        detections = parse_detections(make_detection_doc([{"text": "gin"}]))
        snapshot = build_snapshot(detections, overhead_camera)
        assert abs(snapshot.items[0].pose_world[2]) < 1e-9

    def test_empty_input_empty_snapshot(self, overhead_camera):
        assert build_snapshot([], overhead_camera).items == ()

    def test_snapshot_from_document(self):
        snapshot = snapshot_from_document(make_detection_doc([{"text": "gin"}]))
        assert snapshot.timestamp == "2026-01-01T00:00:00Z"
        assert snapshot.items[0].label == "gin"
