import json

import numpy as np
import pytest

from sardamage.geodata import (
    BuildingFootprint,
    FormatError,
    GeoTransform,
    ProbabilityMap,
    RasterLayer,
    decode_uint8,
    encode_uint8,
    read_footprints,
    read_labels,
    read_probability_map,
    read_stack,
    read_uint8_bundle,
    write_probability_map,
    write_stack,
    write_uint8_bundle,
)

from testutil import make_stack, metric_transform


class TestGeoTransform:
    def test_center_mapping(self):
        t = GeoTransform(origin_x=100.0, origin_y=200.0, pixel_w=10.0, pixel_h=-10.0)
        assert t.pixel_to_crs(0, 0) == (105.0, 195.0)
        assert t.pixel_to_crs(3, 2) == (135.0, 175.0)

    def test_pixel_crs_bijection(self):
        t = GeoTransform(origin_x=-3.5, origin_y=81.25, pixel_w=0.25, pixel_h=-0.125)
        for col in range(7):
            for row in range(9):
                x, y = t.pixel_to_crs(col, row)
                assert t.crs_to_pixel(x, y) == (col, row)

    def test_invalid_pixel_sizes(self):
        with pytest.raises(ValueError):
            GeoTransform(origin_x=0, origin_y=0, pixel_w=-1.0, pixel_h=-1.0)
        with pytest.raises(ValueError):
            GeoTransform(origin_x=0, origin_y=0, pixel_w=1.0, pixel_h=0.0)

    def test_cell_bounds_normalized(self):
        t = GeoTransform(origin_x=0.0, origin_y=40.0, pixel_w=10.0, pixel_h=-10.0)
        assert t.cell_bounds(0, 0) == (0.0, 30.0, 10.0, 40.0)


class TestStackBundle:
    def test_round_trip_bit_exact(self, tmp_path):
        values = np.array([[-10.5, np.nan], [0.0, 3.25]], dtype=np.float32)
        stack = make_stack([(values, "2020-03-15", 44, "ASC", "VV")], 2, 2)
        write_stack(stack, tmp_path / "bundle")
        again = read_stack(tmp_path / "bundle")
        a = stack.layers[0].values
        b = again.layers[0].values
        assert np.array_equal(a.view(np.uint32), b.view(np.uint32))  # NaN bits too
        assert again.layers[0].timestamp == stack.layers[0].timestamp
        assert again.transform == stack.transform

    def test_payload_bytes_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        values = rng.uniform(-30, 5, size=(5, 7)).astype(np.float32)
        stack = make_stack([(values, "2021-01-01", 7, "DESC", "VH")], 7, 5)
        write_stack(stack, tmp_path / "b1")
        again = read_stack(tmp_path / "b1")
        write_stack(again, tmp_path / "b2")
        assert (tmp_path / "b1" / "layer_0000.f32").read_bytes() == (
            tmp_path / "b2" / "layer_0000.f32"
        ).read_bytes()

    def test_missing_layer_file_named(self, tmp_path):
        values = np.zeros((2, 2), dtype=np.float32)
        stack = make_stack(
            [
                (values, "2020-03-15", 44, "ASC", "VV"),
                (values, "2020-03-27", 44, "ASC", "VH"),
                (values, "2020-04-08", 44, "ASC", "VV"),
            ],
            2,
            2,
        )
        write_stack(stack, tmp_path / "bundle")
        (tmp_path / "bundle" / "layer_0001.f32").unlink()
        with pytest.raises(FormatError, match="layer_0001"):
            read_stack(tmp_path / "bundle")

    def test_unknown_polarization_rejected(self, tmp_path):
        values = np.zeros((2, 2), dtype=np.float32)
        stack = make_stack([(values, "2020-03-15", 44, "ASC", "VV")], 2, 2)
        write_stack(stack, tmp_path / "bundle")
        meta = json.loads((tmp_path / "bundle" / "meta.json").read_text())
        meta["layers"][0]["polarization"] = "HH"
        (tmp_path / "bundle" / "meta.json").write_text(json.dumps(meta))
        with pytest.raises(FormatError, match="HH"):
            read_stack(tmp_path / "bundle")

    def test_dimension_mismatch_rejected(self, tmp_path):
        values = np.zeros((2, 2), dtype=np.float32)
        stack = make_stack([(values, "2020-03-15", 44, "ASC", "VV")], 2, 2)
        write_stack(stack, tmp_path / "bundle")
        (tmp_path / "bundle" / "layer_0000.f32").write_bytes(b"\x00" * 12)
        with pytest.raises(FormatError, match="expected 4"):
            read_stack(tmp_path / "bundle")

    def test_direct_layer_validation(self):
        with pytest.raises(FormatError):
            RasterLayer(
                values=np.zeros((2, 2), dtype=np.float32),
                timestamp=None,
                orbit=1,
                direction="SIDEWAYS",
                polarization="VV",
            )


class TestProbabilityMap:
    def test_bundle_round_trip(self, tmp_path):
        values = np.array([[0.0, 0.5], [np.nan, 1.0]], dtype=np.float32)
        pmap = ProbabilityMap(
            width=2, height=2, transform=metric_transform(2, 2),
            period_index=5, values=values,
        )
        write_probability_map(pmap, tmp_path / "p5")
        again = read_probability_map(tmp_path / "p5")
        assert np.array_equal(
            pmap.values.view(np.uint32), again.values.view(np.uint32)
        )
        assert again.period_index == 5

    def test_range_enforced(self):
        with pytest.raises(ValueError):
            ProbabilityMap(
                width=1, height=1, transform=metric_transform(1, 1),
                period_index=1, values=np.array([[1.5]], dtype=np.float32),
            )


class TestUint8Export:
    def test_endpoints(self):
        codes, mask, _ = encode_uint8(np.array([[0.0, 1.0]]))
        assert codes.tolist() == [[0, 255]]
        assert not mask.any()

    def test_documented_value(self):
        codes, _, _ = encode_uint8(np.array([[0.655]]))
        assert codes[0, 0] == 167

    def test_round_trip_error_bound(self):
        rng = np.random.default_rng(99)
        # the data model stores float32 probabilities
        p = rng.uniform(0, 1, size=10_000).astype(np.float32)
        codes, mask, _ = encode_uint8(p.reshape(100, 100))
        back = decode_uint8(codes, mask)
        err = np.abs(back.ravel().astype(np.float64) - p.astype(np.float64))
        assert err.max() <= 1 / 510 + 1e-12

    def test_monotone_encoding(self):
        rng = np.random.default_rng(7)
        p = np.sort(rng.uniform(0, 1, size=10_000))
        codes, _, _ = encode_uint8(p.reshape(1, -1))
        assert np.all(np.diff(codes.ravel().astype(int)) >= 0)

    def test_nan_uses_free_code_when_available(self):
        codes, mask, nan_code = encode_uint8(np.array([[0.2, np.nan]]))
        assert nan_code == 255
        assert codes[0, 1] == 255
        assert mask[0, 1]

    def test_nan_falls_back_to_zero_when_255_taken(self):
        codes, mask, nan_code = encode_uint8(np.array([[1.0, np.nan]]))
        assert nan_code == 0
        assert codes[0, 1] == 0
        assert mask[0, 1] and not mask[0, 0]

    def test_export_on_map(self):
        from sardamage.geodata import export_uint8

        pmap = ProbabilityMap(
            width=2, height=1, transform=metric_transform(2, 1),
            period_index=3, values=np.array([[0.655, np.nan]], dtype=np.float32),
        )
        codes, mask, nan_code = export_uint8(pmap)
        assert codes[0, 0] == 167
        assert mask[0, 1] and nan_code == 255

    def test_uint8_bundle_round_trip(self, tmp_path):
        values = np.array([[0.0, np.nan, 0.25], [1.0, 0.655, 0.5]], dtype=np.float32)
        pmap = ProbabilityMap(
            width=3, height=2, transform=metric_transform(3, 2),
            period_index=6, values=values,
        )
        write_uint8_bundle(pmap, tmp_path / "u8")
        again = read_uint8_bundle(tmp_path / "u8")
        assert np.isnan(again.values[0, 1])
        finite = ~np.isnan(values)
        assert np.all(np.abs(again.values[finite] - values[finite]) <= 1 / 510 + 1e-7)


LABELS_GEOJSON = {
    "type": "FeatureCollection",
    "features": [
        {
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [15.0, 35.0]},
            "properties": {
                "id": "p1",
                "damage_class": "destroyed",
                "unosat_date": "2022-05-10",
                "aoi": "testtown",
            },
        },
        {
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [25.0, 35.0]},
            "properties": {
                "id": "p2",
                "damage_class": "moderately_damaged",
                "unosat_date": "2022-05-10",
            },
        },
    ],
}


class TestReadLabels:
    def test_classes_and_positivity(self, tmp_path):
        path = tmp_path / "labels.geojson"
        path.write_text(json.dumps(LABELS_GEOJSON))
        result = read_labels(path)
        assert [p.id for p in result.points] == ["p1", "p2"]
        assert result.points[0].is_positive
        assert not result.points[1].is_positive
        assert result.warnings == []

    def test_empty_collection(self, tmp_path):
        path = tmp_path / "empty.geojson"
        path.write_text(json.dumps({"type": "FeatureCollection", "features": []}))
        result = read_labels(path)
        assert result.points == []
        assert result.warnings == []

    def test_malformed_feature_warns_but_continues(self, tmp_path):
        doc = json.loads(json.dumps(LABELS_GEOJSON))
        doc["features"].insert(
            0,
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [1.0, 2.0]},
                "properties": {"damage_class": "destroyed"},  # missing date
            },
        )
        path = tmp_path / "labels.geojson"
        path.write_text(json.dumps(doc))
        result = read_labels(path)
        assert len(result.points) == 2
        assert len(result.warnings) == 1

    def test_not_a_collection(self, tmp_path):
        path = tmp_path / "bad.geojson"
        path.write_text(json.dumps({"type": "Feature"}))
        with pytest.raises(FormatError):
            read_labels(path)


def _square(x0, y0, size):
    return [[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size], [x0, y0]]


def _fc(features):
    return {"type": "FeatureCollection", "features": features}


def _poly_feature(fid, ring, **props):
    return {
        "type": "Feature",
        "geometry": {"type": "Polygon", "coordinates": [ring]},
        "properties": {"id": fid, **props},
    }


class TestReadFootprints:
    def test_small_footprints_dropped(self, tmp_path):
        doc = _fc(
            [
                _poly_feature("small", _square(0, 0, 7.06), area_m2=49.9),
                _poly_feature("big", _square(100, 100, 10), area_m2=100.0),
            ]
        )
        path = tmp_path / "fps.geojson"
        path.write_text(json.dumps(doc))
        result = read_footprints(path, min_area_m2=50.0)
        assert [f.id for f in result.footprints] == ["big"]
        assert result.dropped_small == 1

    def test_metric_area_computed_when_missing(self, tmp_path):
        doc = _fc([_poly_feature("b1", _square(1000.0, 2000.0, 9.0))])
        path = tmp_path / "fps.geojson"
        path.write_text(json.dumps(doc))
        result = read_footprints(path, min_area_m2=50.0)
        assert result.footprints[0].area_m2 == pytest.approx(81.0)

    def test_degree_area_equirectangular(self, tmp_path):
        # ~0.0001 deg square at lat 50: about (11.1m * cos50) * 11.1m ≈ 79 m²
        doc = _fc([_poly_feature("b1", _square(30.0, 50.0, 0.0001))])
        path = tmp_path / "fps.geojson"
        path.write_text(json.dumps(doc))
        result = read_footprints(path, min_area_m2=10.0)
        assert result.footprints[0].area_m2 == pytest.approx(79.4, abs=1.0)

    def test_malformed_geometry_warns(self, tmp_path):
        bad = {
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [[[0, 0], [1, 1]]]},
            "properties": {"id": "bad"},
        }
        doc = _fc([bad, _poly_feature("ok", _square(0, 0, 10), area_m2=100.0)])
        path = tmp_path / "fps.geojson"
        path.write_text(json.dumps(doc))
        result = read_footprints(path, min_area_m2=50.0)
        assert [f.id for f in result.footprints] == ["ok"]
        assert len(result.warnings) == 1

    def test_multipolygon_kept_as_parts(self, tmp_path):
        geom = {
            "type": "MultiPolygon",
            "coordinates": [[_square(0, 0, 10)], [_square(30, 30, 10)]],
        }
        doc = _fc(
            [{"type": "Feature", "geometry": geom, "properties": {"id": "mp", "area_m2": 200.0}}]
        )
        path = tmp_path / "fps.geojson"
        path.write_text(json.dumps(doc))
        result = read_footprints(path)
        assert len(result.footprints[0].parts) == 2

    def test_footprint_validation(self):
        with pytest.raises(ValueError):
            BuildingFootprint(id="x", parts=(([(0, 0), (1, 0), (1, 1)], []),), area_m2=0.0)
