"""Grid geometry, gradient stencil, and layer persistence."""

import hashlib
import json

import numpy as np
import pytest

from uncmap import (CellIndex, GridGeometry, GridLayer, MalformedFile,
                    OutOfBounds, cell_to_world, central_gradient,
                    export_pgm, load_layer, save_layer, world_to_cell)
from uncmap.errors import DegenerateGrid

from .conftest import make_layer


class TestGeometry:
    def test_cell_counts_and_extent(self):
        g = GridGeometry(resolution_c=0.5, origin=(-1.0, -1.0),
                         width=4, height=6)
        assert g.n_cells == 24
        assert g.extent == (-1.0, -1.0, 1.0, 2.0)

    @pytest.mark.parametrize("kwargs", [
        dict(resolution_c=0.0, origin=(0, 0), width=2, height=2),
        dict(resolution_c=-1.0, origin=(0, 0), width=2, height=2),
        dict(resolution_c=0.1, origin=(0, 0), width=0, height=2),
        dict(resolution_c=0.1, origin=(0, 0), width=2, height=-1),
    ])
    def test_invalid_geometry_rejected(self, kwargs):
        with pytest.raises(ValueError):
            GridGeometry(**kwargs)


class TestWorldToCell:
    def test_interior_of_first_cell(self):
        g = GridGeometry(0.1, (0.0, 0.0), 10, 10)
        assert world_to_cell(g, (0.05, 0.05)) == CellIndex(col=0, row=0)

    def test_edge_tie_break_toward_positive(self):
        g = GridGeometry(0.1, (0.0, 0.0), 10, 10)
        assert world_to_cell(g, (0.10, 0.00)) == CellIndex(col=1, row=0)

    def test_negative_origin(self):
        g = GridGeometry(0.5, (-1.0, -1.0), 10, 10)
        assert world_to_cell(g, (0.26, 0.9)) == CellIndex(col=2, row=3)

    def test_out_of_bounds_raises(self):
        g = GridGeometry(0.1, (0.0, 0.0), 10, 10)
        with pytest.raises(OutOfBounds):
            world_to_cell(g, (1.5, 0.5))

    def test_round_trip_center(self):
        g = GridGeometry(0.2, (-2.0, 3.0), 30, 20)
        cell = CellIndex(col=7, row=11)
        assert world_to_cell(g, cell_to_world(g, cell)) == cell


class TestCentralGradient:
    def test_constant_layer_zero(self):
        layer = make_layer(np.full((5, 5), 3.7))
        assert np.all(central_gradient(layer) == 0.0)

    def test_linear_ramp(self):
        g = GridGeometry(0.1, (0.0, 0.0), 6, 5)
        xs = (np.arange(6) + 0.5) * 0.1
        layer = GridLayer(g, np.tile(xs, (5, 1)), "uncertainty")
        grad = central_gradient(layer)
        assert np.allclose(grad[:, 1:-1, 0], 1.0)
        assert np.allclose(grad[..., 1], 0.0)

    def test_step_magnitude(self):
        # 5x5, +0.3 step between columns 2 and 3, c = 0.1: the central
        # difference sees 0.3 / (2 * 0.1) = 1.5 on the flanking columns
        v = np.zeros((5, 5))
        v[:, 3:] = 0.3
        grad = central_gradient(make_layer(v))
        mag = np.hypot(grad[..., 0], grad[..., 1])
        assert np.allclose(mag[1:-1, 2], 1.5)
        assert np.allclose(mag[1:-1, 3], 1.5)
        assert np.allclose(mag[1:-1, 1], 0.0)

    def test_too_small_grid_rejected(self):
        with pytest.raises(DegenerateGrid):
            central_gradient(make_layer(np.zeros((2, 5))))


class TestPersistence:
    def test_round_trip(self, tmp_path, rng):
        g = GridGeometry(0.25, (1.0, -2.0), 8, 6)
        layer = GridLayer(g, rng.normal(size=48), "log_odds")
        save_layer(layer, tmp_path / "layer")
        back = load_layer(tmp_path / "layer")
        assert back.geometry == layer.geometry
        assert back.semantic == "log_odds"
        assert np.array_equal(back.values, layer.values)

    def test_hand_written_fixture_exact_values(self, tmp_path):
        values = np.array([[1.5, -2.25], [0.0, 3e-7], [1e9, -0.5]])
        blob = values.astype("<f8").tobytes()
        meta = {"resolution_c": 0.5, "origin": [0.0, 0.0],
                "width": 2, "height": 3, "semantic": "uncertainty",
                "sha256_of_blob": hashlib.sha256(blob).hexdigest()}
        (tmp_path / "x.f64").write_bytes(blob)
        (tmp_path / "x.json").write_text(json.dumps(meta))
        layer = load_layer(tmp_path / "x")
        assert np.array_equal(layer.values, values)

    def test_count_mismatch_rejected(self, tmp_path):
        layer = GridLayer(GridGeometry(0.1, (0, 0), 3, 2), np.zeros(6))
        save_layer(layer, tmp_path / "bad")
        meta = json.loads((tmp_path / "bad.json").read_text())
        meta["width"] = 4
        (tmp_path / "bad.json").write_text(json.dumps(meta))
        with pytest.raises(MalformedFile):
            load_layer(tmp_path / "bad")

    def test_checksum_mismatch_rejected(self, tmp_path):
        layer = GridLayer(GridGeometry(0.1, (0, 0), 3, 2), np.zeros(6))
        save_layer(layer, tmp_path / "bad")
        blob = bytearray((tmp_path / "bad.f64").read_bytes())
        blob[0] ^= 0xFF
        (tmp_path / "bad.f64").write_bytes(bytes(blob))
        with pytest.raises(MalformedFile):
            load_layer(tmp_path / "bad")

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(MalformedFile):
            load_layer(tmp_path / "nope")

    def test_export_pgm(self, tmp_path):
        layer = make_layer(np.arange(12, dtype=float).reshape(3, 4))
        export_pgm(layer, tmp_path / "img.pgm")
        data = (tmp_path / "img.pgm").read_bytes()
        assert data.startswith(b"P5\n4 3\n255\n")
        assert len(data) == len(b"P5\n4 3\n255\n") + 12


class TestLayer:
    def test_filled_and_indexing(self):
        g = GridGeometry(0.1, (0, 0), 4, 3)
        layer = GridLayer.filled(g, -2.0)
        cell = CellIndex(col=2, row=1)
        assert layer[cell] == -2.0
        layer[cell] = 5.0
        assert layer.values[1, 2] == 5.0

    def test_bad_semantic_rejected(self):
        g = GridGeometry(0.1, (0, 0), 2, 2)
        with pytest.raises(ValueError):
            GridLayer(g, np.zeros(4), "wavelength")

    def test_size_mismatch_rejected(self):
        g = GridGeometry(0.1, (0, 0), 2, 2)
        with pytest.raises(ValueError):
            GridLayer(g, np.zeros(5))
