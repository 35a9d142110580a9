import numpy as np
import pytest

from wlns.field import (
    Grid,
    ScalarField,
    SnapshotFormatError,
    VectorField,
    ball_mask,
    divergence,
    forward_transform,
    gradient,
    inverse_transform,
    laplacian,
    read_snapshot,
    read_vector_snapshot,
    rescale,
    rescale_profile,
    sample_scalar,
    sample_vector,
    write_snapshot,
)


def random_scalar(grid, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return ScalarField(grid, scale * rng.standard_normal((grid.n,) * 3))


class TestGrid:
    def test_spacing_times_n_is_length(self):
        g = Grid(n=16, length=3.5)
        assert g.spacing * g.n == g.length

    @pytest.mark.parametrize("n", [7, 9, 6, 4, 0, -8])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            Grid(n=n)

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError):
            Grid(n=8, length=-1.0)

    def test_mode_numbers_layout(self):
        g = Grid(n=8)
        assert list(g.mode_numbers) == [0, 1, 2, 3, -4, -3, -2, -1]

    def test_dealias_two_thirds(self):
        g = Grid(n=12)
        keep = g.dealias_mask()
        # cutoff at 12/3 = 4: modes with any |m| > 4 are dropped
        m = g.mode_numbers
        for i in range(12):
            assert keep[i, 0, 0] == (abs(m[i]) <= 4)


class TestTransforms:
    def test_constant_field_single_mode(self):
        g = Grid(n=8)
        f = ScalarField(g, np.full((8, 8, 8), 2.5))
        spec = forward_transform(f)
        assert spec.modes[0, 0, 0] == pytest.approx(2.5)
        off = spec.modes.copy()
        off[0, 0, 0] = 0.0
        assert np.abs(off).max() < 1e-14

    def test_roundtrip_identity(self):
        g = Grid(n=16)
        for seed in range(5):
            f = random_scalar(g, seed)
            back = inverse_transform(forward_transform(f))
            assert np.abs(back.values - f.values).max() < 1e-12

    def test_parseval(self):
        g = Grid(n=16, length=4.0)
        for seed in range(5):
            f = random_scalar(g, seed)
            spec = forward_transform(f)
            mean_sq = np.mean(f.values**2)
            mode_sum = np.sum(np.abs(spec.modes) ** 2)
            assert mean_sq == pytest.approx(mode_sum, rel=1e-12)

    def test_hermitian_symmetry_of_real_fields(self):
        g = Grid(n=12)
        spec = forward_transform(random_scalar(g, 3))
        assert spec.hermitian_defect() < 1e-14

    def test_rejects_nonfinite(self):
        g = Grid(n=8)
        bad = np.zeros((8, 8, 8))
        bad[1, 2, 3] = np.nan
        with pytest.raises(ValueError):
            ScalarField(g, bad)


class TestDerivatives:
    def test_gradient_of_sine(self):
        g = Grid(n=32)
        f = sample_scalar(g, lambda X, Y, Z: np.sin(X))
        grad = gradient(f)
        X = g.coordinates[0]
        assert np.abs(grad.u1.values - np.cos(X)).max() < 1e-12
        assert np.abs(grad.u2.values).max() < 1e-13
        assert np.abs(grad.u3.values).max() < 1e-13

    def test_laplacian_of_sine(self):
        g = Grid(n=32)
        f = sample_scalar(g, lambda X, Y, Z: np.sin(X))
        lap = laplacian(f)
        assert np.abs(lap.values + f.values).max() < 1e-12

    def test_laplacian_equals_div_grad_on_random_data(self):
        g = Grid(n=16)
        for seed in range(4):
            f = random_scalar(g, seed)
            lap = laplacian(f)
            dg = divergence(gradient(f))
            scale = max(1.0, np.abs(lap.values).max())
            assert np.abs(lap.values - dg.values).max() / scale < 1e-12

    def test_divergence_of_curl_like_field(self):
        g = Grid(n=24)
        v = sample_vector(
            g,
            lambda X, Y, Z: (np.sin(Y), np.sin(Z), np.sin(X)),
        )
        div = divergence(v)
        assert np.abs(div.values).max() < 1e-12

    def test_wavenumbers_scale_with_box(self):
        g = Grid(n=32, length=4 * np.pi)
        f = sample_scalar(g, lambda X, Y, Z: np.sin(X / 2))
        lap = laplacian(f)
        assert np.abs(lap.values + 0.25 * f.values).max() < 1e-13


class TestRescale:
    def test_identity(self):
        g = Grid(n=16)
        f = random_scalar(g, 1)
        out = rescale(f, 1)
        assert np.abs(out.values - f.values).max() == 0.0

    def test_integer_zoom_matches_closed_form(self):
        g = Grid(n=32)
        f = sample_scalar(g, lambda X, Y, Z: np.sin(X) * np.cos(Y))
        zoom = rescale(f, 2)
        expected = sample_scalar(
            g, lambda X, Y, Z: 2 * np.sin(2 * X) * np.cos(2 * Y)
        )
        assert np.abs(zoom.values - expected.values).max() < 1e-12

    def test_rejects_fractional_eps(self):
        g = Grid(n=16)
        with pytest.raises(ValueError):
            rescale(random_scalar(g), 1.5)

    def test_rejects_off_grid_center(self):
        g = Grid(n=16)
        with pytest.raises(ValueError):
            rescale(random_scalar(g), 2, center=(0.1234, 0.0, 0.0))

    def test_profile_composition(self):
        # two zooms about the origin compose into one with the product factor
        def prof(X, Y, Z):
            return np.sin(X) + np.cos(Y + Z)

        g = Grid(n=16)
        once = rescale_profile(rescale_profile(prof, 2.0), 3.0)
        both = rescale_profile(prof, 6.0)
        a = sample_scalar(g, once)
        b = sample_scalar(g, both)
        assert np.abs(a.values - b.values).max() < 1e-12

    def test_vector_rescale_centre_shift(self):
        g = Grid(n=16)
        v = sample_vector(g, lambda X, Y, Z: (np.sin(X), np.sin(Y), np.sin(Z)))
        c = 4 * g.spacing
        out = rescale(v, 2, center=(c, c, c))
        expected = sample_vector(
            g,
            lambda X, Y, Z: (
                2 * np.sin(c + 2 * X),
                2 * np.sin(c + 2 * Y),
                2 * np.sin(c + 2 * Z),
            ),
        )
        for got, want in zip(out.components, expected.components):
            assert np.abs(got.values - want.values).max() < 1e-12


class TestSnapshots:
    def test_roundtrip(self, tmp_path):
        g = Grid(n=8, length=2.0)
        v = VectorField(g, random_scalar(g, 1), random_scalar(g, 2), random_scalar(g, 3))
        path = tmp_path / "snap.wlns"
        write_snapshot(path, 0.125, v)
        time, back = read_vector_snapshot(path)
        assert time == 0.125
        assert back.grid == g
        for a, b in zip(back.components, v.components):
            assert np.array_equal(a.values, b.values)

    def test_payload_is_x_fastest(self, tmp_path):
        g = Grid(n=8)
        X = g.coordinates[0]
        f = ScalarField(g, X.copy())
        path = tmp_path / "snap.wlns"
        write_snapshot(path, 0.0, [f])
        raw = path.read_bytes()
        header = 4 + 4 + 4 + 8 + 8 + 4
        first = np.frombuffer(raw[header : header + 8 * 8], dtype="<f8")
        # x varies fastest, so the leading doubles sweep the x axis
        assert np.allclose(first, g.axis_coordinates)

    def test_header_fields(self, tmp_path):
        g = Grid(n=8, length=3.0)
        path = tmp_path / "snap.wlns"
        write_snapshot(path, 1.5, [random_scalar(g)])
        raw = path.read_bytes()
        assert raw[:4] == b"WLNS"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:12], "little") == 8

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.wlns"
        path.write_bytes(b"XXXX" + b"\0" * 40)
        with pytest.raises(SnapshotFormatError):
            read_snapshot(path)

    def test_truncated_payload_rejected(self, tmp_path):
        g = Grid(n=8)
        path = tmp_path / "snap.wlns"
        write_snapshot(path, 0.0, [random_scalar(g)])
        raw = path.read_bytes()
        path.write_bytes(raw[:-16])
        with pytest.raises(SnapshotFormatError):
            read_snapshot(path)


def test_ball_mask_volume_converges():
    volumes = []
    for n in (32, 64):
        g = Grid(n=n)
        mask = ball_mask(g, (np.pi, np.pi, np.pi), 1.0)
        volumes.append(np.count_nonzero(mask) * g.cell_volume)
    exact = 4 * np.pi / 3
    assert abs(volumes[1] - exact) < abs(volumes[0] - exact)
    assert volumes[1] == pytest.approx(exact, rel=0.02)
