import numpy as np
import pytest

from lcsvortex.grid import Axis, axis_from_coords, read_csv_grid, read_grid, write_grid


def test_axis_basics():
    ax = Axis("x", 0.0, 0.25, 5)
    assert ax.stop == 1.0
    assert np.allclose(ax.coords(), [0, 0.25, 0.5, 0.75, 1.0])
    idx, frac = ax.cell_fraction(np.array([0.0, 0.3, 1.0]))
    assert idx.tolist() == [0, 1, 3]
    assert np.allclose(frac, [0.0, 0.2, 1.0])


def test_axis_from_coords_rejects_nonuniform():
    with pytest.raises(ValueError):
        axis_from_coords("x", [0.0, 1.0, 2.5])
    ax = axis_from_coords("lat", np.linspace(-40, -20, 21), units="deg")
    assert ax.step == pytest.approx(1.0)


def test_grid_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(7)
    x = Axis("x", -1.2345678901234567, 0.1, 11)
    y = Axis("y", 0.0, 0.2, 7)
    u = rng.normal(size=(7, 11))
    u[2, 3] = np.nan
    v = rng.normal(size=(7, 11))
    path = tmp_path / "sample.grid"
    write_grid(path, [x, y], {"u": (("y", "x"), u), "v": (("y", "x"), v)},
               meta={"kind": "test"})
    axes, arrays, meta = read_grid(path)
    assert axes["x"] == x and axes["y"] == y
    assert meta["kind"] == "test"
    got_u = arrays["u"][1]
    assert np.array_equal(got_u, u, equal_nan=True)
    assert got_u.tobytes() == u.tobytes()
    assert arrays["v"][1].tobytes() == v.tobytes()


def test_grid_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.grid"
    p.write_text("something-else 1\n")
    with pytest.raises(ValueError):
        read_grid(p)


def test_csv_grid_reader(tmp_path):
    xs = [0.0, 0.5, 1.0]
    ys = [0.0, 1.0]
    lines = ["x,y,u,v"]
    for y in ys:
        for x in xs:
            lines.append(f"{x},{y},{x + 2 * y},{x * y}")
    p = tmp_path / "grid.csv"
    p.write_text("\n".join(lines) + "\n")
    axes, arrays = read_csv_grid(p)
    assert axes["x"].size == 3 and axes["y"].size == 2
    assert np.allclose(arrays["u"], [[0, 0.5, 1.0], [2.0, 2.5, 3.0]])
    assert np.allclose(arrays["v"], [[0, 0, 0], [0, 0.5, 1.0]])


def test_csv_grid_requires_complete_raster(tmp_path):
    p = tmp_path / "grid.csv"
    p.write_text("x,y,u,v\n0,0,1,1\n1,0,1,1\n0,1,1,1\n")
    with pytest.raises(ValueError):
        read_csv_grid(p)
