import numpy as np
import pytest

from vigrating.errors import (
    GeometryError,
    NonSymmetric,
    RayleighAnomaly,
    ShapeMismatch,
)
from vigrating.problem import (
    ContrastField,
    Grid,
    IncidentWave,
    build_problem,
    circle_contrast,
    contrast_from_permittivity,
    incident_field,
    raster_contrast,
    rectangle_contrast,
    slab_contrast,
    two_layer_contrast,
    write_raster,
)


def test_wave_validation():
    with pytest.raises(ValueError):
        IncidentWave(k=-1.0, d=(0.0, -1.0))
    with pytest.raises(ValueError):
        IncidentWave(k=1.0, d=(0.5, -0.5))          # not unit
    with pytest.raises(ValueError):
        IncidentWave(k=1.0, d=(1.0, 0.0))           # grazing
    with pytest.raises(ValueError):
        IncidentWave(k=1.0, d=(0.0, 1.0))           # upward
    wave = IncidentWave.from_angle(2.0, 30.0)
    assert wave.d[1] < 0
    assert np.isclose(wave.alpha, 2.0 * np.sin(np.deg2rad(30.0)))


def test_nonresonance_check():
    # k = 1 at normal incidence sits exactly on the first-order cutoff
    with pytest.raises(RayleighAnomaly) as err:
        IncidentWave(k=1.0, d=(0.0, -1.0)).check_nonresonance()
    assert abs(err.value.order) == 1
    IncidentWave(k=1.0, d=(0.3, -np.sqrt(1 - 0.09))).check_nonresonance()


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(n1=12, n2=16, rho_box=1.0)             # not a power of two
    with pytest.raises(GeometryError):
        Grid(n1=16, n2=16, rho_box=-1.0)
    g = Grid(n1=8, n2=16, rho_box=2.0)
    assert g.x1_nodes()[0] == -np.pi
    assert np.isclose(g.x1_nodes()[1] - g.x1_nodes()[0], 2 * np.pi / 8)
    assert g.x2_nodes()[0] == -2.0
    assert list(g.j1_modes()) == [0, 1, 2, 3, -4, -3, -2, -1]


def test_build_problem_zero_contrast():
    wave = IncidentWave(k=0.5, d=(0.0, -1.0))
    contrast = slab_contrast(0.0, 1.0)
    grid = Grid(n1=8, n2=8, rho_box=1.5)
    problem = build_problem(wave, contrast, grid)
    assert np.all(problem.q_grid == 0)
    assert problem.is_lossless()


def test_build_problem_geometry_error():
    wave = IncidentWave(k=0.5, d=(0.0, -1.0))
    contrast = slab_contrast(1.0, 2.0)              # h = 1
    with pytest.raises(GeometryError):
        build_problem(wave, contrast, Grid(n1=8, n2=8, rho_box=1.5))
    with pytest.raises(GeometryError):
        build_problem(wave, contrast, Grid(n1=8, n2=8, rho_box=2.5),
                      rho_ref=0.5)                  # rho_ref below h


def test_build_problem_rejects_anomalous_wave():
    contrast = slab_contrast(1.0, 0.5)
    grid = Grid(n1=8, n2=8, rho_box=1.0)
    with pytest.raises(RayleighAnomaly):
        build_problem(IncidentWave(k=1.0, d=(0.0, -1.0)), contrast, grid)


def test_build_problem_deterministic():
    wave = IncidentWave(k=0.7, d=(0.25 / 0.7, -np.sqrt(1 - (0.25 / 0.7) ** 2)))
    contrast = circle_contrast(2.0 + 0.5j, radius=0.8)
    grid = Grid(n1=16, n2=16, rho_box=1.8)
    p1 = build_problem(wave, contrast, grid)
    p2 = build_problem(wave, contrast, grid)
    assert np.array_equal(p1.q_grid, p2.q_grid)
    # sampling is pointwise: grid values equal the sampler exactly
    xx1, xx2 = grid.mesh()
    assert np.array_equal(p1.q_grid, contrast.sample(xx1, xx2))


def test_support_violation_detected():
    bad = ContrastField(
        sampler=lambda x1, x2: np.ones(
            np.broadcast_shapes(np.shape(x1), np.shape(x2)) + (2, 2)
        ),
        h=0.1,
    )
    wave = IncidentWave(k=0.5, d=(0.0, -1.0))
    with pytest.raises(GeometryError):
        build_problem(wave, bad, Grid(n1=8, n2=8, rho_box=1.0))


def test_incident_field_values():
    wave = IncidentWave(k=2.0, d=(0.0, -1.0))
    u, grad = incident_field(wave, [(0.0, 0.0), (0.7, 0.0)])
    assert u[0] == 1.0
    assert np.allclose(grad[0], 1j * 2.0 * np.array([0.0, -1.0]))
    assert np.isclose(u[1], 1.0)                    # x1-independent at normal incidence


def test_incident_quasi_periodicity():
    wave = IncidentWave.from_angle(1.3, 25.0)
    u, _ = incident_field(wave, [(np.pi, 0.3), (-np.pi, 0.3)])
    ratio = u[0] / u[1]
    assert np.isclose(ratio, np.exp(2j * np.pi * wave.alpha), atol=1e-12)


def test_incident_gradient_matches_finite_differences():
    wave = IncidentWave.from_angle(1.1, -35.0)
    x0 = np.array([0.4, -0.2])
    _, grad = incident_field(wave, x0)
    errs = []
    for step in (1e-3, 5e-4):
        num = np.empty(2, dtype=complex)
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = step
            up, _ = incident_field(wave, x0 + e)
            dn, _ = incident_field(wave, x0 - e)
            num[axis] = (up - dn) / (2 * step)
        errs.append(np.max(np.abs(num - grad)))
    assert errs[0] < 1e-5
    assert errs[1] < errs[0] / 3.5                  # roughly quadratic


def test_contrast_from_permittivity():
    grid = Grid(n1=16, n2=32, rho_box=1.0)

    def eps_inv_identity(x1, x2):
        shape = np.broadcast_shapes(np.shape(x1), np.shape(x2))
        return np.broadcast_to(np.eye(2), shape + (2, 2))

    c0 = contrast_from_permittivity(eps_inv_identity, grid)
    assert c0.h == 0.0

    def eps_inv_slab(x1, x2):
        shape = np.broadcast_shapes(np.shape(x1), np.shape(x2))
        out = np.broadcast_to(np.eye(2), shape + (2, 2)).copy()
        inside = np.broadcast_to(np.abs(x2) < 0.5, shape)
        out[inside] = 4.0 * np.eye(2)
        return out

    c1 = contrast_from_permittivity(eps_inv_slab, grid)
    q = c1.sample(np.array(0.0), np.array(0.0))
    assert np.allclose(q, 3.0 * np.eye(2))
    assert 0.4 < c1.h <= 0.5

    def eps_diag(x1, x2):
        shape = np.broadcast_shapes(np.shape(x1), np.shape(x2))
        out = np.zeros(shape + (2, 2), dtype=complex)
        inside = np.broadcast_to(np.abs(x2) < 0.3, shape)
        m = np.diag([2.0 + 0.1j, 3.0 + 0.1j])
        out[inside] = m
        out[~inside] = np.eye(2)
        return out

    c2 = contrast_from_permittivity(eps_diag, grid)
    q2 = c2.sample(np.array(0.0), np.array(0.0))
    assert np.allclose(q2, np.diag([1.0 + 0.1j, 2.0 + 0.1j]))
    assert not c2.isotropic


def test_contrast_from_permittivity_rejects_asymmetric():
    grid = Grid(n1=8, n2=8, rho_box=1.0)

    def eps_bad(x1, x2):
        shape = np.broadcast_shapes(np.shape(x1), np.shape(x2))
        out = np.broadcast_to(np.eye(2), shape + (2, 2)).copy()
        out[..., 0, 1] += 0.5
        return out

    with pytest.raises(NonSymmetric):
        contrast_from_permittivity(eps_bad, grid)


def test_shape_builders():
    slab = slab_contrast(3.0, 1.0)
    assert slab.h == 0.5 and slab.isotropic
    assert np.allclose(slab.sample(np.array(0.0), np.array(0.0)),
                       3.0 * np.eye(2))
    assert np.all(slab.sample(np.array(0.0), np.array(0.6)) == 0)
    # interface node gets the midpoint value
    assert np.allclose(slab.sample(np.array(1.0), np.array(0.5)),
                       1.5 * np.eye(2))

    circ = circle_contrast(np.array([[2.0, 0.5], [0.5, 1.0]]), radius=0.7)
    assert circ.h == 0.7 and not circ.isotropic
    # periodic wrap in x1
    a = circ.sample(np.array(0.1), np.array(0.0))
    b = circ.sample(np.array(0.1 + 2 * np.pi), np.array(0.0))
    assert np.array_equal(a, b)

    rect = rectangle_contrast(1.0 + 1.0j, width=2.0, height=0.8)
    assert rect.h == 0.4
    assert np.all(rect.sample(np.array(1.5), np.array(0.0)) == 0)

    layered = two_layer_contrast(2.0, -1.5, 0.4, 0.6)
    assert layered.h == 0.5
    low = layered.sample(np.array(0.0), np.array(-0.3))
    high = layered.sample(np.array(0.0), np.array(0.3))
    assert np.allclose(low, 2.0 * np.eye(2))
    assert np.allclose(high, -1.5 * np.eye(2))


def test_raster_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    cells = rng.standard_normal((8, 16, 2, 2)) + 1j * rng.standard_normal(
        (8, 16, 2, 2)
    )
    cells[..., 1, 0] = cells[..., 0, 1]
    # zero the outer rows so the declared support height holds
    cells[:, :3] = 0
    cells[:, -3:] = 0
    path = tmp_path / "contrast.bin"
    write_raster(path, cells, h=0.5, rho=1.0)
    field = raster_contrast(path)
    assert field.h == 0.5
    # nearest-cell lookup at a cell center
    x1 = -np.pi + (2 * np.pi) * (2.5 / 8)
    x2 = -1.0 + 2.0 * (8.5 / 16)
    got = field.sample(np.array(x1), np.array(x2))
    assert np.allclose(got, cells[2, 8])
    assert np.all(field.sample(np.array(0.0), np.array(0.9)) == 0)


def test_raster_rejects_bad_shape(tmp_path):
    with pytest.raises(ShapeMismatch):
        write_raster(tmp_path / "x.bin", np.zeros((4, 4, 3, 2)), 0.5, 1.0)
