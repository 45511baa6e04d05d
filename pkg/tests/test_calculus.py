import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobolevlab import geometry as geo
from sobolevlab.calculus import (D_S, D_S_star, DiscreteField, Mesh, SymTensorField, TensorField,
                                 bochner_laplacian, covariant_derivative, inner_product, laplacian,
                                 load_field, lp_norm, read_field_csv, sampson_laplacian, save_field,
                                 sobolev_norm, symmetrize, tensor_field, weitzenbock_action,
                                 weitzenbock_constant, write_field_csv)
from sobolevlab.errors import DomainError, ParameterError


def flat_mesh(step=1 / 32, half=1.0):
    return Mesh(geo.euclidean_chart(2, (-half, -half), (half, half)), step=step, lower=(-half, -half), upper=(half, half))


def test_constant_scalar_has_zero_derivative():
    m = Mesh(geo.klein_chart(2, 0.8), step=1 / 32)
    u = m.sample(lambda x: np.full(len(x), 3.0))
    d = covariant_derivative(u)
    assert np.max(np.abs(d.data[d.valid])) < 1e-12


def test_flat_laplacian_of_quadratic():
    m = flat_mesh()
    u = m.sample(lambda x: x[:, 0] ** 2 + 3 * x[:, 1] ** 2)
    L = laplacian(u)
    assert np.allclose(L.values[L.valid], 8.0, atol=1e-9)


def test_klein_laplacian_of_distance_function():
    # Delta cosh(d) = 2 cosh(d) in the hyperbolic plane; cosh d = 1/sqrt(1-|y|^2)
    m = Mesh(geo.klein_chart(2, 0.7), step=1 / 128)
    u = m.sample(lambda y: 1 / np.sqrt(1 - np.sum(y * y, -1)))
    L = laplacian(u)
    inner = L.valid & (np.linalg.norm(m.points, axis=-1) < 0.6)
    assert np.max(np.abs(L.values[inner] / u.values[inner] - 2)) < 2e-3


@pytest.mark.parametrize("p", [1.0, 2.0, 3.5])
def test_lp_norm_of_constant(p):
    m = flat_mesh(1 / 16, 0.5)
    u = m.sample(lambda x: np.full(len(x), -2.0))
    assert lp_norm(u, p) == pytest.approx(2.0 * 1.0 ** (1 / p), rel=1e-12)


def test_lp_norm_rejects_small_p():
    with pytest.raises(ParameterError):
        lp_norm(flat_mesh().sample(lambda x: x[:, 0]), 0.5)


def test_gaussian_l2_norm():
    m = flat_mesh(1 / 32, 6.0)
    u = m.sample(lambda x: np.exp(-np.sum(x * x, -1) / 2))
    assert lp_norm(u, 2) == pytest.approx(math.sqrt(math.pi), rel=1e-8)


def test_sobolev_norm_seminorms():
    m = flat_mesh(1 / 64, 6.0)
    u = m.sample(lambda x: np.exp(-np.sum(x * x, -1) / 2))
    rep = sobolev_norm(u, 1, 2)
    # |grad u|^2 = |x|^2 e^{-|x|^2}, integral pi
    assert rep.seminorms[1] == pytest.approx(math.sqrt(math.pi), rel=1e-3)
    assert rep.total == pytest.approx(sum(rep.seminorms)) and rep.refinement_estimate < 1e-3


def test_masked_stencils_are_flagged():
    m = Mesh(geo.klein_chart(2, 0.5), step=1 / 16, lower=(-0.6, -0.6), upper=(0.6, 0.6))
    u = m.sample(lambda x: x[:, 0])
    d = covariant_derivative(u)
    assert d.flagged.sum() > 0 and not np.any(d.flagged & m.mask)


def test_symmetrize_outer_product():
    m = flat_mesh(1 / 4, 0.5)
    data = np.zeros(m.shape + (2, 2))
    data[..., 0, 1] = 1.0
    S = symmetrize(TensorField(m, data)).full().data
    assert np.allclose(S[..., 0, 1], 0.5) and np.allclose(S[..., 1, 0], 0.5)
    assert np.allclose(S[..., 0, 0], 0) and np.allclose(S[..., 1, 1], 0)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_symmetrize_is_projection(c):
    m = flat_mesh(1 / 4, 0.5)
    data = np.broadcast_to(np.array(c).reshape(2, 2), m.shape + (2, 2)).copy()
    S = symmetrize(TensorField(m, data))
    again = symmetrize(S)
    assert np.allclose(S.components, again.components)
    # |T^S| <= |T|
    assert np.all(S.norm_pointwise() <= TensorField(m, data).norm_pointwise() + 1e-12)


def test_constant_symmetric_tensor_operators_vanish():
    m = flat_mesh()
    T = SymTensorField(m, 2, np.broadcast_to([1.0, 0.3, -2.0], m.shape + (3,)).copy())
    for out in (D_S(T), D_S_star(T), sampson_laplacian(T), bochner_laplacian(T), weitzenbock_action(T)):
        assert np.max(np.abs(out.components[out.valid])) < 1e-10


def test_D_S_star_linear_example():
    m = flat_mesh()
    data = np.zeros(m.shape + (2, 2))
    data[..., 0, 0] = m.points[..., 0]
    out = D_S_star(SymTensorField.from_full(TensorField(m, data)))
    v = out.full().data[out.valid]
    assert np.allclose(v, [-1.0, 0.0], atol=1e-10)


def test_D_S_star_needs_degree():
    m = flat_mesh()
    with pytest.raises(ParameterError):
        D_S_star(SymTensorField(m, 0, np.zeros(m.shape + (1,))))


def _flat_T(x):
    out = np.zeros(x.shape[:-1] + (2, 2))
    out[..., 0, 0] = np.sin(x[..., 0]) * np.cos(x[..., 1])
    out[..., 0, 1] = out[..., 1, 0] = x[..., 0] * x[..., 1] ** 2
    out[..., 1, 1] = np.exp(0.5 * x[..., 0])
    return out


def test_flat_sampson_equals_bochner():
    # flat central differences commute, so the identity holds on the lattice up to rounding
    res = []
    for step in (1 / 16, 1 / 32, 1 / 64):
        m = flat_mesh(step)
        T = SymTensorField.from_full(tensor_field(m, _flat_T, 2))
        S, B = sampson_laplacian(T), bochner_laplacian(T)
        inner = np.max(np.abs(m.points), -1) < 0.5
        res.append(np.max(np.abs(S.components - B.components)[inner]))
    assert max(res) < 1e-10


def test_weitzenbock_sphere_constant_curvature():
    # in curvature +1: ric(T) = k(n+k-2) T - sum g (x) tr T; for trace-free T only the first term
    m = Mesh(geo.sphere_chart(), step=1 / 32)
    g = m.g
    rng = np.random.default_rng(0)
    A = rng.normal(size=(2, 2))
    A = A + A.T
    data = np.einsum("...ij,jk,...kl->...il", g, A, g)
    tr = np.einsum("...ij,...ij->...", m.ginv, data)
    data -= 0.5 * tr[..., None, None] * g
    T = SymTensorField.from_full(TensorField(m, data))
    W = weitzenbock_action(T).full().data
    assert np.allclose(W[~m.mask], weitzenbock_constant(2, 2) * data[~m.mask], atol=1e-6)


def test_field_csv_and_binary_roundtrip(tmp_path):
    m = flat_mesh(1 / 8, 0.5)
    f = tensor_field(m, _flat_T, 2)
    write_field_csv(f, tmp_path / "t.csv")
    again = read_field_csv(m, tmp_path / "t.csv")
    assert np.allclose(again.data, f.data)
    save_field(f, tmp_path / "t.npz")
    assert np.array_equal(load_field(tmp_path / "t.npz", m).data, f.data)
    with pytest.raises(DomainError):
        load_field(tmp_path / "t.npz", flat_mesh(1 / 4, 0.5))


def test_inner_product_symmetric():
    m = flat_mesh(1 / 16)
    a = tensor_field(m, _flat_T, 2)
    b = tensor_field(m, lambda x: _flat_T(x[..., ::-1]), 2)
    assert inner_product(a, b) == pytest.approx(inner_product(b, a))
