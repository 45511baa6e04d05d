import math

import numpy as np
import pytest

from sobolevlab.errors import ConstructionError, DomainError, ParameterError
from sobolevlab.geometry import AffineProfile
from sobolevlab import spikes as sk


def test_base_profile_limits():
    assert sk.base_profile([sk.R_MAX, 0.0]) == pytest.approx(0.0, abs=1e-7)
    assert sk.base_profile([1e-9, 0.0]) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("x", [[0.0, 0.0], [0.3, 0.0]])
def test_base_profile_domain(x):
    with pytest.raises(DomainError):
        sk.base_profile(x)


def test_base_profile_derivatives_match_finite_differences():
    p, x, h = sk.BaseProfile(), np.array([0.08, -0.05]), 1e-6
    e = np.eye(2) * h
    g = np.array([(p.value(x + e[i]) - p.value(x - e[i])) / (2 * h) for i in range(2)])
    H = np.array([(p.gradient(x + e[i]) - p.gradient(x - e[i])) / (2 * h) for i in range(2)])
    assert np.allclose(g, p.gradient(x), rtol=1e-7)
    assert np.allclose(H, p.hessian(x), rtol=1e-5)


def test_spike_bump_apex_and_support():
    y = (0.15, 0.0)
    for delta in (1e-2, 1e-3, 1e-4):
        b = sk.SpikeBump(y, 0.04, 1.0, delta)
        assert sk.spike_bump(b, np.array(y)) == pytest.approx(1.0, abs=0.4 * delta / 0.04 + 1e-12)
    b = sk.SpikeBump(y, 0.04, 1.0, 0.004)
    assert sk.spike_bump(b, np.array([0.15, 0.04])) == 0.0
    assert sk.spike_bump(b, np.array([0.2, 0.01])) == 0.0


def test_spike_bump_is_c2_across_pieces():
    b = sk.SpikeBump((0.0, 0.0), 1.0, 1.0, 0.1)
    for rho in (0.1, 0.5, 1.0):
        lo, hi = b.radial(rho - 1e-9), b.radial(rho + 1e-9)
        assert np.allclose([lo[0], lo[1], lo[2]], [hi[0], hi[1], hi[2]], atol=1e-6)


def test_spike_bump_smoothing_radius_guard():
    with pytest.raises(ParameterError):
        sk.SpikeBump((0.15, 0.0), 0.04, 1.0, 0.02)


def test_base_profile_certifies_and_affine_does_not():
    assert sk.certify_concavity(sk.SpikeProfile(), 0.01).valid
    cert = sk.certify_concavity(AffineProfile((0.1, 0.2)), 0.01, cone=False)
    assert not cert.valid and cert.min_neg_eig == 0.0


def test_five_spikes_certify():
    prof = sk.build_spiked(5)
    assert len(prof.bumps) == 5
    step = min(b.delta for b in prof.bumps) / 2
    assert sk.certify_concavity(prof, step).valid


def test_add_spike_is_local():
    base = sk.SpikeProfile()
    prof = sk.add_spike(base, (0.2, 0.0), eps=0.02)
    far = np.array([[-0.2, 0.0], [0.0, 0.2], [0.15, 0.1]])
    assert np.array_equal(prof.value(far), base.value(far))
    near = np.array([0.2, 0.0])
    assert prof.value(near) > base.value(near)


def test_zero_amplitude_leaves_profile_unchanged():
    base = sk.SpikeProfile()
    prof = base.with_bump(sk.SpikeBump((0.2, 0.0), 0.02, 0.0, 0.002))
    pts = np.random.default_rng(0).uniform(-0.18, 0.18, (50, 2))
    assert np.array_equal(prof.value(pts), base.value(pts))


def test_add_spike_floor_raises():
    with pytest.raises(ConstructionError):
        sk.add_spike(sk.SpikeProfile(), (0.2, 0.0), eps=0.02, eta_start=1e-13)


def test_add_spike_rejects_bad_center():
    with pytest.raises(ParameterError):
        sk.add_spike(sk.SpikeProfile(), (0.01, 0.0))


def test_profile_roundtrip():
    prof = sk.build_spiked(3)
    again = sk.SpikeProfile.from_dict(prof.to_dict())
    pts = np.array([[0.15, 0.05], [-0.1, 0.12]])
    assert np.allclose(again.value(pts), prof.value(pts))
    assert again.total_amplitude == pytest.approx(prof.total_amplitude)


def test_bilipschitz_identical_profiles():
    p = sk.SpikeProfile()
    b = sk.bilipschitz_estimate(p, p, resolution=24, n_pairs=20)
    assert b.lower == pytest.approx(1.0) and b.upper == pytest.approx(1.0)


def test_bilipschitz_spiked_is_finite():
    b = sk.bilipschitz_estimate(sk.SpikeProfile(), sk.build_spiked(4), resolution=32, n_pairs=30)
    assert 0 < b.lower <= 1.0 + 1e-9 and math.isfinite(b.constant)


def test_obj_mesh_is_closed_manifold(tmp_path):
    info = sk.write_obj(sk.SpikeProfile(), tmp_path / "b.obj", n_rings=8, n_angles=16)
    assert info["valid"] and info["euler"] == 2
    lines = (tmp_path / "b.obj").read_text().splitlines()
    assert sum(l.startswith("f ") for l in lines) == info["faces"]


def test_graph_area_converges_from_below():
    # density ~ r^(-1/2) at the ideal apex, so the midpoint rule gains about sqrt(2) per halving
    a = [sk.graph_area(sk.SpikeProfile(), n, 2 * n) for n in (50, 100, 200)]
    assert 0 < a[0] < a[1] < a[2]
    assert 1.2 < (a[1] - a[0]) / (a[2] - a[1]) < 1.7
