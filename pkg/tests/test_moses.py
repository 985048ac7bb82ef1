import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holonet import moses as M
from holonet import network as N
from holonet import oracle as O
from holonet.embed import embed_mps_boundary
from holonet.errors import AtBoundaryError, InvalidDimsError, ZeroTensorError
from holonet.models import SWAP
from holonet.mps import MPS, ghz_mps
from holonet.tensor_core import isometry_residual, make_rng


def _cplx(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def _fid(a, b):
    return abs(np.vdot(N.to_statevector(a), N.to_statevector(b))) ** 2


# --------------------------------------------------------------------------- renyi_half


def test_renyi_half_product_and_bell():
    assert abs(M.renyi_half(np.ones((2, 2)), (0,))) < 1e-12
    bell = np.eye(2) / np.sqrt(2)
    assert np.isclose(M.renyi_half(bell, (0,)), np.log(2))


def test_renyi_half_matches_dense_oracle():
    rng = make_rng(1)
    t = _cplx(rng, 2, 2, 2, 2)
    psi = t.reshape(-1) / np.linalg.norm(t)
    assert abs(M.renyi_half(t, (0, 1)) - O.renyi_n_dense(psi, 2, 0.5)) < 1e-10


def test_renyi_half_zero():
    with pytest.raises(ZeroTensorError):
        M.renyi_half(np.zeros((2, 2)), (0,))


# --------------------------------------------------------------------------- disentangler


def test_disentangler_keeps_identity_when_minimal():
    rng = make_rng(2)
    x, y = _cplx(rng, 2, 3), _cplx(rng, 2, 2, 3)
    theta = np.einsum("ua,xrz->uxarz", x, y)
    u, _, s = M.optimize_disentangler(theta, (0, 2))
    assert np.allclose(u, np.eye(4))
    assert abs(s) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_disentangler_undoes_swap(seed):
    rng = make_rng(3, seed)
    x, y = _cplx(rng, 2, 3), _cplx(rng, 2, 2, 3)
    tp = np.einsum("ua,xrz->uxarz", x, y)
    theta = (SWAP @ tp.reshape(4, -1)).reshape(tp.shape)
    assert M.renyi_half(theta, (0, 2)) > 0.1
    u, out, s = M.optimize_disentangler(theta, (0, 2))
    assert s < 1e-8
    assert abs(M.renyi_half(out, (0, 2)) - s) < 1e-12
    assert isometry_residual(u) < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_disentangler_never_worse(seed):
    theta = _cplx(make_rng(seed), 2, 2, 2, 2, 2)
    u, _, s = M.optimize_disentangler(theta, (0, 2))
    assert s <= M.renyi_half(theta, (0, 2)) + 1e-12
    assert isometry_residual(u) < 1e-10


# --------------------------------------------------------------------------- tripartite


def _recombine(res):
    return np.einsum("lbuv,uag,gvrz->lbarz", res.A.data, res.B.data, res.C.data)


def _check_isometries(res):
    l, b, bu, br = res.A.data.shape
    assert isometry_residual(res.A.data.reshape(l * b, bu * br)) < 1e-10
    g = res.C.data.shape[0]
    assert isometry_residual(res.C.data.reshape(g, -1).T) < 1e-10


def test_tripartite_product():
    rng = make_rng(4)
    t = np.einsum("l,b,a,r,z->lbarz", *[_cplx(rng, k) for k in (2, 2, 2, 2, 2)])
    res = M.tripartite_decompose(t, 2)
    assert res.truncation_error < 1e-14
    assert res.B.data.shape[-1] == 1
    _check_isometries(res)
    assert np.allclose(_recombine(res), t)


@pytest.mark.parametrize("chi", [1, 2, 4])
def test_tripartite_error_is_discarded_weight(chi):
    rng = make_rng(5, chi)
    t = _cplx(rng, 2, 2, min(chi, 2), 2, min(chi, 2))
    res = M.tripartite_decompose(t, chi)
    _check_isometries(res)
    lost = np.linalg.norm(t - _recombine(res)) ** 2 / np.linalg.norm(t) ** 2
    assert abs(lost - res.truncation_error) < 1e-10


def test_tripartite_beta_split_rules():
    rng = make_rng(6)
    res = M.tripartite_decompose(_cplx(rng, 1, 2, 2, 2, 2), 2)
    assert res.A.data.shape[2:] == (1, 2)
    res = M.tripartite_decompose(_cplx(rng, 2, 2, 2, 2, 2), 2)
    assert res.A.data.shape[2:] == (2, 2)


def test_tripartite_bad_dims():
    with pytest.raises(InvalidDimsError):
        M.tripartite_decompose(np.ones((3, 2, 2, 2, 2)), 2)
    with pytest.raises(InvalidDimsError):
        M.tripartite_decompose(np.ones((2, 2, 4, 2, 2)), 2)


# --------------------------------------------------------------------------- shifts


def test_product_network_shift_exact():
    rng = make_rng(7)
    vs = [v / np.linalg.norm(v) for v in (_cplx(rng, 2) for _ in range(6))]
    net = embed_mps_boundary(MPS([v.reshape(1, 2, 1) for v in vs], 0, 2), 2)
    out, rep = M.shift_surface(net, "right")
    assert rep.fidelity_estimate > 1 - 1e-12
    assert max(rep.row_errors + rep.vertical_errors) < 1e-14


def test_ghz_shift():
    net = embed_mps_boundary(ghz_mps(6), 2)
    out, rep = M.shift_surface(net, "right")
    assert out.s == 2
    assert rep.fidelity_estimate > 1 - 1e-10
    assert _fid(out, net) > 1 - 1e-10


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(6, 3, "left"), (6, 3, "right"), (7, 1, "right"), (5, 5, "left")]))
def test_shift_restores_invariants(seed, case):
    L, s, direction = case
    net = N.random_network(N.build_layout(L, s, 2), make_rng(seed))
    out, rep = M.shift_surface(net, direction)
    assert out.s == s + (1 if direction == "right" else -1)
    assert N.validate(out, 1e-9) == []
    assert abs(np.linalg.norm(N.to_statevector(out)) - 1) < 1e-10
    assert 0 <= rep.fidelity_estimate <= 1 + 1e-10


def test_untruncated_shift_is_exact():
    rng = make_rng(8)
    net = N.random_network(N.build_layout(6, 3, 64), rng)
    out, rep = M.shift_surface(net, "right")
    assert max(rep.row_errors + rep.vertical_errors) < 1e-14
    assert rep.fidelity_estimate > 1 - 1e-9


def test_shift_at_boundary():
    net = N.random_network(N.build_layout(4, 4, 2), make_rng(0))
    with pytest.raises(AtBoundaryError):
        M.shift_surface(net, "right")
    with pytest.raises(AtBoundaryError):
        M.shift_surface(N.random_network(N.build_layout(4, 1, 2), make_rng(0)), "left")


def test_mirror_involution():
    net = N.random_network(N.build_layout(5, 2, 2), make_rng(9))
    back = M.mirror(M.mirror(net))
    assert all(np.array_equal(back.tensors[k], net.tensors[k]) for k in net.tensors)
    psi = N.to_statevector(net).reshape((2,) * 5)
    assert np.allclose(N.to_statevector(M.mirror(net)), psi.transpose(4, 3, 2, 1, 0).reshape(-1))


@pytest.mark.parametrize("seed", range(3))
def test_refinement_helps_and_is_monotone(seed):
    net = N.random_network(N.build_layout(8, 1, 2), make_rng(10, seed))
    _, plain = M.shift_surface(net, "right")
    out, refined = M.shift_surface(net, "right", refine=True)
    assert refined.fidelity_estimate >= plain.fidelity_estimate - 1e-12
    h = refined.refinement_history
    assert all(b >= a - 1e-12 for a, b in zip(h, h[1:]))
    assert N.validate(out, 1e-9) == []


def test_ghz_sweep_round_trip():
    net = embed_mps_boundary(ghz_mps(6), 2)
    out, reps = M.sweep_surface(net, 6)
    assert len(reps) == 5
    back, _ = M.sweep_surface(out, 1)
    assert _fid(back, net) > 1 - 1e-10
