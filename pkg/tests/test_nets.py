import itertools

import numpy as np
import pytest

from heavycov import ContractError, epsilon_net, net_norm_estimate, op_norm
from heavycov.nets import sphere_grid


def _min_pairwise(P):
    D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=2)
    D[np.diag_indices_from(D)] = np.inf
    return D.min()


def test_circle_zero_sphere():
    net = epsilon_net(1, 0.5, seed=0)
    assert sorted(net.points.ravel().tolist()) == [-1.0, 1.0]
    assert net.verified_cover


def test_circle_net_covers_fine_grid():
    eps = 0.5
    net = epsilon_net(2, eps, seed=3)
    assert len(net) <= (3 / eps) ** 2
    grid = sphere_grid(2, 1e-3)
    dist = np.min(np.linalg.norm(grid[:, None, :] - net.points[None], axis=2), axis=1)
    assert dist.max() <= eps
    assert net.verified_cover and not net.incomplete


def test_sphere_net_cardinality():
    net = epsilon_net(3, 0.25, seed=1)
    assert len(net) <= 12**3
    assert net.verified_cover


@pytest.mark.parametrize("n,eps", [(1, 0.3), (2, 0.2), (3, 0.3), (4, 0.45)])
def test_packing_invariant(n, eps):
    net = epsilon_net(n, eps, seed=11)
    assert np.allclose(np.linalg.norm(net.points, axis=1), 1.0, atol=1e-12)
    if len(net) > 1:
        assert _min_pairwise(net.points) > eps


def test_budget_exhaustion_is_flagged():
    net = epsilon_net(6, 0.1, seed=0, max_points=50)
    assert net.incomplete
    assert len(net) == 50
    assert not net.verified_cover


def test_identity_bounds():
    for eps in (0.1, 0.25, 0.4):
        est = net_norm_estimate(np.eye(2), epsilon_net(2, eps, seed=0))
        assert est.lower == pytest.approx(1.0)
        assert est.certified_upper == pytest.approx(1.0 / (1 - 2 * eps))


def test_quarter_eps_doubles():
    net = epsilon_net(3, 0.25, seed=5)
    A = np.diag([2.0, -1.0, 0.5])
    est = net_norm_estimate(A, net)
    assert est.certified_upper == pytest.approx(2 * est.lower)


def test_random_matrix_bracketed():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((5, 5))
    A = M + M.T
    est = net_norm_estimate(A, epsilon_net(5, 0.1, seed=4, max_points=4000))
    true = op_norm(A)
    assert est.lower <= true + 1e-12
    assert est.heuristic  # no grid verification in five dimensions
    for n in (2, 3):
        B = A[:n, :n]
        e = net_norm_estimate(B, epsilon_net(n, 0.1, seed=4))
        assert e.lower <= op_norm(B) <= e.certified_upper


def test_lower_never_exceeds_norm_fuzz():
    rng = np.random.default_rng(9)
    for n, eps in itertools.product((2, 3, 4), (0.2, 0.35)):
        net = epsilon_net(n, eps, seed=n)
        for _ in range(20):
            M = rng.standard_normal((n, n))
            A = M + M.T
            assert net_norm_estimate(A, net).lower <= op_norm(A) * (1 + 1e-12)


def test_eps_contracts():
    with pytest.raises(ContractError):
        net_norm_estimate(np.eye(2), epsilon_net(2, 0.5, seed=0))
    with pytest.raises(ContractError):
        epsilon_net(2, 1.5, seed=0)
    with pytest.raises(ContractError):
        net_norm_estimate(np.eye(3), epsilon_net(2, 0.2, seed=0))
