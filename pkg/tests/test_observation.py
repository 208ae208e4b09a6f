import numpy as np
import pytest

from ddvar import (
    DimensionMismatch,
    Grid1D,
    InvalidArgument,
    ObsCovariance,
    ProblemInstance,
    SelectionMap,
    build_gaussian_covariance,
    identity_covariance,
    innovation,
    local_observation_positions,
    point_observations,
    synthesize,
)


def test_innovation_hand_example():
    grid = Grid1D.uniform(3)
    obs = point_observations(grid, [0, 2], [2.0, 4.0], [0.01, 0.01])
    inst = ProblemInstance(
        grid=grid,
        cov=identity_covariance(grid),
        obs=obs,
        u_background=np.array([1.0, 2.0, 3.0]),
    )
    np.testing.assert_array_equal(innovation(inst), [1.0, 1.0])


def test_innovation_vanishes_for_perfect_background():
    grid = Grid1D.uniform(5)
    u_b = np.linspace(0.0, 1.0, 5)
    obs = point_observations(grid, [1, 3], u_b[[1, 3]], [1.0, 1.0])
    inst = ProblemInstance(
        grid=grid,
        cov=identity_covariance(grid),
        obs=obs,
        u_background=u_b,
    )
    np.testing.assert_array_equal(innovation(inst), [0.0, 0.0])


def test_innovation_empty_without_observations():
    grid = Grid1D.uniform(4)
    obs = point_observations(grid, [], [], [])
    inst = ProblemInstance(
        grid=grid,
        cov=identity_covariance(grid),
        obs=obs,
        u_background=np.zeros(4),
    )
    assert innovation(inst).shape == (0,)


def test_innovation_linear_in_values():
    grid = Grid1D.uniform(6)
    u_b = np.arange(6.0)
    obs_a = point_observations(grid, [0, 4], [1.0, 2.0], [1.0, 1.0])
    obs_b = point_observations(grid, [0, 4], [3.0, -1.0], [1.0, 1.0])
    obs_sum = point_observations(grid, [0, 4], [4.0, 1.0], [1.0, 1.0])
    d_a = innovation(ProblemInstance(grid, identity_covariance(grid), obs_a, u_b))
    d_b = innovation(ProblemInstance(grid, identity_covariance(grid), obs_b, u_b))
    d_sum = innovation(ProblemInstance(grid, identity_covariance(grid), obs_sum, u_b))
    np.testing.assert_allclose(d_sum, d_a + d_b + u_b[[0, 4]], rtol=0, atol=0)


def test_h_op_matrix_has_one_unit_per_row():
    grid = Grid1D.uniform(9)
    obs = point_observations(grid, [2, 5, 8], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    h = obs.h_op.matrix()
    assert h.shape == (3, 9)
    np.testing.assert_array_equal(h.sum(axis=1), 1.0)
    np.testing.assert_array_equal(np.count_nonzero(h, axis=1), 1)
    np.testing.assert_array_equal(h @ np.arange(9.0), [2.0, 5.0, 8.0])


def test_local_positions_window():
    grid = Grid1D.uniform(10)
    obs = point_observations(grid, [1, 4, 5, 9], np.zeros(4), np.ones(4))
    sel, local = local_observation_positions(obs, 4, 10)
    np.testing.assert_array_equal(sel, [1, 2, 3])
    np.testing.assert_array_equal(local, [0, 1, 5])
    sel, local = local_observation_positions(obs, 0, 6)
    np.testing.assert_array_equal(sel, [0, 1, 2])
    np.testing.assert_array_equal(local, [1, 4, 5])


def test_local_positions_empty_window():
    grid = Grid1D.uniform(10)
    obs = point_observations(grid, [0, 9], np.zeros(2), np.ones(2))
    sel, local = local_observation_positions(obs, 3, 7)
    assert sel.size == 0
    assert local.size == 0


def test_synthesize_is_deterministic():
    grid = Grid1D.uniform(30)
    cov = build_gaussian_covariance(grid, 2.0, 1.0)
    a = synthesize(grid, cov, 6, 0.1, seed=11)
    b = synthesize(grid, cov, 6, 0.1, seed=11)
    assert a.u_truth.tobytes() == b.u_truth.tobytes()
    assert a.u_background.tobytes() == b.u_background.tobytes()
    assert a.obs.values.tobytes() == b.obs.values.tobytes()
    c = synthesize(grid, cov, 6, 0.1, seed=12)
    assert a.obs.values.tobytes() != c.obs.values.tobytes()


def test_synthesize_equispaced_indices():
    grid = Grid1D.uniform(50)
    cov = identity_covariance(grid)
    inst = synthesize(grid, cov, 10, 0.1, seed=0)
    np.testing.assert_array_equal(inst.obs.obs_indices, np.arange(0, 50, 5))
    inst = synthesize(grid, cov, 3, 0.1, seed=0)
    np.testing.assert_array_equal(inst.obs.obs_indices, [0, 16, 33])


def test_synthesize_draw_order_replay():
    # replay the generator stream by hand: z, then z', then eps
    grid = Grid1D.uniform(12)
    cov = build_gaussian_covariance(grid, 2.0, 1.0)
    inst = synthesize(grid, cov, 4, 0.3, seed=99)
    rng = np.random.Generator(np.random.PCG64(99))
    z = rng.standard_normal(12)
    z_prime = rng.standard_normal(12)
    eps = rng.standard_normal(4)
    u_truth = cov.v_factor @ z
    np.testing.assert_array_equal(inst.u_truth, u_truth)
    np.testing.assert_array_equal(inst.u_background, u_truth + cov.v_factor @ z_prime)
    idx = inst.obs.obs_indices
    np.testing.assert_array_equal(inst.obs.values, u_truth[idx] + 0.3 * eps)


def test_synthesize_noiseless_observations():
    grid = Grid1D.uniform(16)
    cov = build_gaussian_covariance(grid, 2.0, 1.0)
    inst = synthesize(grid, cov, 4, 0.0, seed=5)
    np.testing.assert_array_equal(inst.obs.values,
                                  inst.u_truth[inst.obs.obs_indices])
    np.testing.assert_array_equal(inst.obs.r_cov.r_diag, np.ones(4))


def test_synthesize_without_observations():
    grid = Grid1D.uniform(8)
    inst = synthesize(grid, identity_covariance(grid), 0, 0.1, seed=1)
    assert inst.obs.nobs == 0
    assert inst.obs.values.shape == (0,)


def test_synthesize_rejects_bad_arguments():
    grid = Grid1D.uniform(8)
    cov = identity_covariance(grid)
    with pytest.raises(InvalidArgument):
        synthesize(grid, cov, 9, 0.1, seed=0)
    with pytest.raises(InvalidArgument):
        synthesize(grid, cov, -1, 0.1, seed=0)
    with pytest.raises(InvalidArgument):
        synthesize(grid, cov, 4, -0.1, seed=0)
    with pytest.raises(DimensionMismatch):
        synthesize(Grid1D.uniform(9), cov, 4, 0.1, seed=0)


def test_observation_set_validation():
    grid = Grid1D.uniform(10)
    with pytest.raises(InvalidArgument):
        point_observations(grid, [3, 3], [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(InvalidArgument):
        point_observations(grid, [5, 2], [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        point_observations(grid, [1, 2], [0.0], [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        point_observations(grid, [1, 2], [0.0, 0.0], [1.0])
    with pytest.raises(InvalidArgument):
        mismatched = SelectionMap(10, [1, 3])
        from ddvar import ObservationSet

        ObservationSet(
            obs_indices=np.array([1, 2]),
            values=np.zeros(2),
            h_op=mismatched,
            r_cov=ObsCovariance(np.ones(2)),
        )


def test_problem_instance_validation():
    grid = Grid1D.uniform(5)
    obs = point_observations(grid, [0], [1.0], [1.0])
    cov = identity_covariance(grid)
    with pytest.raises(DimensionMismatch):
        ProblemInstance(grid, cov, obs, np.zeros(4))
    with pytest.raises(DimensionMismatch):
        ProblemInstance(grid, identity_covariance(Grid1D.uniform(6)), obs,
                        np.zeros(5))
    with pytest.raises(DimensionMismatch):
        ProblemInstance(grid, cov, obs, np.zeros(5), u_truth=np.zeros(7))
