import numpy as np
import pytest

import beliefnet as bn
from conftest import make_panel, random_network


def pair_omega(w=0.5):
    return np.array([[0.0, w], [w, 0.0]])


class TestBeliefEnergy:
    def test_single_pair(self):
        assert bn.belief_energy([1.0, 1.0], 0, pair_omega()) == -0.5

    def test_sign_flip(self):
        assert bn.belief_energy([1.0, -1.0], 0, pair_omega()) == 0.5

    def test_matches_double_loop(self, rng):
        p = 8
        w = random_network(p, rng)
        b = rng.uniform(-1, 1, p)
        for i in range(p):
            oracle = -sum(w[i, j] * b[i] * b[j] for j in range(p) if j != i)
            assert bn.belief_energy(b, i, w) == pytest.approx(oracle, abs=1e-14)
        assert np.abs(
            bn.belief_energies(b, w)
            - np.array([bn.belief_energy(b, i, w) for i in range(p)])
        ).max() < 1e-14

    def test_index_out_of_range(self):
        with pytest.raises(bn.DimensionError):
            bn.belief_energy([0.0, 0.0], 5, pair_omega())


class TestNetworkEnergy:
    def test_double_counted_pair(self):
        assert bn.network_energy([1.0, 1.0], pair_omega()) == -1.0

    def test_zero_beliefs(self):
        assert bn.network_energy([0.0, 0.0], pair_omega()) == 0.0

    def test_matches_pairwise_sum(self, rng):
        p = 7
        w = random_network(p, rng)
        b = rng.uniform(-1, 1, p)
        pairwise = -2.0 * sum(
            w[i, j] * b[i] * b[j] for i in range(p) for j in range(i + 1, p)
        )
        assert bn.network_energy(b, w) == pytest.approx(pairwise, abs=1e-14)

    def test_spin_flip_symmetry(self, rng):
        w = random_network(5, rng)
        b = rng.uniform(-1, 1, 5)
        assert bn.network_energy(-b, w) == pytest.approx(bn.network_energy(b, w), abs=1e-14)

    def test_bilinear_scaling(self, rng):
        w = random_network(5, rng)
        b = rng.uniform(-1, 1, 5)
        for c in (0.5, -0.25, 0.9):
            assert bn.network_energy(c * b, w) == pytest.approx(
                c * c * bn.network_energy(b, w), abs=1e-13
            )

    def test_neutral_belief_contributes_nothing(self, rng):
        w = random_network(5, rng)
        b = rng.uniform(-1, 1, 5)
        b[2] = 0.0
        energies = bn.belief_energies(b, w)
        assert energies[2] == 0.0
        other = np.delete(np.arange(5), 2)
        reduced = bn.belief_energies(b[other], w[np.ix_(other, other)])
        assert np.abs(energies[other] - reduced).max() < 1e-14


class TestDeltaEnergy:
    def test_flip(self):
        assert bn.delta_energy([1.0, 1.0], 0, -1.0, pair_omega()) == 1.0

    def test_identity_move(self, rng):
        w = random_network(4, rng)
        b = rng.uniform(-1, 1, 4)
        assert bn.delta_energy(b, 1, b[1], w) == 0.0

    def test_out_of_range_proposal(self):
        with pytest.raises(bn.DomainError):
            bn.delta_energy([0.0, 0.0], 0, 1.5, pair_omega())

    def test_matches_recomputation(self, rng):
        w = random_network(6, rng)
        b = rng.uniform(-1, 1, 6)
        for _ in range(20):
            i = int(rng.integers(6))
            new = float(rng.uniform(-1, 1))
            oracle = bn.belief_energy(
                np.r_[b[:i], new, b[i + 1 :]], i, w
            ) - bn.belief_energy(b, i, w)
            assert bn.delta_energy(b, i, new, w) == pytest.approx(oracle, abs=1e-14)

    def test_total_energy_moves_by_twice_delta(self, rng):
        w = random_network(6, rng)
        b = rng.uniform(-1, 1, 6)
        i, new = 3, 0.4
        dh = bn.delta_energy(b, i, new, w)
        b2 = b.copy()
        b2[i] = new
        assert bn.network_energy(b2, w) - bn.network_energy(b, w) == pytest.approx(
            2.0 * dh, abs=1e-12
        )


class TestTrajectory:
    def test_constant_beliefs_constant_energy(self):
        values = np.tile(np.array([0.5, -0.5, 0.25]), (2, 4, 1))
        panel = make_panel(values)
        w = random_network(3, np.random.default_rng(1))
        traj = bn.energy_trajectory("p000", panel, w)
        totals = [e.total for e in traj]
        assert np.ptp(totals) < 1e-14
        assert [e.time for e in traj] == list(panel.time_points)

    def test_empty_coupling_zero_energy(self, rng):
        panel = make_panel(rng.uniform(-1, 1, (2, 3, 4)))
        traj = bn.energy_trajectory("p001", panel, np.zeros((4, 4)))
        assert all(e.total == 0.0 for e in traj)

    def test_energy_descent_states_decrease(self):
        # build waves from a low-temperature chain, keeping sweeps where
        # the energy strictly dropped
        w = random_network(5, np.random.default_rng(3))
        state = bn.initial_state(5, beta=30.0, seed=11)
        states = [state.beliefs.copy()]
        energies = [bn.network_energy(state.beliefs, w)]
        while len(states) < 4:
            state = bn.sweep(state, w)
            h = bn.network_energy(state.beliefs, w)
            if h < energies[-1] - 1e-9:
                states.append(state.beliefs.copy())
                energies.append(h)
        values = np.stack(states)[None, :, :]
        panel = make_panel(values)
        traj = bn.energy_trajectory("p000", panel, w)
        totals = [e.total for e in traj]
        assert all(b < a for a, b in zip(totals, totals[1:]))

    def test_total_is_sum_of_per_belief(self, rng):
        panel = make_panel(rng.uniform(-1, 1, (3, 2, 5)))
        w = random_network(5, rng)
        for score in bn.energy_trajectory("p002", panel, w):
            assert score.total == pytest.approx(score.per_belief.sum(), abs=1e-12)

    def test_grid_matches_trajectory(self, rng):
        panel = make_panel(rng.uniform(-1, 1, (4, 3, 4)))
        w = random_network(4, rng)
        grid = bn.energy_grid(panel, w)
        for i, person in enumerate(panel.persons):
            traj = bn.energy_trajectory(person, panel, w)
            assert np.abs(grid[i] - [e.total for e in traj]).max() < 1e-12

    def test_unknown_person(self, rng):
        panel = make_panel(rng.uniform(-1, 1, (2, 2, 3)))
        with pytest.raises(bn.DomainError):
            bn.energy_trajectory("ghost", panel, np.zeros((3, 3)))

    def test_residual_variant(self, rng):
        panel = make_panel(rng.uniform(-1, 1, (5, 3, 4)))
        w = random_network(4, rng)
        resid = bn.residualize(panel).residuals
        traj = bn.energy_trajectory("p001", panel, w, use_residuals=True)
        for t, score in enumerate(traj):
            b = resid[1, t, :]
            assert score.total == pytest.approx(bn.network_energy(b, w), abs=1e-12)

    def test_per_wave_couplings_from_model(self, rng):
        panel = make_panel(rng.uniform(-1, 1, (3, 2, 3)))
        per_wave = np.stack([random_network(3, rng), random_network(3, rng)])
        traj = bn.energy_trajectory("p000", panel, per_wave)
        for t, score in enumerate(traj):
            assert score.total == pytest.approx(
                bn.network_energy(panel.values[0, t, :], per_wave[t]), abs=1e-12
            )
