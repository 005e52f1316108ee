import numpy as np
import pytest

from formsched import AgentState, advance_positions, localize, step_agent


def make_state(p=(0.0, 0.0, 0.0), phat=(0.0, 0.0, 0.0), v=(0.0, 0.0, 0.0),
               sigma=1.0, aoi=0.0):
    return AgentState(true_position=np.array(p, dtype=float),
                      estimated_position=np.array(phat, dtype=float),
                      commanded_velocity=np.array(v, dtype=float),
                      noise_std=sigma, aoi=aoi)


class TestStepAgent:
    def test_noiseless_advance(self, rng):
        s = make_state(v=(1.0, 0.0, 0.0), sigma=0.0)
        s = step_agent(s, 0.1, rng)
        assert s.true_position == pytest.approx([0.1, 0.0, 0.0])
        assert s.estimated_position == pytest.approx([0.1, 0.0, 0.0])
        assert np.linalg.norm(s.true_position - s.estimated_position) == 0.0
        assert s.aoi == pytest.approx(0.1)

    def test_dt_must_be_positive(self, rng):
        with pytest.raises(ValueError):
            step_agent(make_state(), 0.0, rng)

    def test_deterministic_under_equal_seeds(self):
        def run(seed):
            rng = np.random.default_rng(seed)
            s = make_state(v=(0.5, -0.2, 0.1))
            for _ in range(50):
                s = step_agent(s, 0.01, rng)
            return s
        a, b = run(7), run(7)
        assert (a.true_position == b.true_position).all()
        assert (a.estimated_position == b.estimated_position).all()

    def test_error_statistics_match_chi_square(self):
        # ||p - phat||^2 / (T sigma^2) has mean d and variance 2d
        rng = np.random.default_rng(0)
        trials, steps, dt, sigma = 100_000, 20, 5e-3, 1.3
        p = np.zeros((trials, 3))
        phat = np.zeros((trials, 3))
        v = np.zeros((trials, 3))
        for _ in range(steps):
            p, phat = advance_positions(p, phat, v, sigma, dt,
                                        rng.standard_normal((trials, 3)))
        stat = ((p - phat) ** 2).sum(axis=1) / (steps * dt * sigma ** 2)
        assert stat.mean() == pytest.approx(3.0, rel=0.05)
        assert stat.var() == pytest.approx(6.0, rel=0.05)

    def test_error_is_zero_mean_per_axis(self):
        rng = np.random.default_rng(3)
        trials, steps, dt = 10_000, 30, 1e-2
        p = np.zeros((trials, 3))
        phat = np.zeros((trials, 3))
        v = np.zeros((trials, 3))
        for _ in range(steps):
            p, phat = advance_positions(p, phat, v, 1.0, dt,
                                        rng.standard_normal((trials, 3)))
        err = p - phat
        se = err.std(axis=0, ddof=1) / np.sqrt(trials)
        assert (np.abs(err.mean(axis=0)) < 3 * se).all()

    def test_sigma_broadcasts_per_agent(self, rng):
        p = np.zeros((4, 3))
        phat = np.zeros((4, 3))
        sig = np.array([0.0, 1.0, 2.0, 3.0])[:, None]
        noise = np.ones((4, 3))
        p2, _ = advance_positions(p, phat, np.zeros((4, 3)), sig, 0.04, noise)
        assert p2[0] == pytest.approx([0.0, 0.0, 0.0])
        assert p2[2] == pytest.approx(2.0 * 0.2 * np.ones(3))


class TestLocalize:
    def test_resets_estimate_and_aoi(self):
        s = make_state(p=(1.0, 2.0, 3.0), phat=(0.0, 0.0, 0.0), aoi=0.7)
        out = localize(s)
        assert out.estimated_position == pytest.approx([1.0, 2.0, 3.0])
        assert out.aoi == 0.0
        assert out.true_position == pytest.approx(s.true_position)
        assert out.noise_std == s.noise_std

    def test_idempotent(self):
        s = make_state(p=(1.0, -1.0, 2.0), phat=(9.0, 9.0, 9.0), aoi=0.3)
        once = localize(s)
        twice = localize(once)
        assert (once.estimated_position == twice.estimated_position).all()
        assert once.aoi == twice.aoi == 0.0

    def test_expected_squared_error_growth_after_fix(self):
        # after a fix, E||p - phat||^2 grows as d sigma^2 t
        rng = np.random.default_rng(11)
        trials, steps, dt, sigma = 40_000, 25, 2e-3, 2.0
        p = rng.standard_normal((trials, 3))
        phat = p.copy()    # freshly localized
        v = np.full((trials, 3), 0.4)
        for _ in range(steps):
            p, phat = advance_positions(p, phat, v, sigma, dt,
                                        rng.standard_normal((trials, 3)))
        elapsed = steps * dt
        expected = 3 * sigma ** 2 * elapsed
        measured = ((p - phat) ** 2).sum(axis=1).mean()
        assert measured == pytest.approx(expected, rel=0.03)
