"""Selection-function tests against direct-formula oracles."""

import numpy as np
import pytest

from localcsmc.selection import (
    boltzmann,
    boltzmann_batch,
    index_from_uniform,
    rosenbluth_teller,
    rosenbluth_teller_at,
    rosenbluth_teller_batch,
    sample_index,
    softmax_log_weights,
)


def naive_boltzmann(h):
    """Unshifted direct formula; valid at moderate magnitudes only."""
    e = np.exp(np.asarray(h, dtype=np.float64))
    denom = 1.0 + e.sum()
    return np.concatenate(([1.0 / denom], e / denom))


def naive_rosenbluth_teller(h):
    e = np.exp(np.asarray(h, dtype=np.float64))
    total = 1.0 + e.sum()
    p = e / (total - np.minimum(e, 1.0))
    return np.concatenate(([1.0 - p.sum()], p))


class TestBoltzmann:
    def test_symmetric_weights(self):
        np.testing.assert_allclose(boltzmann(np.zeros(2)), np.full(3, 1 / 3), atol=1e-15)

    def test_single_proposal_value(self):
        np.testing.assert_allclose(
            boltzmann(np.array([np.log(3.0)])), [0.25, 0.75], atol=1e-15
        )

    def test_matches_naive_formula(self, rng):
        for _ in range(200):
            h = rng.uniform(-20, 20, size=3)
            np.testing.assert_allclose(boltzmann(h), naive_boltzmann(h), atol=1e-12)

    def test_underflowed_entries(self):
        p = boltzmann(np.array([-np.inf, 0.0]))
        assert p[1] == 0.0
        np.testing.assert_allclose(p.sum(), 1.0, atol=1e-15)


class TestRosenbluthTeller:
    def test_forced_move_single(self):
        np.testing.assert_allclose(rosenbluth_teller(np.zeros(1)), [0.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(
            rosenbluth_teller(np.array([np.log(3.0)])), [0.0, 1.0], atol=1e-15
        )

    def test_two_equal_proposals(self):
        np.testing.assert_allclose(rosenbluth_teller(np.zeros(2)), [0.0, 0.5, 0.5], atol=1e-15)

    def test_matches_naive_formula(self, rng):
        for _ in range(200):
            h = rng.uniform(-20, 20, size=4)
            np.testing.assert_allclose(
                rosenbluth_teller(h), naive_rosenbluth_teller(h), atol=1e-12
            )

    def test_reference_placement(self, rng):
        lw = rng.standard_normal(4)
        for ref in range(4):
            p = rosenbluth_teller_at(lw, ref)
            others = [i for i in range(4) if i != ref]
            direct = rosenbluth_teller(lw[others] - lw[ref])
            assert p[ref] == pytest.approx(direct[0], abs=1e-14)
            np.testing.assert_allclose(p[others], direct[1:], atol=1e-14)


class TestProperties:
    def test_normalisation_extreme_range(self, rng):
        for _ in range(2000):
            n = int(rng.integers(1, 9))
            h = rng.uniform(-700, 50, size=n)
            for f in (boltzmann, rosenbluth_teller):
                p = f(h)
                assert abs(p.sum() - 1.0) <= 1e-12
                assert np.all(p >= 0) and np.all(p <= 1)

    def test_peskun_order(self, rng):
        """The forced-move function never raises the rejection mass."""
        for _ in range(2000):
            n = int(rng.integers(1, 9))
            h = rng.uniform(-700, 50, size=n)
            assert boltzmann(h)[0] >= rosenbluth_teller(h)[0] - 1e-15

    def test_barker_and_mh_reductions(self, rng):
        for _ in range(500):
            h = float(rng.uniform(-30, 30))
            barker = 1.0 / (1.0 + np.exp(-h))
            assert boltzmann(np.array([h]))[1] == pytest.approx(barker, abs=1e-12)
            assert rosenbluth_teller(np.array([h]))[1] == pytest.approx(
                min(1.0, np.exp(h)), abs=1e-12
            )

    def test_shift_stability(self, rng):
        """Internal shifting never changes outputs beyond rounding."""
        for _ in range(200):
            h = rng.uniform(-5, 5, size=4)
            for c in (-300.0, 0.0, 300.0):
                base = boltzmann(h)
                shifted_ref = softmax_log_weights(np.concatenate(([0.0], h)) + c)
                np.testing.assert_allclose(base, shifted_ref, atol=1e-12)

    def test_batch_versions_match_scalar(self, rng):
        h = rng.uniform(-40, 10, size=(50, 5))
        bb = boltzmann_batch(h)
        rb = rosenbluth_teller_batch(h)
        for i in range(50):
            np.testing.assert_allclose(bb[i], boltzmann(h[i]), atol=1e-14)
            np.testing.assert_allclose(rb[i], rosenbluth_teller(h[i]), atol=1e-14)


class TestSampleIndex:
    def test_point_masses(self, rng):
        assert sample_index(np.array([1.0, 0.0, 0.0]), rng) == 0
        assert sample_index(np.array([0.0, 1.0]), rng) == 1

    def test_uniform_frequencies(self, rng):
        p = np.full(4, 0.25)
        draws = np.array([sample_index(p, rng) for _ in range(100_000)])
        freq = np.bincount(draws, minlength=4) / draws.size
        se = np.sqrt(0.25 * 0.75 / draws.size)
        assert np.all(np.abs(freq - 0.25) < 4 * se)

    def test_inverse_cdf_boundaries(self):
        p = np.array([0.25, 0.5, 0.25])
        assert index_from_uniform(p, 0.0) == 0
        assert index_from_uniform(p, 0.2499) == 0
        assert index_from_uniform(p, 0.25) == 1
        assert index_from_uniform(p, 0.999999) == 2
