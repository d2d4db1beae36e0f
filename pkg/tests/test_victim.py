from decimal import Decimal

import numpy as np
import pytest

from imalab.models import TrainConfig, train_model
from imalab.victim import DefensePolicy, VictimEndpoint, apply_defense


def _model(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(50, 3))
    y = (X[:, 0] > 0).astype(int)
    return train_model("linear", 3, 2, X, y, TrainConfig(epochs=10, seed=seed))


class TestApplyDefense:
    def test_none_is_identity(self, rng):
        probs = rng.dirichlet(np.ones(3))
        out = apply_defense(DefensePolicy("none"), probs, rng)
        assert np.array_equal(out, probs)

    def test_hard_label_projection(self, rng):
        out = apply_defense(DefensePolicy("hard_label"), np.array([0.7, 0.3]), rng)
        assert np.array_equal(out, [1.0, 0.0])

    def test_hard_label_tie_to_lowest_index(self, rng):
        out = apply_defense(DefensePolicy("hard_label"), np.array([0.5, 0.5]), rng)
        assert np.array_equal(out, [1.0, 0.0])

    def test_gaussian_sigma_zero_identity(self, rng):
        probs = np.array([0.2, 0.8])
        out = apply_defense(DefensePolicy("gaussian", sigma=0.0), probs, rng)
        assert np.array_equal(out, probs)

    def test_gaussian_output_on_simplex(self, rng):
        policy = DefensePolicy("gaussian", sigma=0.4)
        for _ in range(200):
            out = apply_defense(policy, rng.dirichlet(np.ones(4)), rng)
            assert np.all(out >= 0)
            assert abs(out.sum() - 1.0) < 1e-12

    def test_label_preserving_always_preserves_argmax(self, rng):
        policy = DefensePolicy("gaussian_label_preserving", sigma=0.5)
        probs = np.array([0.6, 0.4])
        for _ in range(500):
            out = apply_defense(policy, probs, rng)
            assert np.argmax(out) == 0

    def test_label_preserving_exhaustion_falls_back(self, rng):
        # cap of 1 resample with huge noise: fallback must return the
        # undefended vector
        policy = DefensePolicy("gaussian_label_preserving", sigma=50.0,
                               max_resamples=1)
        probs = np.array([0.9, 0.1])
        outs = [apply_defense(policy, probs, np.random.default_rng(i))
                for i in range(200)]
        fallbacks = [o for o in outs if np.array_equal(o, probs)]
        assert fallbacks  # exhaustion happens
        assert all(np.argmax(o) == 0 for o in outs)

    def test_flip_frequency_matches_reference(self):
        # independent re-implementation of the clamp-renormalize procedure
        probs = np.array([0.9, 0.1])
        sigma = 0.5
        n = 100_000

        rng_impl = np.random.default_rng(42)
        policy = DefensePolicy("gaussian", sigma=sigma)
        flips_impl = sum(
            np.argmax(apply_defense(policy, probs, rng_impl)) != 0
            for _ in range(n)) / n

        rng_ref = np.random.default_rng(4242)
        noise = rng_ref.normal(0.0, sigma, size=(n, 2))
        perturbed = np.minimum(np.maximum(probs + noise, 1e-6), 1.0)
        perturbed /= perturbed.sum(axis=1, keepdims=True)
        flips_ref = np.mean(np.argmax(perturbed, axis=1) != 0)

        assert abs(flips_impl - flips_ref) < 0.01

    def test_invalid_probs_rejected(self, rng):
        with pytest.raises(ValueError):
            apply_defense(DefensePolicy("none"), np.array([0.7, 0.7]), rng)

    def test_bad_policy(self):
        with pytest.raises(ValueError):
            DefensePolicy("blur")
        with pytest.raises(ValueError):
            DefensePolicy("gaussian", sigma=-1.0)


class TestEndpoint:
    def test_fresh_meter(self):
        endpoint = VictimEndpoint(_model(), price_per_query="0.01")
        meter = endpoint.usage()
        assert meter.query_count == 0
        assert meter.total_cost == 0

    def test_metering_arithmetic(self, rng):
        endpoint = VictimEndpoint(_model(), price_per_query="0.003")
        for _ in range(7):
            endpoint.query(rng.normal(size=3))
        meter = endpoint.usage()
        assert meter.query_count == 7
        assert meter.total_cost == Decimal("0.021")
        assert meter.total_cost == meter.query_count * meter.price_per_query

    def test_fractional_cent_pricing(self, rng):
        # 9613 queries at 5/9613 each totals ~5 currency units
        price = Decimal(5) / Decimal(9613)
        endpoint = VictimEndpoint(_model(), price_per_query=price)
        for _ in range(9613):
            endpoint.query(rng.normal(size=3))
        assert abs(endpoint.usage().total_cost - 5) < Decimal("1e-20")

    def test_costs_scale_with_price(self, rng):
        a = VictimEndpoint(_model(), price_per_query="0.002")
        b = VictimEndpoint(_model(), price_per_query="0.006")
        x = rng.normal(size=3)
        for _ in range(5):
            a.query(x)
            b.query(x)
        assert b.usage().total_cost == 3 * a.usage().total_cost

    def test_rejected_query_not_billed(self):
        endpoint = VictimEndpoint(_model(), price_per_query="1")
        with pytest.raises(ValueError):
            endpoint.query(np.zeros(5))
        assert endpoint.usage().query_count == 0

    def test_none_policy_returns_raw_probs(self, rng):
        model = _model()
        endpoint = VictimEndpoint(model)
        x = rng.normal(size=3)
        response = endpoint.query(x)
        assert np.allclose(response.probs, model.predict_proba(x), atol=0)
        assert response.hard == int(np.argmax(response.probs))

    def test_defense_reproducible_per_seed(self, rng):
        model = _model()
        xs = rng.normal(size=(10, 3))
        runs = []
        for _ in range(2):
            endpoint = VictimEndpoint(model, DefensePolicy("gaussian", 0.3),
                                      seed=77)
            runs.append(np.stack([endpoint.query(x).probs for x in xs]))
        assert np.array_equal(runs[0], runs[1])

    def test_distortion_audit(self, rng):
        model = _model()
        endpoint = VictimEndpoint(model, DefensePolicy("hard_label", delta=0.1))
        xs = rng.normal(size=(20, 3))
        expected = 0.0
        for x in xs:
            raw = model.predict_proba(x)
            endpoint.query(x)
            one_hot = np.zeros_like(raw)
            one_hot[np.argmax(raw)] = 1.0
            expected += 0.5 * np.abs(one_hot - raw).sum()
        assert abs(endpoint.mean_distortion - expected / 20) < 1e-12
