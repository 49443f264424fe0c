import math
import os
from pathlib import Path

import numpy as np
import pytest

import rfm

DATA = Path(os.environ.get("RFM_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def test_bounds_match_reference():
    assert rfm.epsilon_single(100, 10, 0.05, 0.04, 0.01) == pytest.approx(0.04670679196216941533, rel=1e-12)
    assert rfm.rademacher_excess_bound(400, 5, 0.1, 0.02, 0.005, 1.0) == pytest.approx(
        0.33202705764386260643, rel=1e-12
    )
    assert rfm.epsilon_limit_n(100, 0.05, 0.01) < rfm.epsilon_single(100, 10, 0.05, 0.04, 0.01)


def test_toy_identity_and_coverage():
    toy = DATA / "toys" / "three_users.json"
    m = rfm.exact_moments(toy)
    assert m["mean"] == pytest.approx(0.385)
    for n in (1, 2, 5):
        assert rfm.exact_mean_loss_variance(toy, n) == pytest.approx(m["within"] / n + m["between"], abs=1e-12)
    assert rfm.monte_carlo_coverage(toy, 20, 5, 0.1, 500, 1) <= 0.1


def test_capped_log_and_errors():
    assert rfm.capped_log(1.0) == 0.0
    assert rfm.capped_log(0.0) == 1.0
    assert rfm.capped_log(math.exp(-10)) == pytest.approx(0.5)
    with pytest.raises(rfm.DataError):
        rfm.capped_log(1.5)
    with pytest.raises(rfm.RfmError):
        rfm.confidence_interval([0.5], 0.99)


def test_policy_gain_example():
    assert rfm.oracle_policy_gain([1.0, 0.0], [0.51, 0.49]) == pytest.approx((0.51, 1.0))


def test_population_and_features():
    users = rfm.sample_users(4, p=0.5, seed=3)
    assert len(users) == 4 and all(len(u) == rfm.NUM_BASE_FEATURES for u in users)
    pairs = rfm.generate_pairs(50, seed=2)
    fx = rfm.FeatureExtractor()
    norm = fx.fit_normalizer(pairs)
    a = norm.apply(fx.raw_features(pairs[0].context, pairs[0].response_a))
    b = norm.apply(fx.raw_features(pairs[0].context, pairs[0].response_b))
    label = rfm.label_preference(a, b, users[0])
    assert label == int(rfm.utility(a, users[0]) > rfm.utility(b, users[0]))


def test_adapt_recovers_direction():
    rng = np.random.default_rng(0)
    w_star = rng.normal(size=6)
    x = rng.normal(size=(300, 6))
    labels = (x @ w_star > 0).astype(int).tolist()
    head = rfm.adapt(x, labels)
    cos = head["w"] @ w_star / (np.linalg.norm(head["w"]) * np.linalg.norm(w_star))
    assert cos > 0.95


def test_train_and_score(tmp_path):
    pairs = rfm.generate_pairs(120, seed=5)
    records = [rfm.PreferenceRecord("r0", p, i % 2) for i, p in enumerate(pairs)]
    model, val_acc = rfm.train(records, mode="hashed", hidden=[8], feature_dim=4, updates=50)
    assert model.feature_dim == 4
    assert 0.0 <= val_acc <= 1.0
    p = model.probability("r0", pairs[0])
    swapped = rfm.PreferencePair(pairs[0].context, pairs[0].response_b, pairs[0].response_a)
    assert p + model.probability("r0", swapped) == pytest.approx(1.0)
    assert model.encode(pairs[0].context, pairs[0].response_a).shape == (4,)


def test_run_experiment(tmp_path):
    cfg = "\n".join(
        [
            "corpus_size = 200",
            "raters = 4",
            "heldout_users = 3",
            "encoder.mode = oracle",
            "encoder.hidden_layers = none",
            "encoder.feature_dim = 13",
            "train.learning_rate = 2",
            "train.total_updates = 200",
            "adaptation_examples = 20",
            "eval.passes = 3",
        ]
    )
    out = rfm.run_experiment(cfg, tmp_path / "run")
    assert 0.5 < out["rfm"]["mean"] <= 1.0
    assert (tmp_path / "run" / "model_rfm.json").exists()
    model = rfm.load_model(tmp_path / "run" / "model_rfm.json")
    assert model.raters == ["r0", "r1", "r2", "r3"]
    with pytest.raises(rfm.ConfigError):
        rfm.run_experiment("nonsense_key = 1")
