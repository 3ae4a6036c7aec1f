import math

import pytest

try:
    import mstgd
except ImportError:
    import _mstgd as mstgd


def test_blend_general_hand_case():
    bc = mstgd.blend_general(2.0, 1.0, 1.0, 2.0)
    assert bc["p"] == pytest.approx(4 / 9, rel=1e-14)
    assert bc["q"] == pytest.approx(1 / 9, rel=1e-14)
    assert not bc["degenerate"]
    # unbiasedness ratio
    assert bc["p"] / (1 - bc["q"]) == pytest.approx(0.5, rel=1e-12)


def test_blend_equal_mean_sums_to_one_exactly():
    bc = mstgd.blend_equal_mean(1.0, 3.0)
    assert bc["p"] == pytest.approx(0.75)
    assert bc["p"] + bc["q"] == 1.0
    degenerate = mstgd.blend_equal_mean(0.0, 0.0)
    assert degenerate["degenerate"] and degenerate["q"] == 1.0


def test_stationary_variance_hand_value():
    value, degenerate = mstgd.stationary_variance([(2.0, 1.0)], [(1.0, 2.0)], [1.0])
    assert value == pytest.approx(2 / 9, rel=1e-14)
    assert degenerate == 0


def test_dominance_threshold():
    assert mstgd.dominance_threshold(0.9, 0.95) == 23
    assert mstgd.dominance_threshold(0.9, 0.9) is None


def test_scripted_moments_match_recursion():
    out = mstgd.scripted_moments(
        [[(2.0, 1.0)], [(1.0, 2.0)]], kind="general", replications=50000, seed=3
    )
    assert out["recursion_variance"][1] == pytest.approx(2 / 9, rel=1e-12)
    assert out["variance"][1] == pytest.approx(2 / 9, rel=0.06)
    assert out["mean"][1] == pytest.approx(1.0, abs=4 * out["mean_se"][1])


def test_population_rounds_are_deterministic():
    a = mstgd.population_rounds("dec_udata", seed=5)
    b = mstgd.population_rounds("dec_udata", seed=5)
    assert a == b
    assert len(a) == 10 and len(a[0]) == 40
    assert all(8 <= v <= 12 for v in a[0])


def test_estimator_accuracy_rank():
    out = mstgd.estimator_accuracy("dec_udata", repetitions=20, seed=7)
    assert out["rank1_count"] >= 18
    methods = out["methods"]
    assert methods["mst"]["mean_sq_dev"] < methods["st"]["mean_sq_dev"]
    assert methods["mst"]["mean_sq_dev"] < methods["batch"]["mean_sq_dev"]
    assert methods["mst"]["mean_sq_dev"] < methods["sgd"]["mean_sq_dev"]


def test_train_quadratic_converges():
    trace = mstgd.train_quadratic("mstgd", h=0.5, batch=8, iters=500, seed=1)
    gaps = [g for g in trace["optimality_gap"] if g is not None]
    assert gaps[-1] < 1e-10
    fgd = mstgd.train_quadratic("fgd", h=0.5, iters=50, seed=1)
    losses = fgd["loss"]
    assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))


def test_train_digits_improves_over_chance():
    trace = mstgd.train_digits("mstgd", iters=150, subset=500, seed=2)
    accs = [a for a in trace["test_accuracy"] if a is not None]
    assert accs[-1] > 0.3  # deterministic run, far above the 0.1 chance level


def test_verify_suite_roundtrip():
    out = mstgd.verify_suite("lemma2", seed=1)
    assert out["passed"]
    assert any("k = 23" in note for note in out["notes"])


def test_dataset_kinds_listing():
    assert "vard_ndata" in mstgd.dataset_kinds
    assert len(mstgd.dataset_kinds) == 7
