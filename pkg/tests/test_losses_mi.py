import math

import numpy as np
import pytest

from core.errors import ContractViolation, DatasetError
from core.losses_mi import (
    LossSpec,
    LossVariant,
    Prior,
    batch_loss_and_grad,
    cross_entropy_loss,
    diff_pmi,
    empirical_label_priors,
    empirical_prior,
    estimate_mi,
    mi_prior_for,
    pc_sigmoid,
    pc_softmax,
    pmi,
    pmi_all,
    predict_labels,
    prior_corrected_decision,
    sigmoid,
)
from core.models import MlpModel
from core.numerics import gradient_check, softmax


def _random_prior(np_rng, m):
    p = np_rng.uniform(0.05, 1.0, size=m)
    return Prior(p / p.sum())


def test_prior_validation():
    with pytest.raises(ContractViolation):
        Prior(np.array([0.5, 0.6]))
    with pytest.raises(ContractViolation):
        Prior(np.array([1.0, 0.0]))
    assert Prior.uniform(4).is_uniform
    assert Prior.uniform(5).entropy() == pytest.approx(math.log(5.0))


def test_prior_from_counts_rejects_empty_class():
    with pytest.raises(DatasetError):
        Prior.from_counts(np.array([3, 0, 2]))


def test_empirical_prior_matches_unbalanced_table():
    labels = np.repeat(np.arange(5), [6000, 12000, 18000, 24000, 30000])
    prior = empirical_prior(labels, 5)
    np.testing.assert_allclose(prior.probs, [0.07, 0.13, 0.20, 0.27, 0.33], atol=0.005)


def test_pc_softmax_example():
    out = pc_softmax(np.array([1.0, 2.0, 3.0]), Prior(np.array([0.2, 0.3, 0.5])))
    np.testing.assert_allclose(out, [0.21231, 0.57713, 1.56880], atol=1e-5)


def test_pc_softmax_prior_weighted_sum_is_one(np_rng):
    for _ in range(300):
        m = int(np_rng.integers(2, 8))
        prior = _random_prior(np_rng, m)
        out = pc_softmax(np_rng.uniform(-20, 20, size=m), prior)
        assert abs(float(np.dot(prior.probs, out)) - 1.0) <= 1e-12


def test_pc_softmax_uniform_prior_reduces_to_scaled_softmax(np_rng):
    for _ in range(1000):
        m = int(np_rng.integers(2, 10))
        logits = np_rng.uniform(-30, 30, size=m)
        np.testing.assert_allclose(pc_softmax(logits, Prior.uniform(m)), m * softmax(logits), rtol=1e-12)


def test_pc_softmax_uniform_prior_gradients_equal_softmax(np_rng):
    for _ in range(1000):
        b, m = int(np_rng.integers(1, 6)), int(np_rng.integers(2, 8))
        logits = np_rng.normal(scale=5.0, size=(b, m))
        labels = np_rng.integers(0, m, size=b)
        loss_s, grad_s = batch_loss_and_grad(logits, labels, LossSpec(LossVariant.SOFTMAX_CE))
        loss_p, grad_p = batch_loss_and_grad(logits, labels, LossSpec(LossVariant.PC_SOFTMAX_CE,
                                                                      prior=Prior.uniform(m)))
        assert np.array_equal(grad_s, grad_p)
        assert loss_s - loss_p == pytest.approx(math.log(m), abs=1e-12)


def test_pmi_example():
    assert pmi(np.array([1.0, 2.0, 3.0]), 2) == pytest.approx(0.691006, abs=1e-6)


def test_pmi_is_log_pc_softmax(np_rng):
    for _ in range(1000):
        m = int(np_rng.integers(2, 8))
        prior = _random_prior(np_rng, m)
        logits = np_rng.uniform(-20, 20, size=m)
        y = int(np_rng.integers(0, m))
        assert abs(pmi(logits, y, prior) - math.log(pc_softmax(logits, prior)[y])) <= 1e-12


def test_pmi_rejects_bad_label():
    with pytest.raises(ContractViolation):
        pmi(np.array([0.0, 1.0]), 2)


def test_pmi_all_expectation_under_prior_is_bounded(np_rng):
    # Σ_y P(y) exp(PMI_y) = 1 ⇒ Σ_y P(y) PMI_y ≤ 0 (Jensen)
    prior = _random_prior(np_rng, 4)
    values = pmi_all(np_rng.normal(size=(50, 4)), prior)
    assert np.all(values @ prior.probs <= 1e-12)


def test_pc_sigmoid_properties():
    assert pc_sigmoid(0.0, 0.3) == pytest.approx(1.0)
    for z in (-4.0, -0.5, 0.0, 2.0, 9.0):
        assert pc_sigmoid(z, 0.5) == pytest.approx(2.0 * float(sigmoid(np.array(z))), rel=1e-12)
        p = 0.2
        assert p * pc_sigmoid(z, p) + (1 - p) * pc_sigmoid(-z, 1 - p) == pytest.approx(
            p * math.exp(z) / (p * math.exp(z) + 1 - p) + (1 - p) / (p * math.exp(z) + 1 - p), rel=1e-12)
    with pytest.raises(ContractViolation):
        pc_sigmoid(1.0, 1.0)


@pytest.mark.parametrize("variant", list(LossVariant))
def test_batch_gradient_matches_finite_differences(variant, np_rng):
    b, m = 4, 5
    logits = np_rng.normal(size=(b, m))
    if variant.is_multilabel:
        labels = np.array([[1, 0, 0, 1, 0], [0, 1, 0, 0, 0], [0, 0, 1, 1, 1], [1, 1, 0, 0, 0]])
    else:
        labels = np.array([0, 3, 4, 1])
    kwargs = {}
    if variant is LossVariant.PC_SOFTMAX_CE:
        kwargs["prior"] = Prior(np.array([0.1, 0.2, 0.3, 0.15, 0.25]))
    if variant is LossVariant.PC_SIGMOID_MULTILABEL:
        kwargs["label_priors"] = np.array([0.4, 0.3, 0.2, 0.5, 0.25])
    spec = LossSpec(variant, **kwargs)
    _, grad = batch_loss_and_grad(logits, labels, spec)
    err = gradient_check(lambda z: batch_loss_and_grad(z, labels, spec)[0], logits, grad)
    assert err < 1e-6


def test_cross_entropy_loss_single_example():
    logits = np.array([1.0, 2.0, 3.0])
    loss = cross_entropy_loss(logits, 2, LossSpec(LossVariant.SOFTMAX_CE))
    assert loss == pytest.approx(-math.log(0.665241), abs=1e-6)


def test_loss_spec_requires_matching_prior():
    with pytest.raises(ContractViolation):
        LossSpec(LossVariant.PC_SOFTMAX_CE)
    with pytest.raises(ContractViolation):
        LossSpec(LossVariant.SOFTMAX_CE, prior=Prior.uniform(3))
    with pytest.raises(ContractViolation):
        LossSpec(LossVariant.PC_SIGMOID_MULTILABEL, label_priors=np.array([0.5, 1.0]))
    spec = LossSpec(LossVariant.PC_SOFTMAX_CE, prior=Prior(np.array([0.25, 0.75])))
    again = LossSpec.from_dict(spec.to_dict())
    assert again.variant is LossVariant.PC_SOFTMAX_CE
    np.testing.assert_array_equal(again.prior.probs, spec.prior.probs)


def test_empirical_label_priors_rejects_degenerate_labels():
    with pytest.raises(DatasetError):
        empirical_label_priors(np.array([[1, 0], [1, 1]]))
    np.testing.assert_allclose(empirical_label_priors(np.array([[1, 0], [0, 1], [1, 1], [0, 0]])), [0.5, 0.5])


def test_predict_labels_variants():
    logits = np.array([[0.2, -1.0, 0.2], [-3.0, 2.0, 0.0]])
    np.testing.assert_array_equal(predict_labels(logits, LossSpec(LossVariant.SOFTMAX_CE)), [0, 1])
    np.testing.assert_array_equal(predict_labels(logits, LossSpec(LossVariant.SIGMOID_MULTILABEL)),
                                  [[1, 0, 1], [0, 1, 1]])
    pc = LossSpec(LossVariant.PC_SIGMOID_MULTILABEL, label_priors=np.array([0.5, 0.5, 0.5]))
    np.testing.assert_array_equal(predict_labels(logits, pc), [[1, 0, 1], [0, 1, 1]])


def test_prior_corrected_decision_rebases_by_prior():
    logits = np.array([[1.0, 0.9]])
    prior = Prior(np.array([0.9, 0.1]))
    assert prior_corrected_decision(logits, prior)[0] == 1
    assert predict_labels(logits, LossSpec(LossVariant.SOFTMAX_CE))[0] == 0


def test_diff_pmi_cancels_normalizer(np_rng):
    for _ in range(200):
        m = int(np_rng.integers(2, 7))
        prior = _random_prior(np_rng, m)
        logits = np_rng.normal(scale=3.0, size=m)
        y = int(np_rng.integers(0, m))
        values = pmi_all(logits, prior)
        expected = values[y] - np.mean(np.delete(values, y))
        assert diff_pmi(logits, y) == pytest.approx(expected, abs=1e-12)


def test_estimate_mi_of_constant_model_is_zero():
    model = MlpModel.build(3, 4, hidden=(5,), init="zeros")
    X = np.arange(30, dtype=np.float64).reshape(10, 3)
    y = np.arange(10) % 4
    assert estimate_mi(model, X, y).mi_estimate == 0.0
    prior = Prior(np.array([0.1, 0.2, 0.3, 0.4]))
    assert estimate_mi(model, X, y, prior).mi_estimate == pytest.approx(0.0, abs=1e-15)


def test_estimate_mi_of_single_sample_is_its_pmi(np_rng):
    model = MlpModel.build(3, 4, hidden=(5,), init="zeros")
    model.params = {k: np_rng.normal(size=v.shape) for k, v in model.params.items()}
    prior = _random_prior(np_rng, 4)
    for label in range(4):
        x = np_rng.normal(size=(1, 3))
        logits = model.forward(x)[0]
        for p in (None, prior):
            result = estimate_mi(model, x, np.array([label]), p)
            assert result.mi_estimate == pytest.approx(pmi(logits, label, p), abs=1e-15)
            assert result.per_sample_pmi.shape == (1,)
            assert result.std_error == 0.0


def test_estimate_mi_std_error_is_spread_of_pmi(np_rng):
    model = MlpModel.build(2, 3, hidden=(4,), init="zeros")
    model.params = {k: np_rng.normal(size=v.shape) for k, v in model.params.items()}
    X = np_rng.normal(size=(400, 2))
    y = np_rng.integers(0, 3, size=400)
    result = estimate_mi(model, X, y)
    expected = np.std(result.per_sample_pmi, ddof=1) / 20.0
    assert result.std_error == pytest.approx(expected, rel=1e-12)
    assert result.std_error > 0.0


def test_mi_prior_for_variants():
    prior = Prior.uniform(3)
    assert mi_prior_for(LossSpec(LossVariant.SOFTMAX_CE), 3) is None
    assert mi_prior_for(LossSpec(LossVariant.PC_SOFTMAX_CE, prior=prior), 3) is prior
    with pytest.raises(ContractViolation):
        mi_prior_for(LossSpec(LossVariant.SIGMOID_MULTILABEL), 3)
