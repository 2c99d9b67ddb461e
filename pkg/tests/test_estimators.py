import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from ecgssl.errors import ValidationError
from ecgssl.estimators import EmotionClassifier, SignalTransformRecognizer
from ecgssl.signal import synth_ecg


@pytest.fixture(scope="module")
def segments():
    return np.stack([synth_ecg(55.0 + 9 * i, 256.0, 10.0, seed=i) for i in range(8)])


@pytest.fixture(scope="module")
def fitted_recognizer(segments):
    return SignalTransformRecognizer(epochs=2, seed=0).fit(segments)


class TestSignalTransformRecognizer:
    def test_get_params_round_trip(self):
        est = SignalTransformRecognizer(epochs=5, seed=3)
        params = est.get_params()
        assert params["epochs"] == 5
        clone = SignalTransformRecognizer(**params)
        assert clone.get_params() == params

    def test_set_params(self):
        est = SignalTransformRecognizer().set_params(lr=0.01, seed=9)
        assert est.lr == 0.01
        assert est.seed == 9

    def test_fit_returns_self_and_sets_attrs(self, fitted_recognizer):
        assert hasattr(fitted_recognizer, "params_")
        assert fitted_recognizer.loss_trace_.shape == (2, 7)

    def test_transform_shape(self, fitted_recognizer, segments):
        feats = fitted_recognizer.transform(segments)
        assert feats.shape == (8, 128)

    def test_predict_range(self, fitted_recognizer, segments):
        preds = fitted_recognizer.predict(segments)
        assert preds.shape == (8,)
        assert set(np.unique(preds)) <= set(range(7))

    def test_score(self, fitted_recognizer, segments):
        s = fitted_recognizer.score(segments, np.zeros(8, dtype=int))
        assert 0.0 <= s <= 1.0

    def test_unfitted_raises(self, segments):
        with pytest.raises(NotFittedError):
            SignalTransformRecognizer().transform(segments)
        with pytest.raises(NotFittedError):
            SignalTransformRecognizer().predict(segments)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            SignalTransformRecognizer(epochs=1).fit(np.zeros((4, 100)))
        bad = np.zeros((2, 2560))
        bad[0, 0] = np.inf
        with pytest.raises(ValidationError):
            SignalTransformRecognizer(epochs=1).fit(bad)

    def test_fit_deterministic(self, segments):
        a = SignalTransformRecognizer(epochs=1, seed=4).fit(segments)
        b = SignalTransformRecognizer(epochs=1, seed=4).fit(segments)
        np.testing.assert_array_equal(a.loss_trace_, b.loss_trace_)
        np.testing.assert_array_equal(a.transform(segments), b.transform(segments))


class TestEmotionClassifier:
    def test_transfer_path_freezes_trunk(self, fitted_recognizer, segments):
        y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        clf = EmotionClassifier(trunk=fitted_recognizer, epochs=2, seed=0).fit(segments, y)
        trunk_before = fitted_recognizer.params_["trunk/conv0/kernels"].value
        np.testing.assert_array_equal(clf.net_["trunk/conv0/kernels"].value, trunk_before)
        assert not clf.net_["trunk/conv0/kernels"].trainable

    def test_accepts_param_dict_trunk(self, fitted_recognizer, segments):
        y = np.array([0, 1] * 4)
        clf = EmotionClassifier(trunk=fitted_recognizer.params_, epochs=1, seed=0)
        clf.fit(segments, y)
        assert hasattr(clf, "net_")

    def test_supervised_path_trainable(self, segments):
        y = np.array([0, 1] * 4)
        clf = EmotionClassifier(trunk=None, epochs=1, seed=0).fit(segments, y)
        assert all(p.trainable for p in clf.net_.values())

    def test_predict_uses_original_labels(self, fitted_recognizer, segments):
        y = np.array([3, 3, 3, 3, 7, 7, 7, 7])
        clf = EmotionClassifier(trunk=fitted_recognizer, epochs=2, seed=0).fit(segments, y)
        preds = clf.predict(segments)
        np.testing.assert_array_equal(clf.classes_, [3, 7])
        assert set(np.unique(preds)) <= {3, 7}

    def test_predict_proba_rows_sum_to_one(self, fitted_recognizer, segments):
        y = np.array([0, 1] * 4)
        clf = EmotionClassifier(trunk=fitted_recognizer, epochs=2, seed=0).fit(segments, y)
        proba = clf.predict_proba(segments)
        assert proba.shape == (8, 2)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-6)

    def test_unfitted_raises(self, segments):
        with pytest.raises(NotFittedError):
            EmotionClassifier().predict(segments)

    def test_separable_data_learned(self, fitted_recognizer):
        X = np.stack([synth_ecg(50.0, 256.0, 10.0, seed=i) for i in range(6)]
                     + [synth_ecg(150.0, 256.0, 10.0, seed=i) for i in range(6)])
        y = np.array([0] * 6 + [1] * 6)
        clf = EmotionClassifier(trunk=fitted_recognizer, epochs=150, dropout=0.0,
                                seed=1).fit(X, y)
        assert np.mean(clf.predict(X) == y) >= 0.9
