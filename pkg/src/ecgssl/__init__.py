"""Self-supervised ECG representation learning.

A convolutional network is pretrained to recognize which of seven signal
transformations was applied to a 10 s ECG segment (pseudo-labels, no human
annotation); its convolutional trunk is then transferred frozen into a
downstream binary emotion classifier.

Typical entry points:

- :class:`ecgssl.estimators.SignalTransformRecognizer` /
  :class:`ecgssl.estimators.EmotionClassifier` — scikit-learn style API;
- :mod:`ecgssl.training` — functional training/evaluation harness;
- ``ecgssl`` console script — CLI (see :mod:`ecgssl.cli`).
"""

from .estimators import EmotionClassifier, SignalTransformRecognizer
from .signal import TARGET_FS_HZ, WINDOW_LEN, RawRecording, synth_ecg
from .training import TrainConfig, prepare_dataset, run_cv_experiment
from .transforms import TransformId, TransformParams

__version__ = "0.1.0"

__all__ = [
    "EmotionClassifier",
    "RawRecording",
    "SignalTransformRecognizer",
    "TARGET_FS_HZ",
    "TrainConfig",
    "TransformId",
    "TransformParams",
    "WINDOW_LEN",
    "prepare_dataset",
    "run_cv_experiment",
    "synth_ecg",
    "__version__",
]
