import numpy as np
import pytest

from ecgssl.errors import ValidationError
from ecgssl.io import (
    read_manifest,
    read_recording_csv,
    read_recordings,
    write_manifest,
    write_recording_csv,
)
from ecgssl.signal import RawRecording


@pytest.fixture
def recording():
    rng = np.random.default_rng(11)
    return RawRecording(rng.normal(size=512), 256.0, "s01",
                        {"arousal": 6.5, "valence": 3.25, "stress": 7.0})


def test_csv_round_trip(tmp_path, recording):
    path = tmp_path / "rec.csv"
    write_recording_csv(recording, path)
    back = read_recording_csv(path)
    np.testing.assert_array_equal(back.samples, recording.samples)
    assert back.subject_id == "s01"
    assert back.sample_rate_hz == 256.0
    assert back.condition_labels == recording.condition_labels


def test_csv_bad_header_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("foo,bar\n1,2\n")
    with pytest.raises(ValidationError):
        read_recording_csv(path)


def test_manifest_round_trip(tmp_path, recording):
    other = RawRecording(np.arange(300, dtype=float), 2048.0, "s02")
    write_manifest([recording, other], tmp_path / "data")
    back = read_manifest(tmp_path / "data")
    assert len(back) == 2
    np.testing.assert_allclose(back[0].samples, recording.samples, atol=1e-6)
    assert back[1].subject_id == "s02"
    assert back[1].condition_labels == {}
    assert back[1].sample_rate_hz == 2048.0


def test_manifest_floats_are_32bit_exact(tmp_path):
    rec = RawRecording(np.array([1.5, -0.25, 3.0]), 256.0, "s")
    write_manifest([rec], tmp_path / "d")
    back = read_manifest(tmp_path / "d")
    np.testing.assert_array_equal(back[0].samples, rec.samples)


def test_read_recordings_dispatch(tmp_path, recording):
    write_manifest([recording], tmp_path / "d")
    assert len(read_recordings(tmp_path / "d")) == 1
    write_recording_csv(recording, tmp_path / "one.csv")
    assert len(read_recordings(tmp_path / "one.csv")) == 1
