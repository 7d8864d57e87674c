import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mfccshield.audio_io import AudioBuffer, encode_wav, quantize, read_wav, resample_check, write_wav
from mfccshield.errors import (
    EmptyAudio, IoFailure, MalformedWav, SampleRateMismatch, UnsupportedEncoding, ValidationError,
)


def wav_bytes(pcm: bytes, rate=16000, channels=1, bits=16, tag=1, extra=b"", fmt_extra=b""):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block, block, bits) + fmt_extra
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + extra
    body += b"data" + struct.pack("<I", len(pcm)) + pcm
    return b"RIFF" + struct.pack("<I", len(body)) + body


def test_round_trip(tmp_path, rng):
    x = rng.uniform(-1, 1, 5000)
    write_wav(AudioBuffer(x, 16000), tmp_path / "a.wav")
    y = read_wav(tmp_path / "a.wav")
    assert len(y) == x.size and y.sample_rate == 16000
    assert np.max(np.abs(y.samples - x)) <= 1 / 32768


def test_full_scale_clamps_on_write():
    codes = quantize(np.array([1.0, -1.0, 0.5]))
    assert codes.tolist() == [32767, -32768, 16384]


def test_max_code_reads_back(tmp_path):
    (tmp_path / "m.wav").write_bytes(wav_bytes(struct.pack("<2h", 32767, -32768)))
    assert read_wav(tmp_path / "m.wav").samples.tolist() == [32767 / 32768, -1.0]


def test_header_is_canonical():
    data = encode_wav(AudioBuffer(np.zeros(10)))
    assert len(data) == 44 + 20
    assert data[:4] == b"RIFF" and data[8:16] == b"WAVEfmt "
    assert struct.unpack_from("<HHIIHH", data, 20) == (1, 1, 16000, 32000, 2, 16)


def test_stereo_downmix_is_channel_mean(tmp_path):
    left = np.array([1000, -2000, 3], dtype="<i2")
    right = np.array([3000, 2000, 4], dtype="<i2")
    pcm = np.column_stack([left, right]).tobytes()
    (tmp_path / "s.wav").write_bytes(wav_bytes(pcm, channels=2))
    y = read_wav(tmp_path / "s.wav")
    expect = (left.astype(float) + right.astype(float)) / 2 / 32768
    np.testing.assert_array_equal(y.samples, expect)


def test_skips_unknown_chunks(tmp_path):
    extra = b"LIST" + struct.pack("<I", 5) + b"abcde" + b"\x00"
    (tmp_path / "l.wav").write_bytes(wav_bytes(struct.pack("<3h", 1, 2, 3), extra=extra))
    assert len(read_wav(tmp_path / "l.wav")) == 3


def test_extensible_pcm_accepted(tmp_path):
    ext = struct.pack("<HHI", 22, 16, 4) + b"\x01\x00" + b"\x00" * 14
    (tmp_path / "e.wav").write_bytes(wav_bytes(struct.pack("<2h", 5, 6), tag=0xFFFE, fmt_extra=ext))
    assert len(read_wav(tmp_path / "e.wav")) == 2


@pytest.mark.parametrize("data, error", [
    (b"not a wav file at all", MalformedWav),
    (b"RIFF\x04\x00\x00\x00WAVE", MalformedWav),
    (wav_bytes(b"\x00\x00" * 4)[:-3], MalformedWav),
    (wav_bytes(b"\x00" * 12, bits=24), UnsupportedEncoding),
    (wav_bytes(b"\x00" * 8, bits=32, tag=3), UnsupportedEncoding),
    (wav_bytes(b""), EmptyAudio),
])
def test_bad_files(tmp_path, data, error):
    (tmp_path / "bad.wav").write_bytes(data)
    with pytest.raises(error):
        read_wav(tmp_path / "bad.wav")


def test_missing_file_is_io_failure(tmp_path):
    with pytest.raises(IoFailure):
        read_wav(tmp_path / "nope.wav")


def test_buffer_validation():
    with pytest.raises(EmptyAudio):
        AudioBuffer(np.array([]))
    with pytest.raises(ValidationError):
        AudioBuffer(np.array([1.5]))
    with pytest.raises(ValidationError):
        AudioBuffer(np.array([np.nan]))
    assert AudioBuffer.clipped([2.0, -3.0]).samples.tolist() == [1.0, -1.0]


@pytest.mark.parametrize("rate, required, ok", [(16000, 16000, True), (44100, 16000, False), (8000, 8000, True)])
def test_resample_check(rate, required, ok):
    buf = AudioBuffer(np.zeros(4), rate)
    if ok:
        assert resample_check(buf, required) is buf
    else:
        with pytest.raises(SampleRateMismatch):
            resample_check(buf, required)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 400), elements=st.floats(-1, 1)),
       st.sampled_from([8000, 16000, 22050]))
def test_round_trip_property(tmp_path_factory, samples, rate):
    path = tmp_path_factory.mktemp("rt") / "x.wav"
    write_wav(AudioBuffer(samples, rate), path)
    back = read_wav(path)
    assert back.sample_rate == rate and len(back) == samples.size
    assert np.max(np.abs(back.samples - samples)) <= 1 / 32768


@settings(max_examples=60, deadline=None)
@given(arrays(np.int16, st.tuples(st.integers(1, 200), st.integers(2, 4))))
def test_downmix_property(tmp_path_factory, codes):
    path = tmp_path_factory.mktemp("dm") / "x.wav"
    path.write_bytes(wav_bytes(codes.astype("<i2").tobytes(), channels=codes.shape[1]))
    np.testing.assert_array_equal(read_wav(path).samples, codes.astype(float).mean(axis=1) / 32768)
