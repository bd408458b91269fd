import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from affectvox.signal_io import (AudioFormatError, CorpusManifest, FeatureMatrix, ManifestEntry,
                                 NoVoicedFramesError, SchemaError, Signal, iter_chunks, load_wav,
                                 persist_roundtrip, read_features, read_manifest, resample_to_8k,
                                 select_voiced, short_time_energy, frame_signal, write_manifest,
                                 zero_crossing_rate)

from conftest import write_pcm16, write_raw_wav


def test_load_wav_16bit_mono_header(tmp_path, rng):
    data = rng.integers(-2000, 2000, 1234)
    write_pcm16(tmp_path / "a.wav", data, 8000)
    sig = load_wav(tmp_path / "a.wav")
    assert sig.sample_rate_hz == 8000
    assert len(sig) == 1234
    np.testing.assert_array_equal(sig.samples, data / 32768.0)


def test_load_wav_full_scale():
    import tempfile, os
    with tempfile.TemporaryDirectory() as d:
        write_pcm16(os.path.join(d, "f.wav"), [32767, -32768], 8000)
        sig = load_wav(os.path.join(d, "f.wav"))
    assert sig.samples[0] == pytest.approx(32767 / 32768)
    assert sig.samples[1] == -1.0


def test_load_wav_stereo_is_channel_mean(tmp_path):
    a = np.array([1000, -400, 32000], dtype=np.int16)
    b = np.array([3000, 400, -32000], dtype=np.int16)
    write_pcm16(tmp_path / "s.wav", np.column_stack([a, b]), 16000)
    sig = load_wav(tmp_path / "s.wav")
    np.testing.assert_allclose(sig.samples, (a / 32768.0 + b / 32768.0) / 2)


def test_load_wav_24bit_and_float(tmp_path):
    vals = np.array([8388607, -8388608, 12345, -1])
    raw = b"".join(int(v).to_bytes(3, "little", signed=True) for v in vals)
    write_raw_wav(tmp_path / "p24.wav", raw, 8000, 1, 24, 1)
    np.testing.assert_allclose(load_wav(tmp_path / "p24.wav").samples, vals / 2 ** 23)

    f = np.array([0.5, -0.25, 0.999], dtype="<f4")
    write_raw_wav(tmp_path / "f32.wav", f.tobytes(), 8000, 1, 32, 3)
    np.testing.assert_allclose(load_wav(tmp_path / "f32.wav").samples, f.astype(float))


def test_load_wav_8bit_unsigned(tmp_path):
    raw = bytes([128, 255, 0])
    write_raw_wav(tmp_path / "u8.wav", raw, 8000, 1, 8, 1)
    np.testing.assert_allclose(load_wav(tmp_path / "u8.wav").samples, [0.0, 127 / 128, -1.0])


def test_load_wav_rejects_compressed(tmp_path):
    write_raw_wav(tmp_path / "alaw.wav", bytes(10), 8000, 1, 8, 6)
    with pytest.raises(AudioFormatError, match="0x0006"):
        load_wav(tmp_path / "alaw.wav")


def test_load_wav_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_wav(tmp_path / "nope.wav")


def test_resample_identity_at_8k(rng):
    sig = Signal(rng.uniform(-1, 1, 999), 8000)
    out = resample_to_8k(sig)
    assert out.sample_rate_hz == 8000
    assert np.array_equal(out.samples, sig.samples)


def test_resample_1khz_tone_matches_analytic():
    t16 = np.arange(16000) / 16000
    out = resample_to_8k(Signal(0.8 * np.sin(2 * np.pi * 1000 * t16), 16000))
    t8 = np.arange(len(out)) / 8000
    ref = 0.8 * np.sin(2 * np.pi * 1000 * t8)
    edge = 100
    assert out.sample_rate_hz == 8000 and len(out) == 8000
    assert np.max(np.abs(out.samples[edge:-edge] - ref[edge:-edge])) <= 1e-3


def test_resample_3900hz_tone_is_attenuated():
    t16 = np.arange(16000) / 16000
    edge = 100

    def rms_ratio(f):
        out = resample_to_8k(Signal(np.sin(2 * np.pi * f * t16), 16000)).samples[edge:-edge]
        return np.sqrt(np.mean(out ** 2)) / np.sqrt(0.5)

    assert rms_ratio(3900) < 0.5 * rms_ratio(1000)


@pytest.mark.parametrize("rate,f", [(16000, 1000.0), (44100, 440.0), (22050, 2500.0), (11025, 700.0)])
def test_resample_preserves_tone_frequency(rate, f):
    t = np.arange(rate) / rate
    out = resample_to_8k(Signal(np.sin(2 * np.pi * f * t), rate)).samples
    spec = np.abs(np.fft.rfft(out))
    peak_hz = np.argmax(spec) * 8000 / len(out)
    assert abs(peak_hz - f) <= 8000 / len(out)


def test_resample_refuses_upsampling():
    with pytest.raises(ValueError):
        resample_to_8k(Signal(np.zeros(100), 4000))


def test_frame_energy_and_zcr_definitions():
    frames = frame_signal(np.array([1.0, -1.0, 1.0, 1.0, 2.0, -2.0, -2.0, 2.0]), 4, 4)
    np.testing.assert_allclose(short_time_energy(frames), [1.0, 4.0])
    np.testing.assert_allclose(zero_crossing_rate(frames), [2 / 3, 2 / 3])


def test_select_voiced_silence_raises():
    with pytest.raises(NoVoicedFramesError, match="no voiced frames"):
        select_voiced(Signal(np.zeros(8000), 8000))


def test_select_voiced_keeps_loud_tone_half(rng):
    frame = 128
    n = 50 * frame
    t = np.arange(n) / 8000
    x = np.concatenate([0.8 * np.sin(2 * np.pi * 200 * t), 0.01 * rng.standard_normal(n)])
    out = select_voiced(Signal(x, 8000))
    assert np.array_equal(out.samples, x[:n])


def test_select_voiced_identical_frames_all_kept(rng):
    frame = rng.standard_normal(128)
    x = np.tile(frame, 30)
    out = select_voiced(Signal(x, 8000))
    assert np.array_equal(out.samples, x)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.integers(128, 3000), elements=st.floats(-1, 1)))
def test_select_voiced_length_is_frame_multiple(x):
    try:
        out = select_voiced(Signal(x, 8000))
    except NoVoicedFramesError:
        return
    assert len(out) % 128 == 0
    assert len(out) <= len(x)


def test_feature_csv_layout(tmp_path, rng):
    fm = FeatureMatrix(rng.uniform(0, 1, (2, 6)), [f"H_imf{i}" for i in range(1, 7)])
    back = persist_roundtrip(fm, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert len(lines) == 3
    assert lines[0] == ",".join(fm.schema)
    assert back.schema == fm.schema


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 8)),
              elements=st.floats(-1e6, 1e6, allow_subnormal=False)))
def test_feature_roundtrip_identity(rows):
    import tempfile, os
    fm = FeatureMatrix(rows, [f"c{i}" for i in range(rows.shape[1])])
    with tempfile.TemporaryDirectory() as d:
        back = persist_roundtrip(fm, os.path.join(d, "x.csv"))
    assert np.max(np.abs(back.rows - rows)) <= 1e-9


def test_read_features_row_length_mismatch(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n4,5\n")
    with pytest.raises(SchemaError):
        read_features(p)


def test_manifest_roundtrip_relative_paths(tmp_path):
    m = CorpusManifest([ManifestEntry(str(tmp_path / "a.wav"), "angry", "s1"),
                        ManifestEntry(str(tmp_path / "b.wav"), "calm", "s2")])
    write_manifest(m, tmp_path / "m.csv", relative_to=tmp_path)
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "path,label,speaker"
    back = read_manifest(tmp_path / "m.csv")
    assert [e.path for e in back.entries] == [e.path for e in m.entries]
    assert back.labels == ["angry", "calm"]
    assert back.speakers == ["s1", "s2"]


def test_manifest_rejects_duplicate_paths():
    with pytest.raises(ValueError):
        CorpusManifest([ManifestEntry("a.wav", "x", "s"), ManifestEntry("a.wav", "y", "t")])


def test_iter_chunks_drops_remainder():
    chunks = list(iter_chunks(np.arange(10), 4))
    assert [c.tolist() for c in chunks] == [[0, 1, 2, 3], [4, 5, 6, 7]]
