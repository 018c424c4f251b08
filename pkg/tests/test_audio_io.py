import struct
import wave

import numpy as np
import pytest
import scipy.io.wavfile

from insectsound.audio_io import (
    AudioClip,
    Augmentation,
    InstanceName,
    format_instance_name,
    load_wav,
    pad_to_length,
    parse_instance_name,
    resample,
    write_wav,
)
from oracles import dominant_frequency


def write_pcm16(path, left, right=None, rate=44100):
    left = np.asarray(left)
    if right is None:
        data = left.astype("<i2")
        channels = 1
    else:
        data = np.empty(2 * len(left), dtype="<i2")
        data[0::2] = left
        data[1::2] = right
        channels = 2
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(data.tobytes())


class TestLoadWav:
    def test_stereo_mixdown_length_and_rate(self, tmp_path):
        rng = np.random.default_rng(1)
        left = rng.integers(-3000, 3000, 44100).astype(np.int16)
        right = rng.integers(-3000, 3000, 44100).astype(np.int16)
        path = tmp_path / "stereo.wav"
        write_pcm16(path, left, right)
        clip = load_wav(path)
        assert len(clip) == 44100
        assert clip.sample_rate == 44100
        assert clip.source_id == "stereo"
        np.testing.assert_allclose(
            clip.samples, (left / 32768.0 + right / 32768.0) / 2.0, atol=1e-12
        )

    def test_identical_channels_equal_either_channel(self, tmp_path):
        data = np.array([100, -200, 3000, -32768], dtype=np.int16)
        path = tmp_path / "dup.wav"
        write_pcm16(path, data, data)
        clip = load_wav(path)
        np.testing.assert_array_equal(clip.samples, data / 32768.0)

    def test_all_zero_file_is_valid(self, tmp_path):
        path = tmp_path / "silence.wav"
        write_pcm16(path, np.zeros(500, dtype=np.int16))
        clip = load_wav(path)
        assert np.all(clip.samples == 0.0)

    def test_int16_min_maps_to_exactly_minus_one(self, tmp_path):
        path = tmp_path / "edge.wav"
        write_pcm16(path, np.array([-32768, 32767], dtype=np.int16))
        clip = load_wav(path)
        assert clip.samples[0] == -1.0
        assert clip.samples[1] == 32767 / 32768

    def test_float32_wav(self, tmp_path):
        path = tmp_path / "f32.wav"
        data = np.array([0.25, -0.5, 0.0, 1.0], dtype=np.float32)
        scipy.io.wavfile.write(path, 22050, data)
        clip = load_wav(path)
        np.testing.assert_array_equal(clip.samples, data.astype(np.float64))
        assert clip.sample_rate == 22050

    def test_unsupported_encoding_reports_what_it_found(self, tmp_path):
        path = tmp_path / "u8.wav"
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(1)
            w.setframerate(8000)
            w.writeframes(bytes([128] * 100))
        with pytest.raises(ValueError, match="PCM 8-bit"):
            load_wav(path)

    def test_not_riff(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"OggS" + b"\x00" * 64)
        with pytest.raises(ValueError, match="not a RIFF"):
            load_wav(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_wav(tmp_path / "nope.wav")

    def test_zero_length_audio(self, tmp_path):
        path = tmp_path / "empty.wav"
        write_pcm16(path, np.zeros(0, dtype=np.int16))
        with pytest.raises(ValueError, match="zero-length"):
            load_wav(path)

    def test_write_read_round_trip(self, tmp_path):
        x = np.linspace(-1, 1, 1000)
        path = tmp_path / "rt.wav"
        write_wav(path, x, 22050)
        clip = load_wav(path)
        assert len(clip) == 1000
        # write scales by 32767, read divides by 32768: error < 1.5/32768
        np.testing.assert_allclose(clip.samples, x, atol=1.5 / 32768)


class TestResample:
    def test_half_rate_halves_length(self):
        clip = AudioClip(np.random.default_rng(0).normal(size=44100), 44100, "x")
        out = resample(clip, 22050)
        assert len(out) == 22050
        assert out.sample_rate == 22050

    def test_identity(self):
        clip = AudioClip(np.arange(10) / 10.0, 22050, "x")
        out = resample(clip, 22050)
        np.testing.assert_array_equal(out.samples, clip.samples)

    def test_tone_frequency_preserved(self):
        # 440 Hz tone, 44100 -> 22050; dominant bin checked by a direct DFT
        rate = 44100
        n = 4410
        t = np.arange(n) / rate
        clip = AudioClip(np.sin(2 * np.pi * 440.0 * t), rate, "tone")
        out = resample(clip, 22050)
        bin_width = 22050 / len(out)
        assert abs(dominant_frequency(out.samples, 22050) - 440.0) <= bin_width

    def test_round_trip_energy_within_5_percent(self):
        # band-limited tone below a quarter of the lower Nyquist
        rate = 44100
        t = np.arange(8820) / rate
        x = np.sin(2 * np.pi * 1000.0 * t)
        clip = AudioClip(x, rate, "x")
        back = resample(resample(clip, 22050), rate)
        e0 = float(np.sum(x * x))
        e1 = float(np.sum(back.samples * back.samples))
        assert abs(e1 - e0) / e0 < 0.05

    def test_zero_target_rate(self):
        clip = AudioClip(np.ones(10), 22050, "x")
        with pytest.raises(ValueError):
            resample(clip, 0)


class TestPadToLength:
    def test_pad_500_to_636(self):
        clip = AudioClip(np.ones(500), 22050, "x")
        out = pad_to_length(clip, 636)
        assert len(out) == 636
        assert np.all(out.samples[500:] == 0.0)
        np.testing.assert_array_equal(out.samples[:500], clip.samples)

    def test_identity(self):
        clip = AudioClip(np.ones(100), 22050, "x")
        assert pad_to_length(clip, 100) is clip

    def test_shorter_target_errors(self):
        clip = AudioClip(np.ones(100), 22050, "x")
        with pytest.raises(ValueError, match="truncation"):
            pad_to_length(clip, 99)

    def test_never_alters_existing_samples(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(1, 200))
            clip = AudioClip(rng.normal(size=n), 22050, "x")
            m = n + int(rng.integers(0, 50))
            out = pad_to_length(clip, m)
            np.testing.assert_array_equal(out.samples[:n], clip.samples)


class TestInstanceName:
    def test_format_augmented(self):
        name = InstanceName("clipA", 3, 12, Augmentation("P", -2))
        assert format_instance_name(name) == "clipA#3#12#P-2#1.wav"

    def test_parse_unaugmented(self):
        parsed = parse_instance_name("clipA#3#12#1.wav")
        assert parsed == InstanceName("clipA", 3, 12, None)

    def test_unknown_augmentation_letter(self):
        with pytest.raises(ValueError, match="augmentation letter"):
            parse_instance_name("clipA#3#12#Q#1.wav")

    def test_bare_tag_parses_with_unknown_amount(self):
        parsed = parse_instance_name("clipA#0#0#P#1.wav")
        assert parsed.augmentation == Augmentation("P", None)

    def test_stretch_rate_formats(self):
        assert format_instance_name(InstanceName("c", 0, 1, Augmentation("T", 0.5))) == "c#0#1#T0.5#1.wav"
        assert format_instance_name(InstanceName("c", 0, 1, Augmentation("T", 2.0))) == "c#0#1#T2#1.wav"

    @pytest.mark.parametrize("bad", [
        "clipA#3#12",                 # no .wav
        "clipA#3#1.wav",              # too few fields
        "a#b#c#d#e#1.wav",            # too many fields
        "clipA#x#12#1.wav",           # non-numeric segment
        "clipA#3#12#P-2#2.wav",       # wrong trailing literal
    ])
    def test_malformed(self, bad):
        with pytest.raises(ValueError):
            parse_instance_name(bad)

    def test_round_trip_random_names(self):
        rng = np.random.default_rng(42)
        kinds = [None, "P", "T"]
        for _ in range(300):
            kind = kinds[rng.integers(0, 3)]
            if kind is None:
                aug = None
            elif kind == "P":
                aug = Augmentation("P", float(rng.integers(-7, 8)) * 0.5 or 0.5)
            else:
                aug = Augmentation("T", float(rng.integers(1, 9)) * 0.25)
            name = InstanceName(
                original_file=f"rec_{rng.integers(0, 1000)}",
                segment_number=int(rng.integers(0, 500)),
                window_number=int(rng.integers(0, 500)),
                augmentation=aug,
            )
            assert parse_instance_name(format_instance_name(name)) == name

    def test_hash_in_original_rejected(self):
        with pytest.raises(ValueError, match="#"):
            InstanceName("a#b", 0, 0)
