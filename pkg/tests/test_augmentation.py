import numpy as np
import pytest

from insectsound.audio_io import Augmentation
from insectsound.augmentation import (
    AugmentationSpec,
    VOCODER_HOP,
    augment,
    get_preset,
    pitch_shift,
    preset_narrow,
    preset_wide,
    time_stretch,
)
from insectsound.segmentation import Instance
from oracles import dominant_frequency

RATE = 22050


def tone(freq, n=4096, rate=RATE):
    return np.sin(2.0 * np.pi * freq * np.arange(n) / rate)


class TestPresets:
    def test_wide_factor_is_22(self):
        assert preset_wide().expansion_factor == 22

    def test_wide_counts(self):
        spec = preset_wide()
        assert len(spec.pitch_semitones) == 14
        assert len(spec.stretch_rates) == 7
        assert spec.include_original

    def test_wide_values(self):
        spec = preset_wide()
        assert min(spec.pitch_semitones) == -3.5
        assert max(spec.pitch_semitones) == 3.5
        assert 0.0 not in spec.pitch_semitones
        assert spec.stretch_rates == (0.25, 0.5, 0.75, 1.25, 1.5, 1.75, 2.0)

    def test_narrow_factor_is_7(self):
        assert preset_narrow().expansion_factor == 7

    def test_narrow_values(self):
        spec = preset_narrow()
        assert spec.pitch_semitones == (-2.0, -1.0, 1.0, 2.0)
        assert spec.stretch_rates == (0.5, 2.0)

    def test_spec_rejects_identity_values(self):
        with pytest.raises(ValueError):
            AugmentationSpec(pitch_semitones=[0.0, 1.0], stretch_rates=[])
        with pytest.raises(ValueError):
            AugmentationSpec(pitch_semitones=[], stretch_rates=[1.0])

    def test_get_preset(self):
        assert get_preset("wide").expansion_factor == 22
        assert get_preset("none") is None
        with pytest.raises(ValueError):
            get_preset("bogus")


class TestTimeStretch:
    def test_double_speed_halves_duration(self):
        x = np.random.default_rng(0).normal(size=22050) * 0.1
        y = time_stretch(x, 2.0)
        assert abs(len(y) - 11025) <= VOCODER_HOP  # exact by construction
        assert len(y) == 11025

    def test_identity_rate(self):
        x = tone(440.0)
        np.testing.assert_array_equal(time_stretch(x, 1.0), x)

    def test_half_speed_preserves_pitch(self):
        x = tone(440.0)
        y = time_stretch(x, 0.5)
        assert len(y) == 2 * len(x)
        bin_width = RATE / len(y)
        assert abs(dominant_frequency(y, RATE) - 440.0) <= bin_width

    def test_length_contract_random_rates(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=6000) * 0.1
        for rate in (0.25, 0.5, 0.75, 1.25, 1.5, 1.75, 2.0):
            assert len(time_stretch(x, rate)) == int(round(len(x) / rate))

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            time_stretch(tone(440.0), 0.0)
        with pytest.raises(ValueError):
            time_stretch(np.array([]), 1.5)


class TestPitchShift:
    def test_octave_up(self):
        y = pitch_shift(tone(440.0), 12, RATE)
        bin_width = RATE / len(y)
        assert abs(dominant_frequency(y, RATE) - 880.0) <= bin_width

    def test_octave_down(self):
        y = pitch_shift(tone(440.0), -12, RATE)
        bin_width = RATE / len(y)
        assert abs(dominant_frequency(y, RATE) - 220.0) <= bin_width

    def test_zero_semitones_identity(self):
        x = tone(440.0)
        np.testing.assert_array_equal(pitch_shift(x, 0, RATE), x)

    def test_length_always_preserved(self):
        x = tone(330.0, n=2205)
        for s in (-3.5, -0.5, 0.5, 2.0, 3.5):
            assert len(pitch_shift(x, s, RATE)) == 2205

    def test_tone_frequency_law_sample(self):
        # full grid runs in the acceptance suite; spot-check here
        for s in (-7, -2, 1, 5):
            for f0 in (220.0, 440.0, 880.0):
                y = pitch_shift(tone(f0), s, RATE)
                expected = f0 * 2.0 ** (s / 12.0)
                bin_width = RATE / len(y)
                assert abs(dominant_frequency(y, RATE) - expected) <= bin_width, (s, f0)


class TestAugment:
    def _instance(self, n=2205):
        return Instance(
            samples=tone(660.0, n=n),
            class_label="C2",
            clip_id="clipX",
            segment_number=4,
            window_number=7,
        )

    def test_wide_produces_22(self):
        out = augment(self._instance(), preset_wide(), RATE)
        assert len(out) == 22

    def test_narrow_produces_7(self):
        out = augment(self._instance(), preset_narrow(), RATE)
        assert len(out) == 7

    def test_class_balancing_arithmetic(self):
        # 663 instances per class under the wide preset
        assert 663 * preset_wide().expansion_factor == 14586

    def test_degenerate_spec_is_identity(self):
        spec = AugmentationSpec(pitch_semitones=[], stretch_rates=[], include_original=True)
        out = augment(self._instance(), spec, RATE)
        assert len(out) == 1
        assert out[0].augmentation is None

    def test_length_invariance(self):
        inst = self._instance()
        for v in augment(inst, preset_narrow(), RATE):
            assert len(v.samples) == 2205

    def test_tags_and_provenance(self):
        inst = self._instance()
        out = augment(inst, preset_narrow(), RATE)
        tags = [v.augmentation for v in out]
        assert tags[0] is None
        assert Augmentation("P", -2.0) in tags
        assert Augmentation("T", 0.5) in tags
        for v in out:
            assert v.class_label == "C2"
            assert v.clip_id == "clipX"
            assert v.segment_number == 4
            assert v.window_number == 7

    def test_energy_sanity(self):
        for v in augment(self._instance(), preset_narrow(), RATE):
            assert float(np.abs(v.samples).sum()) > 0.0

    def test_double_augmentation_rejected(self):
        done = augment(self._instance(), preset_narrow(), RATE)[1]
        with pytest.raises(ValueError, match="already augmented"):
            augment(done, preset_narrow(), RATE)

    def test_count_law_random_specs(self):
        rng = np.random.default_rng(9)
        inst = self._instance(n=636)
        for _ in range(5):
            n_pitch = int(rng.integers(0, 4))
            n_rates = int(rng.integers(0, 3))
            spec = AugmentationSpec(
                pitch_semitones=list(range(1, n_pitch + 1)),
                stretch_rates=[0.5 + 0.25 * r for r in range(n_rates)],
                include_original=bool(rng.integers(0, 2)),
            )
            assert len(augment(inst, spec, RATE)) == spec.expansion_factor
