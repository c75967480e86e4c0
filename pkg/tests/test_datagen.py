import hashlib
import itertools

import numpy as np
import pytest

from evhdr import ConfigError, InvalidInputError
from evhdr.config import SimulatorConfig
from evhdr.datagen import (SharpSequence, blur_linear, build_corpus, decompose_exposure,
                           exposure_stack, load_corpus, simulate_events, simulate_log_events,
                           synthesize_blur, toy_sequence)

from oracles import brute_force_pixel_events

C = 0.2
DT = 1.0 / 150


def gray_frames(log_values, shape=(1, 1)):
    """RGB frames whose Rec.601 luminance has the given log values."""
    lum = np.exp(np.asarray(log_values, np.float64))
    return np.broadcast_to(lum[:, None, None, None], (len(lum), *shape, 3)).copy()


def events_of(ev):
    return list(zip(ev.t.tolist(), ev.p.tolist()))


class TestSimulateEvents:
    def test_constant_pixel_emits_nothing(self):
        frames = gray_frames([-1.0] * 5, (3, 3))
        ev = simulate_events(frames, np.arange(5) * DT, SimulatorConfig(contrast_threshold=C))
        assert len(ev) == 0

    def test_ramp_of_three_and_a_half_thresholds(self):
        t0 = 0.01
        ev = simulate_log_events(np.array([-2.0, -2.0 + 3.5 * C]).reshape(2, 1, 1), [t0, t0 + DT], C)
        oracle = brute_force_pixel_events([-2.0, -2.0 + 3.5 * C], [t0, t0 + DT], C)
        expected = [t0 + j / 3.5 * DT for j in (1, 2, 3)]
        assert len(ev) == len(oracle) == 3
        assert np.all(ev.p == 1)
        np.testing.assert_allclose(ev.t, expected, atol=1e-9, rtol=0)
        np.testing.assert_allclose([t for t, _ in oracle], expected, atol=1e-9, rtol=0)

    def test_ramp_via_rgb_frames(self):
        frames = gray_frames([-2.0, -2.0 + 3.5 * C])
        ev = simulate_events(frames, [0.0, DT], SimulatorConfig(contrast_threshold=C))
        np.testing.assert_allclose(ev.t, [j / 3.5 * DT for j in (1, 2, 3)], atol=1e-9)

    def test_fall_of_two_thresholds(self):
        frames = gray_frames([-1.0, -1.0 - 2.0 * C])
        ev = simulate_events(frames, [0.0, DT], SimulatorConfig(contrast_threshold=C))
        oracle = brute_force_pixel_events([-1.0, -1.0 - 2.0 * C], [0.0, DT], C)
        assert len(ev) == len(oracle) == 2
        assert np.all(ev.p == -1)

    def test_reference_carries_across_frames(self):
        # up 1.5C then back down to 0.4C: one positive event, no negative one
        logs = np.array([0.0, 1.5 * C, 0.4 * C]).reshape(3, 1, 1)
        ev = simulate_log_events(logs, [0, DT, 2 * DT], C)
        assert events_of(ev) == [(pytest.approx(DT / 1.5), 1)]

    def test_matches_oracle_on_random_signals(self):
        rng = np.random.default_rng(7)
        times = np.arange(5) * DT
        logs = rng.uniform(-3, 0, size=(5, 3, 3))
        ev = simulate_log_events(logs, times, C)
        for y, x in itertools.product(range(3), range(3)):
            mine = ev.select((ev.x == x) & (ev.y == y))
            ref = brute_force_pixel_events(logs[:, y, x], times, C)
            assert len(mine) == len(ref)
            np.testing.assert_allclose(mine.t, [t for t, _ in ref], atol=1e-9, rtol=0)
            assert mine.p.tolist() == [p for _, p in ref]

    def test_time_reversal_flips_polarity_for_monotone_pixels(self):
        rng = np.random.default_rng(3)
        steps = rng.uniform(0, 0.5, size=(6, 4, 4)) * rng.choice([-1, 1], size=(1, 4, 4))
        logs = np.cumsum(steps, axis=0) - 2.0
        frames = np.repeat(np.exp(logs)[..., None], 3, axis=-1)
        times = np.arange(6) * DT
        cfg = SimulatorConfig(contrast_threshold=C, log_eps=1e-6)
        fwd = simulate_events(frames, times, cfg)
        bwd = simulate_events(frames[::-1], times, cfg)
        assert len(fwd) == len(bwd) > 0
        for y, x in itertools.product(range(4), range(4)):
            f = fwd.p[(fwd.x == x) & (fwd.y == y)]
            b = bwd.p[(bwd.x == x) & (bwd.y == y)]
            assert sorted(f.tolist()) == sorted((-b).tolist())

    def test_output_sorted_and_within_span(self):
        seq = toy_sequence(np.random.default_rng(0), 13, 32)
        ev = simulate_events(seq.frames, seq.timestamps, SimulatorConfig())
        assert len(ev) > 0
        assert np.all(np.diff(ev.t) >= 0)
        assert ev.t.min() >= seq.timestamps[0] and ev.t.max() <= seq.timestamps[-1]

    def test_refractory_drops_close_events(self):
        logs = np.array([0.0, 5 * C]).reshape(2, 1, 1)
        ev = simulate_log_events(logs, [0, DT], C, refractory=0.3 * DT)
        assert len(ev) == 3  # crossings at 0.2, 0.4, 0.6, 0.8, 1.0 of DT; keep 0.2, 0.6, 1.0
        np.testing.assert_allclose(ev.t, [0.2 * DT, 0.6 * DT, DT], atol=1e-12)

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            simulate_events(gray_frames([0.0]), [0.0], SimulatorConfig())
        with pytest.raises(ConfigError):
            simulate_events(gray_frames([0.0, 1.0]), [0.0, DT], SimulatorConfig(contrast_threshold=0))


class TestBlur:
    def test_identical_frames(self):
        frames = np.full((13, 2, 2, 3), 0.07)
        np.testing.assert_allclose(blur_linear(frames), 0.07)

    def test_linear_mean(self):
        frames = np.stack([np.full((2, 2, 3), k / 12) for k in range(13)])
        np.testing.assert_allclose(blur_linear(frames), 0.5)

    def test_blurred_frame_rendered_at_ev0(self):
        frames = np.full((13, 2, 2, 3), 0.1)
        np.testing.assert_allclose(synthesize_blur(frames), 0.4)

    def test_negative_frame_rejected(self):
        frames = np.full((13, 2, 2, 3), 0.1)
        frames[4, 0, 0, 0] = -0.01
        with pytest.raises(InvalidInputError):
            synthesize_blur(frames)

    def test_wrong_window_length(self):
        with pytest.raises(InvalidInputError):
            synthesize_blur(np.zeros((12, 2, 2, 3)))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        frames = rng.uniform(0, 0.3, size=(13, 4, 4, 3))
        perm = rng.permutation(13)
        np.testing.assert_allclose(synthesize_blur(frames), synthesize_blur(frames[perm]), atol=1e-15)


class TestDecomposeExposure:
    @pytest.mark.parametrize("value, expected", [
        (0.05, (0.05, 0.20, 0.80)),
        (0.0, (0.0, 0.0, 0.0)),
        (0.5, (0.5, 1.0, 1.0)),
    ])
    def test_stack_values(self, value, expected):
        stack = exposure_stack(np.full((1, 1, 3), value))
        np.testing.assert_allclose([img[0, 0, 0] for img in stack.images], expected, atol=1e-12)

    def test_inverse_on_unclipped(self):
        rng = np.random.default_rng(1)
        hdr = rng.uniform(0, 1, size=(32, 32, 3))
        for ev, g in ((-2, 1), (0, 4), (2, 16)):
            ldr = decompose_exposure(hdr, ev)
            ok = hdr * g <= 1
            np.testing.assert_allclose((ldr / g)[ok], hdr[ok], atol=1e-6)

    def test_gamma_crf(self):
        out = decompose_exposure(np.full((1, 1, 3), 0.05), 0, crf="gamma", gamma=2.2)
        np.testing.assert_allclose(out, 0.2 ** (1 / 2.2))

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            decompose_exposure(np.full((1, 1, 3), -0.1), 0)
        with pytest.raises(InvalidInputError):
            decompose_exposure(np.zeros((1, 1, 3)), 1)


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestBuildCorpus:
    def seqs(self, lengths, seed=0):
        rng = np.random.default_rng(seed)
        return [toy_sequence(rng, n, 16) for n in lengths]

    def test_single_window(self, tmp_path):
        manifest = build_corpus(self.seqs([13]), SimulatorConfig(), tmp_path, seed=0)
        assert len(manifest) == 1
        sample = load_corpus(tmp_path / "manifest.json")[0]
        assert sample.obs_ev == -2

    def test_exposure_cycle(self, tmp_path):
        build_corpus(self.seqs([15]), SimulatorConfig(), tmp_path, seed=0)
        samples = load_corpus(tmp_path / "manifest.json")
        assert [s.obs_ev for s in samples] == [-2, 0, 2]
        for s in samples:
            t0, t1 = s.events.span
            assert t0 <= s.obs_time <= t1
            assert s.eval_hdr.shape == (16, 16, 3)

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            build_corpus(self.seqs([14, 13]), SimulatorConfig(), tmp_path / name, seed=5)
        files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert _digest(tmp_path / "a" / rel) == _digest(tmp_path / "b" / rel), rel

    def test_observation_matches_ground_truth(self, tmp_path):
        build_corpus(self.seqs([15]), SimulatorConfig(), tmp_path, seed=2)
        for s in load_corpus(tmp_path / "manifest.json"):
            expected = decompose_exposure(s.eval_hdr, s.obs_ev)
            np.testing.assert_allclose(s.obs_image, expected, atol=0.5 / 255 + 1e-6)

    def test_errors(self, tmp_path):
        with pytest.raises(InvalidInputError):
            build_corpus([], SimulatorConfig(), tmp_path, seed=0)
        with pytest.raises(InvalidInputError):
            build_corpus(self.seqs([12]), SimulatorConfig(), tmp_path, seed=0)
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(InvalidInputError):
            build_corpus(self.seqs([13]), SimulatorConfig(), blocker / "sub", seed=0)

    def test_sequence_validation(self):
        with pytest.raises(InvalidInputError):
            SharpSequence(np.zeros((3, 2, 2, 3)), [0.0, 0.2, 0.1])
