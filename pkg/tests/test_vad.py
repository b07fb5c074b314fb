import numpy as np
import pytest

from mer.errors import EmptyAudio
from mer.media import AudioTrack
from mer.vad import UtteranceSpan, VadConfig, detect_spans, energy_vad_backend, frame_energies, segment

RATE = 16000


def make_track(duration_s, bursts, noise=1e-4, seed=0):
    """Synthetic signal: low noise floor plus 0.3-amplitude tone bursts."""
    rng = np.random.default_rng(seed)
    samples = rng.normal(0, noise, int(RATE * duration_s))
    for start, end in bursts:
        n = int((end - start) * RATE)
        t = np.arange(n) / RATE
        samples[int(start * RATE):int(start * RATE) + n] += 0.3 * np.sin(2 * np.pi * 440 * t)
    return AudioTrack(np.clip(samples, -1, 1).astype(np.float32), RATE)


def oracle_spans(track, cfg):
    """Brute-force re-derivation of the energy VAD with plain loops."""
    x = track.samples.astype(np.float64)
    flen = RATE * cfg.frame_ms // 1000
    hop = RATE * cfg.hop_ms // 1000
    energies = []
    i = 0
    while i + flen <= len(x):
        rms = (sum(v * v for v in x[i:i + flen]) / flen) ** 0.5
        energies.append(20 * np.log10(rms + 1e-10))
        i += hop
    thr = np.percentile(energies, cfg.floor_percentile) + cfg.onset_db_above_floor
    runs, start = [], None
    for j, e in enumerate(energies):
        if e > thr and start is None:
            start = j
        elif e <= thr and start is not None:
            runs.append((start, j - 1))
            start = None
    if start is not None:
        runs.append((start, len(energies) - 1))
    hop_s, frame_s, pad_s = cfg.hop_ms / 1000, cfg.frame_ms / 1000, cfg.pad_ms / 1000
    spans = [(a * hop_s, b * hop_s + frame_s) for a, b in runs]
    spans = [s for s in spans if (s[1] - s[0]) * 1000 >= cfg.min_speech_ms]
    merged = []
    for s in spans:
        if merged and (s[0] - merged[-1][1]) * 1000 < cfg.min_silence_ms:
            merged[-1] = (merged[-1][0], s[1])
        else:
            merged.append(s)
    out = []
    for a, b in merged:
        a, b = max(0.0, a - pad_s), min(track.duration_s, b + pad_s)
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def test_frame_energies_zero_audio():
    track = AudioTrack(np.zeros(RATE, dtype=np.float32), RATE)
    e = frame_energies(track, VadConfig())
    np.testing.assert_allclose(e, -200.0, atol=1e-6)


def test_frame_energies_constant_one():
    track = AudioTrack(np.ones(RATE, dtype=np.float32), RATE)
    e = frame_energies(track, VadConfig())
    np.testing.assert_allclose(e, 0.0, atol=1e-6)


def test_frame_energies_half_amplitude_sine():
    t = np.arange(RATE) / RATE
    track = AudioTrack((0.5 * np.sin(2 * np.pi * 440 * t)).astype(np.float32), RATE)
    e = frame_energies(track, VadConfig())
    # analytic RMS of a sine is a/sqrt(2): 20*log10(0.5/sqrt(2)) = -9.0309
    np.testing.assert_allclose(np.median(e), 20 * np.log10(0.5 / np.sqrt(2)), atol=0.1)


def test_frame_energies_empty_audio():
    with pytest.raises(EmptyAudio):
        frame_energies(AudioTrack(np.zeros(0, dtype=np.float32), RATE), VadConfig())


def test_silence_only_yields_no_spans():
    track = make_track(4.0, [])
    assert detect_spans(frame_energies(track, VadConfig()), VadConfig(), 4.0) == []


def test_single_burst_boundaries():
    cfg = VadConfig()
    track = make_track(4.0, [(1.0, 2.5)])
    spans = detect_spans(frame_energies(track, cfg), cfg, track.duration_s)
    assert len(spans) == 1
    pad = cfg.pad_ms / 1000
    assert abs(spans[0].start_s - (1.0 - pad)) <= 0.05
    assert abs(spans[0].end_s - (2.5 + pad)) <= 0.05
    # exact agreement with the brute-force oracle
    oracle = oracle_spans(track, cfg)
    assert len(oracle) == 1
    assert spans[0].start_s == pytest.approx(oracle[0][0], abs=1e-9)
    assert spans[0].end_s == pytest.approx(oracle[0][1], abs=1e-9)


def test_short_gap_is_merged():
    cfg = VadConfig()
    track = make_track(5.0, [(1.0, 2.0), (2.2, 3.2)])  # 200 ms gap < min_silence 300 ms
    spans = detect_spans(frame_energies(track, cfg), cfg, track.duration_s)
    assert len(spans) == 1


def test_long_gap_stays_split():
    cfg = VadConfig()
    track = make_track(6.0, [(1.0, 2.0), (3.0, 4.0)])  # 1 s gap
    spans = detect_spans(frame_energies(track, cfg), cfg, track.duration_s)
    assert len(spans) == 2


def test_scale_invariance():
    cfg = VadConfig()
    track = make_track(5.0, [(1.0, 2.0), (3.0, 4.2)], seed=7)
    base = detect_spans(frame_energies(track, cfg), cfg, track.duration_s)
    for alpha in (0.1, 2.5):
        scaled = AudioTrack(np.clip(track.samples * alpha, -1, 1), RATE)
        spans = detect_spans(frame_energies(scaled, cfg), cfg, scaled.duration_s)
        assert [(s.start_s, s.end_s) for s in spans] == [(s.start_s, s.end_s) for s in base]


def test_span_invariants_on_random_signals():
    cfg = VadConfig()
    for seed in range(10):
        rng = np.random.default_rng(seed)
        bursts, t = [], 0.5
        while t < 8.0 - 1.0:
            dur = rng.uniform(0.3, 1.2)
            bursts.append((t, min(t + dur, 7.8)))
            t += dur + rng.uniform(0.5, 1.5)
        track = make_track(8.0, bursts, seed=seed)
        spans = detect_spans(frame_energies(track, cfg), cfg, track.duration_s)
        for a, b in zip(spans, spans[1:]):
            assert a.end_s < b.start_s
        for s in spans:
            assert 0 <= s.start_s < s.end_s <= track.duration_s


def test_segment_is_deterministic():
    track = make_track(4.0, [(1.0, 2.5)])
    cfg = VadConfig()
    backend = energy_vad_backend(cfg)
    assert segment(track, backend) == segment(track, backend)


def test_segment_normalizes_overlapping_backend_output():
    track = make_track(2.0, [])

    def messy_backend(_track):
        return [UtteranceSpan(0.5, 1.2), UtteranceSpan(1.0, 1.8), UtteranceSpan(0.1, 0.3)]

    spans = segment(track, messy_backend)
    assert spans == [UtteranceSpan(0.1, 0.3), UtteranceSpan(0.5, 1.8)]
