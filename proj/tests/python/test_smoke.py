import json
import math
import wave

import numpy as np
import pytest

import mclnn

GOLDEN_9x8 = [
    "10010010",
    "10010000",
    "10000001",
    "00001001",
    "01001001",
    "01001000",
    "01000000",
    "00000100",
    "00100100",
]


def sine(hz, seconds=0.5, rate=22050, amp=0.6):
    t = np.arange(int(seconds * rate)) / rate
    return amp * np.sin(2 * np.pi * hz * t)


def write_wav(path, samples, rate=22050):
    pcm = (np.clip(samples, -1.0, 1.0) * 32767).astype("<i2")
    with wave.open(str(path), "wb") as out:
        out.setnchannels(1)
        out.setsampwidth(2)
        out.setframerate(rate)
        out.writeframes(pcm.tobytes())


def test_window_and_segment_widths():
    assert mclnn.window_width(15) == 31
    assert mclnn.segment_width(15, 2, 5) == 65
    assert mclnn.segment_width(1, 1, 2) == 4


def test_mask_matches_the_golden_pattern():
    mask = np.asarray(mclnn.build_mask(9, 8, 3, -1))
    want = np.array([[1.0 if ch == "1" else 0.0 for ch in row] for row in GOLDEN_9x8])
    assert mask.shape == (9, 8)
    assert np.array_equal(mask, want)


def test_mask_rejects_overlap_wider_than_bandwidth():
    with pytest.raises(ValueError):
        mclnn.build_mask(9, 8, 3, 5)


def test_parameter_count_of_the_default_config():
    assert mclnn.parameter_count() == (3007710, 3008410)
    small = json.dumps({"layers": [{"order": 1}, {"order": 1}], "extra_frames": 1})
    excluding, including = mclnn.parameter_count(small)
    assert 0 < excluding < including


def test_feature_frames_shape():
    frames = np.asarray(mclnn.log_mel_delta(sine(440.0, 1.0).tolist()))
    assert frames.shape == (1 + 22050 // 512, 120)
    assert np.all(np.isfinite(frames))


def test_resample_halves_the_length():
    out = mclnn.resample(sine(440.0, 0.25, rate=44100).tolist(), 44100, 22050)
    assert len(out) == int(0.25 * 44100) // 2


def test_vote_means_and_argmax():
    idx, mean = mclnn.vote([np.array([0.2, 0.8]), np.array([0.6, 0.4])])
    assert idx == 1
    assert np.allclose(np.asarray(mean), [0.4, 0.6])


def test_run_cli_exit_codes():
    assert mclnn.run_cli(["dump-mask", "--l", "9", "--e", "8", "--bw", "3", "--ov", "-1"]) == 0
    assert mclnn.run_cli(["dump-mask", "--l", "9", "--e", "8", "--bw", "3", "--ov", "5"]) == 2
    assert mclnn.run_cli(["no-such-command"]) == 1


def test_featurize_train_predict_end_to_end(tmp_path):
    audio = tmp_path / "audio"
    audio.mkdir()
    rows = ["path,fold,label"]
    for i in range(6):
        low_name, high_name = f"low{i}.wav", f"high{i}.wav"
        write_wav(audio / low_name, sine(400.0 + 15.0 * i))
        write_wav(audio / high_name, sine(4000.0 + 120.0 * i))
        rows.append(f"{low_name},{i % 3 + 1},low")
        rows.append(f"{high_name},{i % 3 + 1},high")
    (tmp_path / "manifest.csv").write_text("\n".join(rows) + "\n")

    cache = tmp_path / "cache"
    status = mclnn.run_cli(
        ["featurize", "--manifest", str(tmp_path / "manifest.csv"),
         "--audio-root", str(audio), "--cache", str(cache)]
    )
    assert status == 0
    assert len(list(cache.glob("*.mclf"))) == 12

    config = {
        "layers": [{"nodes": 24, "order": 1, "bandwidth": 8, "overlap": 0}],
        "extra_frames": 2,
        "dense": [16],
        "batch_size": 64,
        "max_epochs": 25,
        "patience": 6,
        "train_hop": 1,
        "eval_hop": 2,
        "seed": 7,
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    model_path = tmp_path / "model.mclnn"
    status = mclnn.run_cli(
        ["train", "--config", str(tmp_path / "config.json"), "--cache", str(cache),
         "--test-fold", "1", "--out", str(model_path)]
    )
    assert status == 0

    model = mclnn.Model.load(str(model_path))
    assert model.classes == ["high", "low"]

    probe = tmp_path / "probe.wav"
    write_wav(probe, sine(430.0))
    label, probs = model.predict_wav(str(probe))
    assert label == "low"
    assert math.isclose(float(np.sum(probs)), 1.0, rel_tol=1e-9)

    frames = mclnn.log_mel_delta(sine(4300.0).tolist())
    label_high, _ = model.predict(frames, hop=2)
    assert label_high == "high"
