#!/usr/bin/env python3
"""Regenerate the bundled toy corpus under corpus/toy.

20 participants (8 healthy, 12 patients) x 8 stimuli. Every trial gets a
deterministic synthetic clip whose acoustics encode an underlying quality
level (clean tone / noisy tone / noise), so the fallback features are
learnably coupled to the rater scores. Two simulated hypothesis files
mimic a weak and a strong transcription model, and the covariates CSV is
wired so convergent variables track ability while divergent ones do not.
ldl_cholesterol is present for only two patients, which forces the
validity battery down its skip path.

Usage: python tools/make_toy_corpus.py [--root corpus/toy]
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from namegauge.audio import AudioBuffer, save_wav  # noqa: E402
from namegauge.records import METRICS  # noqa: E402

STIMULI = ["acorn", "anchor", "beaver", "comb", "hammock", "igloo", "pretzel", "walrus"]
SEED = 20260810

HEALTHY = [f"hc{i:02d}" for i in range(1, 9)]
PATIENTS = [f"pt{i:02d}" for i in range(1, 13)]
LOW_ABILITY = {"pt01", "pt04", "pt06", "pt09", "pt11"}

QUALITY_PROBS = {
    "healthy": (0.02, 0.08, 0.90),
    "high": (0.05, 0.15, 0.80),
    "low": (0.50, 0.35, 0.15),
}

# phonological-error transcripts for low-quality trials (cf. "comg")
MANGLED = {
    "acorn": "acorm", "anchor": "anchot", "beaver": "beafer", "comb": "comg",
    "hammock": "hammick", "igloo": "igloop", "pretzel": "pretzul",
    "walrus": "walrut",
}


def tone_freq(word: str) -> float:
    return 300.0 + 55.0 * STIMULI.index(word)


def synth_clip(rng, word: str, quality: int, rate: int) -> AudioBuffer:
    duration = rng.uniform(0.4, 0.7)
    n = int(duration * rate)
    t = np.arange(n) / rate
    tone = np.sin(2 * np.pi * tone_freq(word) * t)
    envelope = np.minimum(1.0, np.minimum(t, duration - t) / 0.05)
    if quality == 2:
        signal = 0.55 * tone + 0.01 * rng.standard_normal(n)
    elif quality == 1:
        signal = 0.30 * tone + 0.15 * rng.standard_normal(n)
    else:
        signal = 0.30 * rng.standard_normal(n)
    signal = np.clip(signal * envelope, -0.999, 0.999)
    return AudioBuffer(samples=signal, sample_rate=rate)


def transcript_for(rng, word: str, quality: int) -> str:
    if quality == 2:
        return word if rng.random() < 0.8 else f"the {word}"
    if quality == 1:
        roll = rng.random()
        if roll < 0.5:
            return f"um {word}"
        if roll < 0.8:
            return word
        return f"{word} no wait {word}"
    roll = rng.random()
    if roll < 0.5:
        return MANGLED[word]
    if roll < 0.8:
        return STIMULI[(STIMULI.index(word) + 3) % len(STIMULI)]  # semantic error
    return "um"


def hypothesis_for(rng, word: str, transcript: str, strong: bool) -> str:
    if strong:
        # strong model: near-verbatim, but normalizes mangled forms to the
        # stimulus word (the false-positive failure mode)
        if transcript == MANGLED[word]:
            return word if rng.random() < 0.7 else transcript
        if rng.random() < 0.9:
            return transcript
        return word
    # weak model: drops or garbles single-word speech
    roll = rng.random()
    if roll < 0.35:
        return ""
    if roll < 0.55:
        return f"{word}s are nice"
    if roll < 0.75:
        return transcript
    return "thank you"


def scores_for(rng, quality: int) -> dict:
    scores = {}
    for metric in METRICS:
        if rng.random() < 0.05:
            continue  # unrated on this metric
        if rng.random() < 0.10:
            jitter = int(rng.integers(-1, 2))
            scores[metric] = int(np.clip(quality + jitter, 0, 2))
        else:
            scores[metric] = quality
    return scores


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--root", default="corpus/toy")
    args = parser.parse_args()
    root = Path(args.root)
    (root / "audio").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)

    manifest_lines = []
    strong_hyps = []
    weak_hyps = []
    unscored_budget = 3
    for pid in HEALTHY + PATIENTS:
        cohort = "healthy" if pid in HEALTHY else "patient"
        if cohort == "healthy":
            probs = QUALITY_PROBS["healthy"]
        else:
            probs = QUALITY_PROBS["low" if pid in LOW_ABILITY else "high"]
        for word in STIMULI:
            quality = int(rng.choice(3, p=probs))
            rate = int(rng.choice([16000, 8000]))
            clip = synth_clip(rng, word, quality, rate)
            rel_path = f"audio/{pid}/{word}.wav"
            save_wav(clip, root / rel_path)
            transcript = transcript_for(rng, word, quality)
            scores = scores_for(rng, quality)
            if unscored_budget > 0 and cohort == "healthy" and rng.random() < 0.05:
                scores = {}
                unscored_budget -= 1
            trial_id = f"{pid}-{word}"
            manifest_lines.append(
                {
                    "trial_id": trial_id,
                    "participant_id": pid,
                    "cohort": cohort,
                    "audio_path": rel_path,
                    "transcript": transcript,
                    "target_word": word,
                    "scores": scores,
                }
            )
            strong_hyps.append(
                {"trial_id": trial_id,
                 "hypothesis": hypothesis_for(rng, word, transcript, True)}
            )
            weak_hyps.append(
                {"trial_id": trial_id,
                 "hypothesis": hypothesis_for(rng, word, transcript, False)}
            )

    with open(root / "manifest.jsonl", "w", encoding="utf-8") as handle:
        for line in manifest_lines:
            handle.write(json.dumps(line, sort_keys=True) + "\n")
    with open(root / "hypotheses_sim_finetuned.jsonl", "w", encoding="utf-8") as handle:
        for line in strong_hyps:
            handle.write(json.dumps(line) + "\n")
    with open(root / "hypotheses_sim_baseline.jsonl", "w", encoding="utf-8") as handle:
        for line in weak_hyps:
            handle.write(json.dumps(line) + "\n")
    (root / "stimuli.txt").write_text("\n".join(STIMULI) + "\n")

    ldl_carriers = {"pt03", "pt08"}
    with open(root / "covariates.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["participant_id", "fluency", "previous_stroke",
             "english_second_language", "sex", "ldl_cholesterol", "smoking", "age"]
        )
        for pid in PATIENTS:
            low = pid in LOW_ABILITY
            fluency = rng.normal(3.0 if low else 6.5, 0.6)
            stroke = rng.random() < (0.8 if low else 0.15)
            esl = rng.random() < (0.6 if low else 0.15)
            sex = "F" if rng.random() < 0.5 else "M"
            ldl = f"{rng.normal(3.5, 0.8):.2f}" if pid in ldl_carriers else ""
            smoking = rng.random() < 0.4
            age = rng.normal(62, 8)
            writer.writerow(
                [pid, f"{fluency:.2f}", str(stroke).lower(), str(esl).lower(),
                 sex, ldl, str(smoking).lower(), f"{age:.1f}"]
            )
    n_wavs = sum(1 for _ in (root / "audio").rglob("*.wav"))
    print(f"wrote {len(manifest_lines)} trials, {n_wavs} clips under {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
