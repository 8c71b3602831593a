#!/usr/bin/env python3
"""Regenerate the reference timelines shipped under timelines/.

Synthetic stand-ins for the three experiment lengths (180 s / 60 s / 15 s)
plus the movement+speech proof-of-concept scenario. Streams:

  imu          2 Hz magnitude samples; > 0.5 while the robot moves
  camera       5 Hz frames -> slam jobs (cost from the module default)
  sign_cam     sign detections -> sign jobs; frequent while moving
  mic          utterance level markers (1.0 speaking / 0.0 silence)
  speech_audio utterance payloads -> speech jobs
  battery      telemetry noise; feeds nothing

Deterministic: fixed seed per experiment, integer jitter.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "timelines"

SIGN_WORK_US = 180_000
SPEECH_WORK_US = 430_000


def moving_at(t_ms: int, movement: list[tuple[int, int]]) -> bool:
    return any(lo <= t_ms < hi for lo, hi in movement)


def gen_experiment(name: str, duration_ms: int, movement: list[tuple[int, int]],
                   seed: int,
                   camera_period_ms: int = 200,
                   sign_period_moving_ms: int = 900,
                   sign_period_still_ms: int = 750,
                   speech_period_still_ms: int = 2000,
                   speech_period_moving_ms: int = 1000) -> dict:
    rng = random.Random(seed)
    entries = []

    t = 0
    while t < duration_ms:
        mag = round(rng.uniform(1.2, 3.0), 3) if moving_at(t, movement) \
            else round(rng.uniform(0.0, 0.3), 3)
        entries.append({"t_ms": t, "stream": "imu", "payload": {"mag": mag}})
        t += 500

    t = 100
    while t < duration_ms:
        entries.append({"t_ms": t, "stream": "camera",
                        "payload": {"frame": t // camera_period_ms}})
        t += camera_period_ms

    # Sign detections, phase-aware. Bursty while moving, sparse while
    # stationary. The sign task is context-gated while stationary, so the
    # schedule leaves a margin around gating transitions: detections stop
    # 3 s before the robot does (it decelerates) and resume 1.4 s after a
    # stop, which keeps RT lag windows from trapping sign work forever.
    phases: list[tuple[int, int, bool]] = []
    edges = sorted({0, duration_ms} | {e for lo, hi in movement for e in (lo, hi)})
    for lo, hi in zip(edges, edges[1:]):
        phases.append((lo, hi, moving_at(lo, movement)))
    for lo, hi, is_moving in phases:
        if is_moving:
            t, end, period = lo + 400, hi - 3000, sign_period_moving_ms
        else:
            t = lo + (1400 if lo > 0 else 700)
            end, period = hi, sign_period_still_ms
        while t < end:
            conf = round(rng.uniform(0.82, 0.99), 3) if is_moving \
                else round(rng.uniform(0.3, 0.7), 3)
            entries.append({"t_ms": t, "stream": "sign_cam",
                            "payload": {"conf": conf},
                            "work_us": SIGN_WORK_US + rng.randrange(-15_000, 15_000),
                            "ground_truth": {"digit": rng.randrange(10)}})
            t += period + rng.randrange(-50, 51)

    t = 1500
    while t + 1000 < duration_ms:
        period = speech_period_moving_ms if moving_at(t, movement) \
            else speech_period_still_ms
        entries.append({"t_ms": t, "stream": "mic", "payload": {"level": 1.0}})
        entries.append({"t_ms": t + 120, "stream": "speech_audio",
                        "payload": {"clip": t},
                        "work_us": SPEECH_WORK_US + rng.randrange(-30_000, 30_000),
                        "ground_truth": {"text": "go"}})
        entries.append({"t_ms": t + 900, "stream": "mic", "payload": {"level": 0.0}})
        t += period + rng.randrange(-100, 101)

    t = 2500
    while t < duration_ms:
        entries.append({"t_ms": t, "stream": "battery",
                        "payload": {"pct": max(5, 95 - t // 2000)}})
        t += 5000

    entries.sort(key=lambda e: e["t_ms"])
    return {"name": name, "duration_ms": duration_ms, "entries": entries}


def gen_movement_speech() -> dict:
    # Proof-of-concept scenario: one movement window [30.4 s, 45.2 s), chosen
    # off the 1 s period grid so the RT lag is visible.
    movement = [(30_400, 45_200)]
    data = gen_experiment("movement_speech", 60_000, movement, seed=7,
                          camera_period_ms=400,
                          sign_period_moving_ms=2000, sign_period_still_ms=4000,
                          speech_period_still_ms=3000, speech_period_moving_ms=3000)
    return data


EXPERIMENTS = {
    # name: (duration_ms, movement intervals, seed)
    "exp1": (180_000, [(30_400, 60_200), (75_000, 110_600), (130_200, 176_000)], 1),
    "exp2": (60_000, [(15_200, 30_600), (40_400, 52_000)], 2),
    "exp3": (15_000, [(9_400, 12_200)], 3),
}


def main() -> None:
    OUT.mkdir(exist_ok=True)
    for name, (duration, movement, seed) in EXPERIMENTS.items():
        data = gen_experiment(name, duration, movement, seed)
        path = OUT / f"{name}.json"
        path.write_text(json.dumps(data, indent=None, separators=(",", ":"))
                        + "\n", encoding="utf-8")
        print(f"wrote {path} ({len(data['entries'])} entries)")
    path = OUT / "movement_speech.json"
    path.write_text(json.dumps(gen_movement_speech(),
                               separators=(",", ":")) + "\n", encoding="utf-8")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
