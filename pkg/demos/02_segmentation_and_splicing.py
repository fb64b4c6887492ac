"""
Fixed-length segmentation and splicing
======================================

Tracks are cut into non-overlapping 3 s mono 16 kHz windows (the classifier
input format); kept windows are later spliced back into one continuous
track. With the joint fade disabled the two operations are exact inverses
over the retained span.
"""

import numpy as np

from stemcurate import AudioBuffer, safe_normalize, segment, splice
from stemcurate.audio import SEGMENT_FRAMES, SEGMENT_RATE_HZ

# A 10 s tone stands in for a decoded track (already mono 16 kHz here)
t = np.arange(10 * SEGMENT_RATE_HZ) / SEGMENT_RATE_HZ
track = AudioBuffer((0.6 * np.sin(2 * np.pi * 220 * t))[None, :], SEGMENT_RATE_HZ)

segments = segment(track, source_id="demo-track")
dropped = track.frames - len(segments) * SEGMENT_FRAMES
print(f"{track.duration_s:.1f}s track -> {len(segments)} segments, {dropped} frames dropped")

# Safe normalization is applied per segment before embedding: peak at most
# 1, zeros stay zeros, already-normalized audio passes through
peaky = AudioBuffer(np.array([[2.0, -4.0, 1.0]]), SEGMENT_RATE_HZ)
print("safe_normalize([2, -4, 1]) ->", safe_normalize(peaky).samples[0])

# Exact round trip with fade 0
rebuilt = splice(segments, crossfade_ms=0.0)
exact = np.array_equal(rebuilt.samples, track.samples[:, : rebuilt.frames])
print(f"splice(all segments) reproduces the truncated input exactly: {exact}")

# Keeping a subset (as the cleaner does) with the default 10 ms joint fade
kept = [segments[0], segments[2]]
clean = splice(kept)
print(f"kept segments {[s.index for s in kept]} -> {clean.duration_s:.1f}s clean track")

joint = SEGMENT_FRAMES
step = np.abs(np.diff(clean.samples[0, joint - 200 : joint + 200])).max()
print(f"max sample step around the joint: {step:.4f} (fade keeps it click-free)")
