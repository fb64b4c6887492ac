"""
Loudness measurement and the augmentation effects
=================================================

Negative training mixtures are loudness-matched (gated K-weighted program
loudness), then randomly colored with reverb, compression and EQ. Each
effect is shown here against its physical expectation.
"""

import numpy as np

from stemcurate import (
    AudioBuffer,
    AugmentConfig,
    compress,
    eq,
    estimate_rt60,
    measure_lufs,
    normalize_lufs,
    reverb,
)
from stemcurate.effects import EqBand, apply_augmentations

FS = 16000


def tone(freq, seconds, amplitude=0.5, fs=FS):
    t = np.arange(int(seconds * fs)) / fs
    return AudioBuffer((amplitude * np.sin(2 * np.pi * freq * t))[None, :], fs)


# --- loudness ---------------------------------------------------------------
x = tone(440, 3.0, amplitude=0.9)
print(f"440 Hz tone at 0.9 peak: {measure_lufs(x):7.2f} LUFS")
print(f"same tone at half gain:  {measure_lufs(AudioBuffer(0.5 * x.samples, FS)):7.2f} LUFS"
      "   (pure gain moves loudness by 20*log10(g))")
leveled = normalize_lufs(x, -23.0)
print(f"normalized to -23:       {measure_lufs(leveled):7.2f} LUFS")

# --- reverb -----------------------------------------------------------------
print("\nreverb decay targets vs fitted decay of the impulse response:")
for rt60 in (0.3, 0.6, 1.4):
    impulse = np.zeros((1, int((2 * rt60 + 1) * FS)))
    impulse[0, 0] = 1.0
    response = reverb(AudioBuffer(impulse, FS), rt60, seed=7)
    print(f"  requested {rt60:.1f}s -> fitted {estimate_rt60(response):.2f}s")

# --- compressor -------------------------------------------------------------
steady = AudioBuffer(np.full((1, FS), 0.9), FS)
out = compress(steady, threshold=0.3, ratio=4.0)
level = np.abs(out.samples[0, -1000:]).mean()
print(f"\ncompressor: 0.9 in @ threshold 0.3, ratio 4 -> {level:.3f} out "
      f"(static law predicts {0.3 * 3 ** 0.25:.3f})")

# --- EQ ---------------------------------------------------------------------
bands = [EqBand(1000.0, 6.0, "peak")]
boosted = eq(tone(1000, 1.0), bands)
gain_db = 20 * np.log10(np.abs(boosted.samples[0, FS // 2 :]).max() / 0.5)
off = eq(tone(100, 1.0), bands)
off_db = 20 * np.log10(np.abs(off.samples[0, FS // 2 :]).max() / 0.5)
print(f"+6 dB peak at 1 kHz: 1 kHz tone gains {gain_db:.2f} dB, 100 Hz tone {off_db:+.2f} dB")

# --- randomized chain, as used during training ------------------------------
cfg = AugmentConfig(apply_probabilities={"reverb": 1.0, "compress": 1.0, "eq": 1.0})
augmented = apply_augmentations(tone(440, 3.0), cfg, np.random.default_rng(42))
print(f"\nrandomized chain keeps shape: {augmented.samples.shape}, "
      f"peak {np.abs(augmented.samples).max():.3f}")
