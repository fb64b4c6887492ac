"""Minimal RIFF/WAVE reader and writer.

Supports 16-bit and 24-bit integer PCM plus 32-bit (and 64-bit) IEEE float,
which covers everything the crawl stores and the cleaner writes. All samples
are exchanged as float arrays of shape (channels, frames) in [-1, 1] scale.
"""

import io
import struct

import numpy as np

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class WavFormatError(Exception):
    """Raised for malformed or unsupported WAV content."""


def _pcm24_to_float(raw):
    data = np.frombuffer(raw, dtype=np.uint8)
    n = len(data) // 3
    data = data[: n * 3].reshape(n, 3)
    # sign-extend 3 little-endian bytes into int32
    padded = np.zeros((n, 4), dtype=np.uint8)
    padded[:, 1:] = data
    values = padded.view("<i4").ravel() >> 8
    return values.astype(np.float64) / 8388608.0


def _float_to_pcm24(x):
    values = np.clip(np.round(x * 8388607.0), -8388608, 8388607).astype("<i4")
    raw = values.view(np.uint8).reshape(-1, 4)
    return raw[:, :3].tobytes()


def read_wav(source):
    """Read a WAV file (path or binary file-like).

    Returns (samples, sample_rate_hz) with samples shaped (channels, frames).
    """
    if hasattr(source, "read"):
        return _read_stream(source)
    with open(source, "rb") as fh:
        return _read_stream(fh)


def read_wav_bytes(data):
    return _read_stream(io.BytesIO(data))


def _read_stream(fh):
    header = fh.read(12)
    if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE stream")

    fmt = None
    data = None
    while True:
        chunk_header = fh.read(8)
        if len(chunk_header) < 8:
            break
        chunk_id, size = struct.unpack("<4sI", chunk_header)
        payload = fh.read(size)
        if len(payload) < size and chunk_id != b"data":
            raise WavFormatError(f"truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            fmt = payload
        elif chunk_id == b"data":
            data = payload
        if size % 2:  # chunks are word-aligned
            fh.read(1)

    if fmt is None or data is None:
        raise WavFormatError("missing fmt or data chunk")
    if len(fmt) < 16:
        raise WavFormatError("fmt chunk too short")

    tag, channels, rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise WavFormatError("extensible fmt chunk too short")
        tag = struct.unpack("<H", fmt[24:26])[0]
    if channels < 1:
        raise WavFormatError("zero channels")

    if tag == WAVE_FORMAT_PCM and bits == 16:
        flat = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif tag == WAVE_FORMAT_PCM and bits == 24:
        flat = _pcm24_to_float(data)
    elif tag == WAVE_FORMAT_PCM and bits == 32:
        flat = np.frombuffer(data, dtype="<i4").astype(np.float64) / 2147483648.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        flat = np.frombuffer(data, dtype="<f4").astype(np.float64)
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 64:
        flat = np.frombuffer(data, dtype="<f8").astype(np.float64)
    else:
        raise WavFormatError(f"unsupported format tag={tag} bits={bits}")

    frames = len(flat) // channels
    samples = flat[: frames * channels].reshape(frames, channels).T
    return np.ascontiguousarray(samples), int(rate)


def wav_info(path):
    """Header-only probe: (channels, sample_rate_hz, frames) without
    decoding the payload."""
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise WavFormatError(f"{path}: not a RIFF/WAVE file")
        fmt = None
        data_size = None
        while True:
            chunk_header = fh.read(8)
            if len(chunk_header) < 8:
                break
            chunk_id, size = struct.unpack("<4sI", chunk_header)
            if chunk_id == b"fmt ":
                fmt = fh.read(size)
            elif chunk_id == b"data":
                data_size = size
                fh.seek(size, 1)
            else:
                fh.seek(size, 1)
            if size % 2:
                fh.seek(1, 1)
    if fmt is None or data_size is None or len(fmt) < 16:
        raise WavFormatError(f"{path}: missing fmt or data chunk")
    _, channels, rate, _, block_align, _ = struct.unpack("<HHIIHH", fmt[:16])
    if channels < 1 or block_align < 1:
        raise WavFormatError(f"{path}: malformed fmt chunk")
    return int(channels), int(rate), data_size // block_align


def write_wav(target, samples, sample_rate_hz, sample_format="pcm16"):
    """Write samples shaped (channels, frames) to a WAV file.

    sample_format: "pcm16", "pcm24" or "float32".
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[None, :]
    if samples.ndim != 2:
        raise WavFormatError("samples must be (channels, frames)")
    channels, _ = samples.shape
    interleaved = samples.T.ravel()

    if sample_format == "pcm16":
        tag, bits = WAVE_FORMAT_PCM, 16
        body = (
            np.clip(np.round(interleaved * 32767.0), -32768, 32767)
            .astype("<i2")
            .tobytes()
        )
    elif sample_format == "pcm24":
        tag, bits = WAVE_FORMAT_PCM, 24
        body = _float_to_pcm24(interleaved)
    elif sample_format == "float32":
        tag, bits = WAVE_FORMAT_IEEE_FLOAT, 32
        body = interleaved.astype("<f4").tobytes()
    else:
        raise WavFormatError(f"unsupported sample_format {sample_format!r}")

    block_align = channels * bits // 8
    byte_rate = sample_rate_hz * block_align
    fmt = struct.pack(
        "<HHIIHH", tag, channels, int(sample_rate_hz), byte_rate, block_align, bits
    )
    pad = b"\x00" if len(body) % 2 else b""
    riff_size = 4 + (8 + len(fmt)) + (8 + len(body) + len(pad))

    def _dump(fh):
        fh.write(b"RIFF" + struct.pack("<I", riff_size) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
        fh.write(b"data" + struct.pack("<I", len(body)) + body)
        fh.write(pad)

    if hasattr(target, "write"):
        _dump(target)
    else:
        with open(target, "wb") as fh:
            _dump(fh)


def wav_bytes(samples, sample_rate_hz, sample_format="pcm16"):
    buf = io.BytesIO()
    write_wav(buf, samples, sample_rate_hz, sample_format)
    return buf.getvalue()
