"""Crawl orchestration: turn queries into a download manifest, fetch media
through a pluggable fetcher with rate limiting, normalize everything to
48 kHz stereo WAV, and deduplicate by decoded-PCM hash.

The manifest is an append-only JSON-lines ledger; reloading replays it with
last-write-wins per (source_id, query), which makes runs resumable and
auditable. No record carries wall-clock state, so a no-op rerun leaves the
file byte-identical.
"""

import hashlib
import json
import logging
import shlex
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import wavio
from .audio import CRAWL_RATE_HZ, AudioBuffer, resample

log = logging.getLogger(__name__)

STATUS_PENDING = "pending"
STATUS_FETCHED = "fetched"
STATUS_FAILED = "failed"
STATUS_DUPLICATE = "duplicate"

_TRANSITIONS = {
    STATUS_PENDING: {STATUS_FETCHED, STATUS_FAILED, STATUS_DUPLICATE},
    STATUS_FETCHED: set(),
    STATUS_FAILED: set(),
    STATUS_DUPLICATE: set(),
}

DEFAULT_PER_QUERY_LIMIT = 50


class CrawlError(Exception):
    pass


@dataclass(frozen=True)
class SearchResult:
    source_id: str
    url: str
    title: str = ""


@dataclass(frozen=True)
class ManifestRecord:
    query: str
    stem: str
    language_tag: str
    source_id: str
    url: str = ""
    title: str = ""
    status: str = STATUS_PENDING
    content_hash: str = ""
    duration_s: float = 0.0
    local_path: str = ""
    reason: str = ""

    @property
    def key(self):
        return (self.source_id, self.query)

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class CrawlManifest:
    """Ordered set of records keyed by (source_id, query)."""

    def __init__(self, records=()):
        self.records = {}
        for rec in records:
            self.records[rec.key] = rec

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records.values())

    def by_status(self, status):
        return [r for r in self.records.values() if r.status == status]

    def status_counts(self):
        counts = {s: 0 for s in _TRANSITIONS}
        for rec in self.records.values():
            counts[rec.status] = counts.get(rec.status, 0) + 1
        return counts

    def transition(self, record, status, **changes):
        if status not in _TRANSITIONS[record.status]:
            raise CrawlError(f"illegal transition {record.status} -> {status}")
        updated = replace(record, status=status, **changes)
        self.records[updated.key] = updated
        return updated

    def fetched_hashes(self):
        return {r.content_hash for r in self.by_status(STATUS_FETCHED) if r.content_hash}

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records.values():
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")

    def append(self, path, record):
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        manifest = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rec = ManifestRecord.from_dict(json.loads(line))
                    manifest.records[rec.key] = rec  # last write wins
        return manifest


# ---------------------------------------------------------------------------
# fetchers


class LocalDirectoryFetcher:
    """Serves a directory of WAV files as a mock media platform.

    Search matches query tokens against file names; download returns the raw
    file bytes. Used by tests and offline dry-runs.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.download_count = 0

    def _files(self):
        return sorted(self.root.rglob("*.wav"))

    def search(self, query, limit):
        tokens = [t for t in query.lower().split() if len(t) >= 3]
        hits = []
        for path in self._files():
            name = path.stem.lower()
            if any(t in name for t in tokens):
                hits.append(
                    SearchResult(
                        source_id=path.stem,
                        url=f"local://{path.relative_to(self.root)}",
                        title=path.stem,
                    )
                )
            if len(hits) >= limit:
                break
        return hits

    def download(self, source_id):
        for path in self._files():
            if path.stem == source_id:
                self.download_count += 1
                return path.read_bytes()
        raise CrawlError(f"unknown source {source_id!r}")


class ExternalCommandFetcher:
    """Shells out to a configured downloader binary.

    ``search_cmd`` must print one "source_id<TAB>url<TAB>title" line per hit
    for the {query}/{limit} placeholders; ``download_cmd`` must write a WAV
    file to {out} for {source_id}. Keeps platform specifics out of the
    pipeline.
    """

    def __init__(self, search_cmd, download_cmd, workdir=None):
        self.search_cmd = search_cmd
        self.download_cmd = download_cmd
        self.workdir = Path(workdir) if workdir else Path(".")

    def search(self, query, limit):
        cmd = [
            part.format(query=query, limit=limit)
            for part in shlex.split(self.search_cmd)
        ]
        out = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
        results = []
        for line in out.splitlines():
            parts = line.split("\t")
            if len(parts) >= 2:
                results.append(SearchResult(parts[0], parts[1], parts[2] if len(parts) > 2 else ""))
        return results[:limit]

    def download(self, source_id):
        out_path = self.workdir / f"{source_id}.fetch.wav"
        cmd = [
            part.format(source_id=source_id, out=out_path)
            for part in shlex.split(self.download_cmd)
        ]
        subprocess.run(cmd, check=True)
        data = out_path.read_bytes()
        out_path.unlink()
        return data


class RateLimiter:
    """Paces calls to at most ``per_minute`` per minute; thread-safe.

    Clock and sleep are injectable so pacing is testable without waiting.
    """

    def __init__(self, per_minute, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / per_minute if per_minute > 0 else 0.0
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_slot = None

    def wait(self):
        if self.interval <= 0:
            return
        with self._lock:
            now = self._clock()
            if self._next_slot is not None and now < self._next_slot:
                self._sleep(self._next_slot - now)
                now = self._next_slot
            self._next_slot = now + self.interval


# ---------------------------------------------------------------------------
# crawl phases


def plan_crawl(queries, fetcher, per_query_limit=DEFAULT_PER_QUERY_LIMIT):
    """Search every query and build a manifest of pending records.

    The same source_id surfacing under several queries stays pending only
    for the first query; later sightings are recorded as duplicates. A
    failing search marks nothing pending for that query and planning
    continues.
    """
    manifest = CrawlManifest()
    seen = {}
    for q in queries:
        try:
            results = fetcher.search(q.query, per_query_limit)
        except Exception as exc:
            log.warning("search failed for %r: %s", q.query, exc)
            continue
        for hit in results:
            record = ManifestRecord(
                query=q.query,
                stem=q.stem_id,
                language_tag=q.language_tag,
                source_id=hit.source_id,
                url=hit.url,
                title=hit.title,
            )
            if hit.source_id in seen:
                record = replace(
                    record,
                    status=STATUS_DUPLICATE,
                    reason=f"already planned under query {seen[hit.source_id]!r}",
                )
            else:
                seen[hit.source_id] = q.query
            if record.key not in manifest.records:
                manifest.records[record.key] = record
    return manifest


def _normalize_media(data):
    """Decoded media -> 48 kHz stereo buffer plus its PCM content hash."""
    samples, rate = wavio.read_wav_bytes(data)
    buf = AudioBuffer(samples, rate)
    buf = resample(buf, CRAWL_RATE_HZ)
    if buf.channels == 1:
        buf = AudioBuffer(np.repeat(buf.samples, 2, axis=0), buf.sample_rate_hz)
    quantized = np.clip(np.round(buf.samples * 32767.0), -32768, 32767).astype("<i2")
    return buf, hashlib.sha256(quantized.tobytes()).hexdigest()


def execute_crawl(
    manifest: CrawlManifest,
    fetcher,
    out_dir,
    rate_limit_per_min=0,
    workers=1,
    manifest_path=None,
    rate_limiter=None,
):
    """Fetch all pending records; returns the updated manifest.

    Downloads run in parallel under the rate limiter; duplicate
    adjudication (by decoded-PCM hash) happens afterwards in manifest
    order, so results do not depend on completion order. Fetched records
    whose file already exists are never re-downloaded.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    limiter = rate_limiter or RateLimiter(rate_limit_per_min)
    pending = manifest.by_status(STATUS_PENDING)
    known_hashes = manifest.fetched_hashes()

    def fetch(record):
        limiter.wait()
        try:
            data = fetcher.download(record.source_id)
            buf, content_hash = _normalize_media(data)
            return record, buf, content_hash, None
        except Exception as exc:
            return record, None, "", f"{type(exc).__name__}: {exc}"

    # chunked execution bounds memory: downloads within a chunk run in
    # parallel, adjudication always happens in manifest order
    chunk_size = max(8, workers * 4)
    for start in range(0, len(pending), chunk_size):
        chunk = pending[start : start + chunk_size]
        if workers <= 1 or len(chunk) <= 1:
            outcomes = [fetch(r) for r in chunk]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(fetch, chunk))

        for record, buf, content_hash, err in outcomes:
            if err is not None:
                updated = manifest.transition(record, STATUS_FAILED, reason=err)
            elif content_hash in known_hashes:
                updated = manifest.transition(
                    record,
                    STATUS_DUPLICATE,
                    content_hash=content_hash,
                    reason="identical PCM already fetched",
                )
            else:
                local_path = out_dir / f"{record.source_id}.wav"
                buf.to_wav(local_path)
                known_hashes.add(content_hash)
                updated = manifest.transition(
                    record,
                    STATUS_FETCHED,
                    content_hash=content_hash,
                    duration_s=buf.duration_s,
                    local_path=str(local_path),
                )
            if manifest_path:
                manifest.append(manifest_path, updated)
    return manifest
