"""
Crawl orchestration with the local mock fetcher
===============================================

The crawler never talks to a platform directly: a Fetcher turns queries
into source ids and source ids into media bytes. The mock fetcher serves a
directory of WAV files, which is enough to show planning, PCM-hash
deduplication, failure handling, and idempotent resumption.
"""

import tempfile
from pathlib import Path

import numpy as np

from stemcurate import AudioBuffer
from stemcurate.crawler import CrawlManifest, LocalDirectoryFetcher, execute_crawl, plan_crawl
from stemcurate.taxonomy import QueryRecord

FS = 48000
work = Path(tempfile.mkdtemp(prefix="stemcurate_crawl_"))
media = work / "media"
media.mkdir()

t = np.arange(4 * FS) / FS
take = AudioBuffer((0.5 * np.sin(2 * np.pi * 440 * t))[None, :], FS)
take.to_wav(media / "piano_recital.wav")
take.to_wav(media / "piano_recital_reupload.wav")  # same PCM, new name
AudioBuffer((0.5 * np.sin(2 * np.pi * 250 * t))[None, :], FS).to_wav(media / "piano_etude.wav")

fetcher = LocalDirectoryFetcher(media)
queries = [QueryRecord("piano", "en", "piano solo")]

manifest = plan_crawl(queries, fetcher, per_query_limit=10)
print("planned:", manifest.status_counts())

out = work / "audio"
manifest_path = work / "manifest.jsonl"
execute_crawl(manifest, fetcher, out, rate_limit_per_min=0)
manifest.save(manifest_path)
print("after first run:", manifest.status_counts())
print(f"downloads so far: {fetcher.download_count} "
      "(the re-upload was deduplicated by decoded-PCM hash)")

# resuming changes nothing: fetched records are never re-downloaded
resumed = CrawlManifest.load(manifest_path)
execute_crawl(resumed, fetcher, out)
print("after resume:   ", resumed.status_counts())
print(f"downloads total:  {fetcher.download_count}")

for record in resumed.by_status("fetched"):
    buf = AudioBuffer.from_wav(record.local_path)
    print(f"  {record.source_id}: {buf.sample_rate_hz} Hz, {buf.channels} ch, "
          f"{buf.duration_s:.1f}s, hash {record.content_hash[:12]}...")
