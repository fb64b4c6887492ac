"""
Taxonomy expansion into multilingual crawl queries
==================================================

The seven stems carry 22 queryable keywords: the five plain stems are
queried by their own name, strings and wind-brass by every sub-track
instrument. Each keyword becomes one "<instrument> solo" query per
configured language.
"""

from pathlib import Path

from stemcurate import STEMS, default_templates, expand_queries
from stemcurate.taxonomy import all_keywords, save_templates

out_dir = Path("demo_output")
out_dir.mkdir(exist_ok=True)

# The taxonomy ships in code; inspect it
for stem in STEMS:
    subs = f" -> {', '.join(stem.sub_tracks)}" if stem.sub_tracks else ""
    print(f"{stem.id:<16}{subs}")
print(f"\nqueryable keywords: {len(all_keywords())}")

# Nine language slots by default: English is filled in, the other eight are
# empty and fall back to English (flagged) until someone edits the config.
templates = default_templates()
records = expand_queries(STEMS, templates)
print(f"queries over {len(templates)} languages: {len(records)}")
print("first five:")
for record in records[:5]:
    flag = "  (fallback)" if record.used_fallback else ""
    print(f"  {record.stem_id}\t{record.language_tag}\t{record.query}{flag}")

# Write a starter translation config; fill in the empty language tables and
# feed it back with `stemcurate expand-queries --translations <path>`.
config_path = out_dir / "translations.json"
save_templates(config_path, templates)
print(f"\nstarter translation config -> {config_path}")
