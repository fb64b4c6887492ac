"""The 7-stem instrument taxonomy and its expansion into multilingual
"<instrument> solo" crawl queries.

Strings and wind-brass carry sub-track instruments that are queried
individually; the other five stems are queried by the stem keyword itself.
Translations come from a user-editable JSON config; English ships complete,
the other language slots are empty and fall back (flagged) until filled in.
"""

import json
from dataclasses import dataclass, field

STEM_IDS = (
    "piano",
    "drums",
    "bass",
    "acoustic_guitar",
    "electric_guitar",
    "strings",
    "wind_brass",
)


@dataclass(frozen=True)
class Stem:
    id: str
    keyword: str
    sub_tracks: tuple = ()

    def query_keywords(self):
        """The keywords actually queried: sub-tracks when present, else the
        stem keyword."""
        return self.sub_tracks if self.sub_tracks else (self.keyword,)


STEMS = (
    Stem("piano", "piano"),
    Stem("drums", "drums"),
    Stem("bass", "bass"),
    Stem("acoustic_guitar", "acoustic guitar"),
    Stem("electric_guitar", "electric guitar"),
    Stem(
        "strings",
        "strings",
        ("cello", "viola", "violin", "double bass"),
    ),
    Stem(
        "wind_brass",
        "wind brass",
        (
            "trombone",
            "trumpet",
            "tuba",
            "euphonium",
            "french horn",
            "english horn",
            "bassoon",
            "clarinet",
            "contra bassoon",
            "flute",
            "oboe",
            "piccolo",
            "saxophone",
        ),
    ),
)

SOLO_TOKEN = "solo"
DEFAULT_PATTERN = "{instrument} {solo}"
DEFAULT_LANGUAGE_COUNT = 9


def all_keywords(stems=STEMS):
    out = []
    for stem in stems:
        out.extend(stem.query_keywords())
    return out


class TaxonomyError(Exception):
    pass


class MissingTranslationError(TaxonomyError):
    def __init__(self, keyword, language_tag):
        super().__init__(
            f"no translation for keyword {keyword!r} in language {language_tag!r}"
        )
        self.keyword = keyword
        self.language_tag = language_tag


@dataclass(frozen=True)
class QueryTemplate:
    """Per-language query pattern plus keyword translation table.

    The table maps every canonical keyword (and the "solo" token) to its
    localized form. An empty table means the language slot has not been
    filled in yet.
    """

    language_tag: str
    translations: dict = field(default_factory=dict)
    pattern: str = DEFAULT_PATTERN

    def localize(self, keyword, allow_fallback=True):
        """Returns (localized_keyword, used_fallback)."""
        if keyword in self.translations:
            return self.translations[keyword], False
        if allow_fallback:
            return keyword, True
        raise MissingTranslationError(keyword, self.language_tag)


@dataclass(frozen=True)
class QueryRecord:
    stem_id: str
    language_tag: str
    query: str
    used_fallback: bool = False


_ENGLISH = {kw: kw for kw in all_keywords()}
_ENGLISH[SOLO_TOKEN] = "solo"


def default_templates(language_count=DEFAULT_LANGUAGE_COUNT):
    """English plus empty slots up to the configured language count."""
    templates = [QueryTemplate("en", dict(_ENGLISH))]
    templates += [
        QueryTemplate(f"x-lang{i}", {}) for i in range(2, language_count + 1)
    ]
    return templates


def expand_queries(stems, templates, allow_fallback=True):
    """Expand the taxonomy into one query per (keyword, language).

    Deterministic order: stems in taxonomy order, sub-tracks in taxonomy
    order, languages in template order. With fallback disabled, a missing
    translation raises MissingTranslationError naming the pair.
    """
    templates = list(templates)
    if not templates:
        raise TaxonomyError("no templates configured")
    _check_taxonomy(stems)

    records = []
    for stem in stems:
        for keyword in stem.query_keywords():
            for template in templates:
                word, fb1 = template.localize(keyword, allow_fallback)
                solo, fb2 = template.localize(SOLO_TOKEN, allow_fallback)
                query = template.pattern.format(instrument=word, solo=solo)
                records.append(
                    QueryRecord(stem.id, template.language_tag, query, fb1 or fb2)
                )
    return records


def _check_taxonomy(stems):
    stems = list(stems)
    if len(stems) != 7:
        raise TaxonomyError(f"taxonomy must hold exactly 7 stems, got {len(stems)}")
    ids = [s.id for s in stems]
    if len(set(ids)) != len(ids):
        raise TaxonomyError("duplicate stem ids")


def load_templates(path):
    """Translation config: JSON mapping language_tag -> {keyword: localized}.

    A reserved "__pattern__" key inside a language table overrides the word
    order for that language.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise TaxonomyError("translation config must be a JSON object")
    templates = []
    for tag, table in doc.items():
        if not isinstance(table, dict):
            raise TaxonomyError(f"language {tag!r} must map to an object")
        table = dict(table)
        pattern = table.pop("__pattern__", DEFAULT_PATTERN)
        templates.append(QueryTemplate(tag, table, pattern))
    return templates


def save_templates(path, templates):
    doc = {}
    for t in templates:
        table = dict(t.translations)
        if t.pattern != DEFAULT_PATTERN:
            table["__pattern__"] = t.pattern
        doc[t.language_tag] = table
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
