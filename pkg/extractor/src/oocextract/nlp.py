"""Caption annotation: gazetteer NER, dependency-role heuristics, and the
generic-caption classifier stub.

These are desk-scale stand-ins for the pretrained NLP stack; each component
is selected by name in the model config so real models can be dropped in
behind the same interface.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ModelLoadError

LABELS = ("PERSON", "GPE", "ORG", "LOC", "EVENT", "DATE", "OTHER")

# Minimal built-in gazetteer; a config-supplied JSON file extends/overrides it.
BUILTIN_GAZETTEER: dict[str, tuple[str, str | None]] = {
    "angela merkel": ("PERSON", "Angela_Merkel"),
    "barack obama": ("PERSON", "Barack_Obama"),
    "hillary clinton": ("PERSON", "Hillary_Clinton"),
    "david cameron": ("PERSON", "David_Cameron"),
    "boris johnson": ("PERSON", "Boris_Johnson"),
    "emmanuel macron": ("PERSON", "Emmanuel_Macron"),
    "jacinda ardern": ("PERSON", "Jacinda_Ardern"),
    "justin trudeau": ("PERSON", "Justin_Trudeau"),
    "merkel": ("PERSON", "Angela_Merkel"),
    "obama": ("PERSON", "Barack_Obama"),
    "berlin": ("GPE", "Berlin"),
    "london": ("GPE", "London"),
    "paris": ("GPE", "Paris"),
    "washington": ("GPE", "Washington,_D.C."),
    "wellington": ("GPE", "Wellington"),
    "ottawa": ("GPE", "Ottawa"),
    "germany": ("GPE", "Germany"),
    "france": ("GPE", "France"),
    "tokyo": ("GPE", "Tokyo"),
    "united nations": ("ORG", "United_Nations"),
    "european union": ("ORG", "European_Union"),
    "world bank": ("ORG", "World_Bank"),
    "downing street": ("LOC", "Downing_Street"),
    "mount fuji": ("LOC", "Mount_Fuji"),
    "olympic games": ("EVENT", "Olympic_Games"),
    "climate summit": ("EVENT", None),
}

_VERB_LEXICON = {
    "accused", "addresses", "addressed", "announce", "announced", "announces",
    "arrive", "arrived", "arrives", "attend", "attended", "attends", "criticised",
    "criticized", "deliver", "delivered", "delivers", "greets", "greeted", "held",
    "hold", "holds", "hosted", "hosts", "lead", "leads", "led", "meet", "meets",
    "met", "open", "opened", "opens", "said", "say", "says", "speak", "speaks",
    "spoke", "visit", "visited", "visits", "vote", "voted", "votes", "warned",
    "warns", "welcomed", "welcomes", "win", "wins", "won",
    "is", "are", "was", "were", "has", "have", "had", "will",
}

# Nouns a person name can modify ("the Obama administration"); the modifier
# rule only fires on these, so unknown following words never exclude a person.
_MODIFIED_NOUN_LEXICON = {
    "administration", "adviser", "advisers", "aide", "aides", "ally", "allies",
    "cabinet", "campaign", "critics", "era", "family", "government", "loyalists",
    "ministry", "office", "officials", "plan", "plans", "policy", "policies",
    "record", "speech", "speeches", "spokesman", "spokesperson", "spokeswoman",
    "staff", "supporters", "team",
}

_GENERIC_CUES = (
    "is seen",
    "are seen",
    "pictured",
    "poses for",
    "attends an event",
    "in an undated photo",
    "file photo",
)


@dataclass(frozen=True)
class Mention:
    surface: str
    label: str
    linked_id: str | None
    start_token: int
    end_token: int  # exclusive


def _tokenize(caption: str) -> list[str]:
    return caption.split()


def _strip_token(token: str) -> str:
    return re.sub(r"^[^\w']+|[^\w']+$", "", token)


def _strip_possessive(token: str) -> str:
    for suffix in ("'s", "’s", "'", "’"):
        if token.endswith(suffix):
            return token[: -len(suffix)]
    return token


class GazetteerNer:
    """Longest-match gazetteer lookup with a capitalized-run fallback."""

    def __init__(self, gazetteer_path: str | Path | None = None):
        self.entries = dict(BUILTIN_GAZETTEER)
        if gazetteer_path is not None:
            try:
                extra = json.loads(Path(gazetteer_path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ModelLoadError(f"gazetteer {gazetteer_path}: {exc}")
            for surface, entry in extra.items():
                label, linked = (entry[0], entry[1]) if isinstance(entry, list) else (entry, None)
                if label not in LABELS:
                    raise ModelLoadError(f"gazetteer label {label!r} not in {LABELS}")
                self.entries[surface.casefold()] = (label, linked)
        self.max_len = max(len(k.split()) for k in self.entries)

    def __call__(self, caption: str) -> list[Mention]:
        tokens = _tokenize(caption)
        clean = [_strip_token(t) for t in tokens]
        folded = [t.casefold() for t in clean]
        mentions: list[Mention] = []
        i = 0
        while i < len(tokens):
            hit = None
            for width in range(min(self.max_len, len(tokens) - i), 0, -1):
                words = folded[i : i + width]
                # possessive forms resolve to their base entry; the surface
                # drops the marker so overlap keys stay comparable
                words = words[:-1] + [_strip_possessive(words[-1])]
                key = " ".join(words)
                if key in self.entries:
                    label, linked = self.entries[key]
                    surface_tokens = clean[i : i + width - 1] + [
                        _strip_possessive(clean[i + width - 1])
                    ]
                    hit = Mention(" ".join(surface_tokens), label, linked, i, i + width)
                    break
            if hit is not None:
                mentions.append(hit)
                i = hit.end_token
                continue
            # fallback: run of capitalized tokens after the sentence start
            if i > 0 and clean[i][:1].isupper() and clean[i].casefold() not in _VERB_LEXICON:
                j = i + 1
                while j < len(tokens) and clean[j][:1].isupper():
                    j += 1
                mentions.append(
                    Mention(" ".join(clean[i:j]), "OTHER", None, i, j)
                )
                i = j
                continue
            i += 1
        return mentions


def _mention_is_possessive(tokens: list[str], mention: Mention) -> bool:
    last = tokens[mention.end_token - 1]
    if last.endswith("'s") or last.endswith("s'") or last.endswith("’s"):
        return True
    if mention.end_token < len(tokens) and tokens[mention.end_token] in ("'s", "’s"):
        return True
    return False


def _mention_is_object(tokens: list[str], mention: Mention) -> bool:
    return any(
        _strip_token(t).casefold() in _VERB_LEXICON for t in tokens[: mention.start_token]
    )


def _mention_modifies_noun(tokens: list[str], mention: Mention) -> bool:
    if mention.end_token >= len(tokens):
        return False
    nxt = _strip_token(tokens[mention.end_token]).casefold()
    return nxt in _MODIFIED_NOUN_LEXICON


def person_roles_excluded(caption: str, mentions: list[Mention]) -> bool:
    """True iff every PERSON mention is possessive, a sentence object, or a
    noun modifier (so the person is unlikely to be pictured)."""
    tokens = _tokenize(caption)
    person_mentions = [m for m in mentions if m.label == "PERSON"]
    if not person_mentions:
        return False
    for m in person_mentions:
        if not (
            _mention_is_possessive(tokens, m)
            or _mention_is_object(tokens, m)
            or _mention_modifies_noun(tokens, m)
        ):
            return False
    return True


class GenericCaptionClassifier:
    """Scores caption genericness in [0, 1]; captions above 0.5 are flagged.

    kind "none" is the documented stub (always 0); "keyword" fires on cue
    phrases typical of interchangeable wire-photo captions.
    """

    def __init__(self, kind: str = "none"):
        if kind not in ("none", "keyword"):
            raise ModelLoadError(f"unknown generic-caption classifier {kind!r}")
        self.kind = kind

    def score(self, caption: str) -> float:
        if self.kind == "none":
            return 0.0
        lowered = caption.casefold()
        return 1.0 if any(cue in lowered for cue in _GENERIC_CUES) else 0.0

    def __call__(self, caption: str) -> bool:
        return self.score(caption) > 0.5


def flag_caption_roles(
    caption: str,
    ner: GazetteerNer,
    classifier: GenericCaptionClassifier,
) -> tuple[bool, bool]:
    """(person_role_excluded, is_generic_caption) for one caption."""
    mentions = ner(caption)
    return person_roles_excluded(caption, mentions), classifier(caption)
