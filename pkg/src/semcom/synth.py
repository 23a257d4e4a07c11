"""Seeded generator of parliamentary-debate style English sentences.

Stands in for a proceedings corpus when none is available offline.  Output is
lowercased with punctuation already space-separated, one sentence per string.
"""

from __future__ import annotations

import numpy as np

_INTROS = [
    "mr president ,", "madam president ,", "ladies and gentlemen ,", "first of all ,",
    "in my opinion ,", "however ,", "therefore ,", "in addition ,", "finally ,",
    "of course ,", "in this respect ,", "on behalf of my group ,", "at the same time ,",
    "for this reason ,", "nevertheless ,", "above all ,", "secondly ,", "thirdly ,",
    "as you know ,", "in fact ,",
]

_ACTORS = [
    "commission", "council", "parliament", "rapporteur", "committee", "presidency",
    "government", "union", "court", "agency", "minister", "commissioner", "group",
    "assembly", "member states", "institutions", "citizens", "authorities", "farmers",
    "workers", "consumers", "companies", "regions", "partners", "colleagues", "delegation",
    "ombudsman", "bank", "secretariat", "administration", "majority", "opposition",
    "socialists", "liberals", "greens", "conservatives", "producers", "fishermen",
    "taxpayers", "victims", "refugees", "students", "researchers", "experts", "judges",
    "police", "unions", "employers", "operators", "ministers",
]

_THINGS = [
    "report", "proposal", "directive", "regulation", "budget", "resolution", "amendment",
    "agreement", "treaty", "strategy", "programme", "policy", "framework", "debate",
    "decision", "position", "situation", "problem", "question", "initiative", "reform",
    "market", "sector", "system", "procedure", "principle", "objective", "priority",
    "crisis", "conflict", "dialogue", "cooperation", "development", "enlargement",
    "integration", "competition", "employment", "unemployment", "growth", "security",
    "stability", "transparency", "democracy", "freedom", "justice", "health", "safety",
    "environment", "climate", "energy", "transport", "agriculture", "fisheries", "trade",
    "industry", "research", "innovation", "education", "culture", "tourism", "migration",
    "asylum", "border", "currency", "tax", "tariff", "subsidy", "aid", "loan", "fund",
    "resources", "funding", "expenditure", "revenue", "deficit", "debt", "inflation",
    "pension", "wage", "contract", "consumer protection", "food safety", "public health",
    "human rights", "rule of law", "single market", "internal market", "common position",
    "legal basis", "action plan", "white paper", "green paper", "annual report",
    "work programme", "second reading", "first reading", "conciliation procedure",
    "activity based budgeting", "allocation of resources", "strategic objectives",
    "structural funds", "cohesion policy", "common agricultural policy", "monetary union",
    "fundamental rights", "data protection", "civil society", "public opinion",
    "social dialogue", "working conditions", "equal opportunities", "gender equality",
    "regional policy", "foreign policy", "defence policy", "neighbourhood policy",
    "emission trading", "renewable energy", "road safety", "air transport",
    "maritime safety", "nuclear safety", "animal welfare", "water quality", "waste",
    "pollution", "biodiversity", "forests", "drugs", "terrorism", "corruption",
    "fraud", "poverty", "hunger", "discrimination", "violence", "elections", "media",
    "internet", "telecommunications", "services", "goods", "products", "medicines",
    "chemicals", "pesticides", "vehicles", "ships", "railways", "ports", "airports",
]

_ADJECTIVES = [
    "european", "national", "regional", "local", "international", "global", "economic",
    "social", "political", "financial", "legal", "technical", "environmental", "new",
    "important", "essential", "necessary", "clear", "strong", "effective", "efficient",
    "fair", "sustainable", "common", "joint", "single", "public", "private", "open",
    "transparent", "democratic", "responsible", "serious", "difficult", "urgent", "major",
    "minor", "specific", "general", "current", "future", "previous", "recent", "final",
    "proposed", "excellent", "balanced", "ambitious", "realistic", "practical", "real",
    "genuine", "fundamental", "key", "main", "central", "basic", "appropriate",
    "adequate", "sufficient", "considerable", "significant", "positive", "negative",
    "short", "long", "high", "low", "better", "greater", "full", "whole", "entire",
    "human", "cultural", "rural", "urban", "industrial", "agricultural", "medical",
]

_VERBS = [
    ("support", "supported"), ("adopt", "adopted"), ("reject", "rejected"),
    ("examine", "examined"), ("welcome", "welcomed"), ("improve", "improved"),
    ("strengthen", "strengthened"), ("reform", "reformed"), ("implement", "implemented"),
    ("present", "presented"), ("propose", "proposed"), ("approve", "approved"),
    ("consider", "considered"), ("discuss", "discussed"), ("address", "addressed"),
    ("protect", "protected"), ("promote", "promoted"), ("guarantee", "guaranteed"),
    ("ensure", "ensured"), ("finance", "financed"), ("review", "reviewed"),
    ("simplify", "simplified"), ("clarify", "clarified"), ("extend", "extended"),
    ("reduce", "reduced"), ("increase", "increased"), ("create", "created"),
    ("establish", "established"), ("develop", "developed"), ("defend", "defended"),
    ("respect", "respected"), ("monitor", "monitored"), ("assess", "assessed"),
    ("evaluate", "evaluated"), ("introduce", "introduced"), ("amend", "amended"),
    ("complete", "completed"), ("launch", "launched"), ("oppose", "opposed"),
    ("accept", "accepted"), ("change", "changed"), ("combat", "combated"),
    ("prevent", "prevented"), ("encourage", "encouraged"), ("coordinate", "coordinated"),
    ("harmonise", "harmonised"), ("modernise", "modernised"), ("raise", "raised"),
    ("tackle", "tackled"), ("solve", "solved"), ("reach", "reached"),
    ("take", "taken"), ("make", "made"), ("give", "given"), ("see", "seen"),
    ("choose", "chosen"), ("begin", "begun"), ("bring", "brought"), ("build", "built"),
    ("find", "found"), ("hold", "held"), ("keep", "kept"), ("lead", "led"),
    ("meet", "met"), ("pay", "paid"), ("send", "sent"), ("set", "set"),
    ("understand", "understood"), ("win", "won"), ("write", "written"),
]

_MODALS = ["must", "should", "will", "can", "could", "would", "may", "cannot", "shall", "might"]
_AUX = ["has", "have", "had"]
_DETS = ["the", "this", "that", "our", "their", "its", "a", "every", "each", "no"]
_PREPS = ["in", "on", "for", "with", "within", "without", "under", "against", "between",
          "among", "towards", "through", "during", "after", "before", "beyond", "across"]
_CONNECT = ["because", "since", "although", "while", "if", "unless", "as", "so that",
            "even though", "provided that"]
_TIME = ["today", "tomorrow", "yesterday", "now", "this year", "last year", "next year",
         "this week", "next week", "in the future", "as soon as possible", "at last",
         "once again", "without delay", "in the long term", "in the short term",
         "this morning", "this evening", "this afternoon", "next month"]
_OPINION = ["i believe that", "we think that", "i am convinced that", "we know that",
            "it is clear that", "it is true that", "i hope that", "we must recognise that",
            "i would point out that", "it seems that", "i agree that", "we regret that",
            "i fear that", "it is essential that", "we insist that"]


def _zipf_weights(n: int, exponent: float = 0.9) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


class SentenceGenerator:
    """Probabilistic grammar over a fixed lexicon with Zipf-distributed word choice."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self._weights = {}

    def _pick(self, words):
        key = id(words)
        if key not in self._weights:
            self._weights[key] = _zipf_weights(len(words))
        return words[self.rng.choice(len(words), p=self._weights[key])]

    def _chance(self, p: float) -> bool:
        return self.rng.random() < p

    def noun_phrase(self, nouns) -> list[str]:
        words = [self._pick(_DETS)]
        if self._chance(0.4):
            words.append(self._pick(_ADJECTIVES))
        words.extend(self._pick(nouns).split())
        if self._chance(0.2):
            words += ["of", "the"] + self._pick(_THINGS).split()
        return words

    def subject(self) -> list[str]:
        if self._chance(0.15):
            return [self.rng.choice(["we", "i", "they", "you", "it"])]
        return self.noun_phrase(_ACTORS if self._chance(0.7) else _THINGS)

    def verb_phrase(self) -> list[str]:
        base, participle = _VERBS[self.rng.choice(len(_VERBS), p=self._verb_weights())]
        if self._chance(0.5):
            verb = [self._pick(_MODALS), base]
        elif self._chance(0.5):
            verb = [self._pick(_AUX), participle]
        else:
            verb = [self._pick(_MODALS), "not", base] if self._chance(0.3) else [self._pick(_AUX), "not", participle]
        words = verb + self.noun_phrase(_THINGS)
        if self._chance(0.45):
            words += [self._pick(_PREPS)] + self.noun_phrase(_THINGS if self._chance(0.6) else _ACTORS)
        if self._chance(0.25):
            words += self._pick(_TIME).split()
        return words

    def _verb_weights(self):
        key = "verbs"
        if key not in self._weights:
            self._weights[key] = _zipf_weights(len(_VERBS))
        return self._weights[key]

    def clause(self) -> list[str]:
        return self.subject() + self.verb_phrase()

    def sentence(self) -> str:
        words = []
        if self._chance(0.3):
            words += self._pick(_INTROS).split()
        if self._chance(0.2):
            words += self._pick(_OPINION).split()
        words += self.clause()
        r = self.rng.random()
        if r < 0.25:
            words += [","] + self._pick(_CONNECT).split() + self.clause()
        elif r < 0.4:
            words += ["and"] + self.verb_phrase()
        elif r < 0.5:
            words += ["in", "order", "to"] + self.verb_phrase()[1:]
        words.append("?" if self._chance(0.05) else ".")
        return " ".join(words)

    def sentences(self, n: int) -> list[str]:
        return [self.sentence() for _ in range(n)]


def generate(n: int, seed: int = 0) -> list[str]:
    """``n`` sentences from a generator seeded with ``seed``."""
    return SentenceGenerator(seed).sentences(n)


def lexicon() -> set[str]:
    """Every token the generator can emit."""
    words = set(",.?")
    pools = [_INTROS, _ACTORS, _THINGS, _ADJECTIVES, _MODALS, _AUX, _DETS, _PREPS,
             _CONNECT, _TIME, _OPINION, ["we", "i", "they", "you", "it", "of", "and", "in",
                                          "order", "to", "not", "the"]]
    for pool in pools:
        for entry in pool:
            words.update(entry.split())
    for base, part in _VERBS:
        words.update((base, part))
    return words
