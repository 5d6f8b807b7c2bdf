import random
from pathlib import Path

import pytest

from duorag.corpus import Corpus, Paragraph, QARecord
from duorag.errors import TransportError
from duorag.gateway import GenerationParams, LlmGateway, MockBackend, mock_key

GOLDEN_DIR = Path(__file__).parent / "goldens"
DATA_DIR = Path(__file__).parent / "data"

_WORDS = (
    "river mountain treaty archive senator bridge harbor novel museum garden "
    "festival engine comet village scholar border island compass lantern market "
    "railway castle meadow anthem glacier canyon harvest beacon orchard quarry"
).split()


def make_text(rng: random.Random, sentences: int, words_per_sentence: int = 8) -> str:
    """Deterministic prose: `sentences` sentences of exactly `words_per_sentence` words."""
    out = []
    for _ in range(sentences):
        tokens = [rng.choice(_WORDS) for _ in range(words_per_sentence)]
        tokens[0] = tokens[0].capitalize()
        out.append(" ".join(tokens) + ".")
    return " ".join(out)


def make_paragraph(rng: random.Random, sentences: int = 5, words_per_sentence: int = 8,
                   title: str = "", dataset: str = "test") -> Paragraph:
    return Paragraph.from_text(
        make_text(rng, sentences, words_per_sentence), title=title, source_dataset=dataset
    )


class FlakyBackend:
    """Fails the first `failures` calls with a transport error, then delegates."""

    def __init__(self, inner, failures: int):
        self.inner = inner
        self.failures = failures
        self.attempts = 0

    def complete(self, template_name, prompt, key, params):
        self.attempts += 1
        if self.attempts <= self.failures:
            raise TransportError(f"synthetic outage {self.attempts}")
        return self.inner.complete(template_name, prompt, key, params)


def script(backend: MockBackend, template_name: str, slots: dict, response: str) -> str:
    """Script an exact-key response; returns the key for reference."""
    key = mock_key(template_name, slots)
    backend.script(key, response)
    return key


def instant_gateway(backend, **kwargs) -> LlmGateway:
    """Gateway with no real sleeping or wall-clock dependence."""
    ticks = iter(range(10**9))
    kwargs.setdefault("sleep", lambda s: None)
    kwargs.setdefault("clock", lambda: float(next(ticks)))
    return LlmGateway(backend, **kwargs)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)


@pytest.fixture
def small_corpus(rng) -> Corpus:
    """Eight paragraphs of 20 sentences x 8 words (160 words each)."""
    return Corpus(make_paragraph(rng, sentences=20) for _ in range(8))


@pytest.fixture
def qa_rows() -> list[dict]:
    """Three raw records with ten paragraph instances over six unique texts."""
    para = {
        "p1": "The Meridian Bridge opened in 1902. It spans the Arlen river.",
        "p2": "Arlen City grew around the river trade. Its port closed in 1960.",
        "p3": "The bridge was designed by Edith Kowal. She also planned the city archive.",
        "p4": "Migratory cranes nest near the estuary. They arrive each spring.",
        "p5": "The city archive preserves trade ledgers. Most date from the 1800s.",
        "p6": "A lighthouse guards the estuary mouth. It was automated in 1971.",
    }
    return [
        {
            "question": "Who designed the bridge over the Arlen river?",
            "answer": "Edith Kowal",
            "dataset": "hotpotqa",
            "paragraphs": [
                {"title": "Meridian Bridge", "text": para["p1"], "is_supporting": True},
                {"title": "Edith Kowal", "text": para["p3"], "is_supporting": True},
                {"title": "Cranes", "text": para["p4"], "is_supporting": False},
                {"title": "Lighthouse", "text": para["p6"], "is_supporting": False},
            ],
        },
        {
            "question": "When did the port of Arlen City close?",
            "answer": "1960",
            "dataset": "hotpotqa",
            "paragraphs": [
                {"title": "Arlen City", "text": para["p2"], "is_supporting": True},
                {"title": "Meridian Bridge", "text": para["p1"], "is_supporting": False},
                {"title": "Archive", "text": para["p5"], "is_supporting": False},
            ],
        },
        {
            "question": "What does the city archive preserve?",
            "answer": "trade ledgers",
            "dataset": "2wikimultihopqa",
            "paragraphs": [
                {"title": "Archive", "text": para["p5"], "is_supporting": True},
                {"title": "Edith Kowal", "text": para["p3"], "is_supporting": False},
                {"title": "Lighthouse", "text": para["p6"], "is_supporting": False},
            ],
        },
    ]
