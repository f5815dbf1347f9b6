"""Python access to the objforge tokenizer, corruption and generators."""

import json

from . import _core
from ._core import Error, ValidationError

__all__ = ["Encoding", "Session", "open_session", "Error", "ValidationError"]
__version__ = "0.3.0"


class Encoding(list):
    """Token ids; ``word_start`` keeps the boundaries decode needs in word mode."""

    def __init__(self, ids, word_start):
        super().__init__(ids)
        self.word_start = list(word_start)


class Session:
    def __init__(self, native):
        self._native = native

    def encode(self, text):
        ids, starts = self._native.encode(text)
        return Encoding(ids, starts)

    def decode(self, ids):
        starts = getattr(ids, "word_start", None)
        return self._native.decode(list(ids), starts)

    def corrupt(self, ids, objective, counter=0):
        """Corruption record as the CLI writes it for paragraph ``counter``."""
        return json.loads(self._native.corrupt(objective, list(ids), counter))

    def generate(self, objective, begin=0, end=None):
        """Iterator over example records for anchors in [begin, end)."""
        for line in self._native.generate(objective, begin, end):
            yield json.loads(line)

    def close(self):
        self._native.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_session(corpus=(), vocab="", clusters="", config="", seed=None):
    """Open a session. ``config`` is TOML or JSON text in the CLI's schema."""
    if isinstance(corpus, (str, bytes)) or hasattr(corpus, "__fspath__"):
        corpus = [corpus]
    native = _core.open_session(
        config=config,
        seed=seed,
        corpus=[str(p) for p in corpus],
        vocab=str(vocab),
        clusters=str(clusters),
    )
    return Session(native)
