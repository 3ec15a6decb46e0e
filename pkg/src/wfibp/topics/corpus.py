"""Time-stamped corpora: in-memory layout, JSONL/vocabulary I/O, pruning and word holdout."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Corpus:
    """``docs[t][i]`` is the word-id array of document ``i`` at grid time ``t``."""

    docs: list
    D: int
    vocab: list | None = None
    doc_ids: list | None = None

    def __post_init__(self):
        self.docs = [[np.asarray(d, dtype=np.int64) for d in dt] for dt in self.docs]
        for dt in self.docs:
            for d in dt:
                if d.size and (d.min() < 0 or d.max() >= self.D):
                    raise ValueError(f"word ids must lie in [0, {self.D})")
        if self.vocab is not None and len(self.vocab) != self.D:
            raise ValueError("vocabulary size does not match D")
        if self.doc_ids is None:
            self.doc_ids = [[f"{t}:{i}" for i in range(len(dt))] for t, dt in enumerate(self.docs)]

    @property
    def T1(self) -> int:
        return len(self.docs)

    @property
    def N(self) -> np.ndarray:
        return np.array([len(dt) for dt in self.docs], dtype=np.int64)

    @property
    def lengths(self) -> list:
        return [np.array([d.size for d in dt], dtype=np.int64) for dt in self.docs]

    def n_words(self) -> int:
        return int(sum(d.size for dt in self.docs for d in dt))

    def flat(self):
        """``(words, doc_index, offsets)`` over documents ordered by ``(t, i)``."""
        docs = [d for dt in self.docs for d in dt]
        words = np.concatenate(docs) if docs else np.zeros(0, np.int64)
        doc = np.repeat(np.arange(len(docs)), [d.size for d in docs])
        offsets = np.concatenate([[0], np.cumsum(self.N)])
        return words, doc, offsets

    def word_counts(self) -> np.ndarray:
        words, _, _ = self.flat()
        return np.bincount(words, minlength=self.D)


def write_jsonl(corpus: Corpus, path, vocab_path=None) -> None:
    path = Path(path)
    with path.open("w") as f:
        for t, dt in enumerate(corpus.docs):
            for i, d in enumerate(dt):
                rec = {"time_index": t, "doc_id": corpus.doc_ids[t][i], "word_ids": d.tolist()}
                f.write(json.dumps(rec) + "\n")
    if vocab_path is not None:
        counts = corpus.word_counts()
        vocab = corpus.vocab or [f"w{j}" for j in range(corpus.D)]
        with Path(vocab_path).open("w") as f:
            f.write("id\ttoken\tcorpus_count\n")
            for j, tok in enumerate(vocab):
                f.write(f"{j}\t{tok}\t{counts[j]}\n")


def read_vocab(path) -> list:
    rows = Path(path).read_text().splitlines()
    if rows and rows[0].startswith("id\t"):
        rows = rows[1:]
    vocab = []
    for n, line in enumerate(rows, 2):
        parts = line.split("\t")
        if len(parts) < 2 or not parts[0].isdigit() or int(parts[0]) != len(vocab):
            raise ValueError(f"{path}:{n}: expected '<id>\\t<token>[\\t<count>]' with consecutive ids")
        vocab.append(parts[1])
    return vocab


def read_jsonl(path, vocab_path=None, D: int | None = None) -> Corpus:
    vocab = read_vocab(vocab_path) if vocab_path is not None else None
    by_time: dict = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            t, did, w = int(rec["time_index"]), str(rec["doc_id"]), list(rec["word_ids"])
        except (ValueError, KeyError, TypeError) as e:
            raise ValueError(f"{path}:{n}: bad corpus record ({e})") from None
        by_time.setdefault(t, []).append((did, w))
    if not by_time:
        raise ValueError(f"{path}: empty corpus")
    T1 = max(by_time) + 1
    if sorted(by_time) != list(range(T1)):
        raise ValueError(f"{path}: time indices must cover 0..{T1 - 1}")
    if D is None:
        D = len(vocab) if vocab is not None else 1 + max((max(w) for v in by_time.values() for _, w in v if w), default=0)
    docs = [[np.asarray(w, dtype=np.int64) for _, w in by_time[t]] for t in range(T1)]
    ids = [[d for d, _ in by_time[t]] for t in range(T1)]
    return Corpus(docs, D, vocab, ids)


def prune_vocabulary(corpus: Corpus, min_count: int = 0, max_count: int | None = None) -> Corpus:
    """Drop words whose corpus count is below ``min_count`` or above ``max_count``; ids are compacted."""
    counts = corpus.word_counts()
    keep = counts >= min_count
    if max_count is not None:
        keep &= counts <= max_count
    remap = np.full(corpus.D, -1, dtype=np.int64)
    remap[keep] = np.arange(int(keep.sum()))
    docs = [[remap[d][remap[d] >= 0] for d in dt] for dt in corpus.docs]
    vocab = [v for v, k in zip(corpus.vocab, keep) if k] if corpus.vocab is not None else None
    return Corpus(docs, int(keep.sum()), vocab, corpus.doc_ids)


def holdout_split(corpus: Corpus, fraction: float, rng: np.random.Generator, times=None):
    """Hold out a random ``fraction`` of the words of each document (at ``times``, default all).

    Returns ``(train, test)`` sharing the document layout.
    """
    if not 0 < fraction < 1:
        raise ValueError("holdout fraction must lie in (0, 1)")
    times = range(corpus.T1) if times is None else times
    train, test = [], []
    for t, dt in enumerate(corpus.docs):
        tr, te = [], []
        for d in dt:
            if t in times and d.size:
                mask = np.zeros(d.size, bool)
                mask[rng.permutation(d.size)[: int(round(fraction * d.size))]] = True
                tr.append(d[~mask])
                te.append(d[mask])
            else:
                tr.append(d)
                te.append(d[:0])
        train.append(tr)
        test.append(te)
    return Corpus(train, corpus.D, corpus.vocab, corpus.doc_ids), Corpus(test, corpus.D, corpus.vocab, corpus.doc_ids)
