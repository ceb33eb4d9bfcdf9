"""Shared fixtures: small hand corpora and a generated synthetic world.

The synthetic world builds a corpus whose concepts have pairwise-disjoint
topic vocabularies, a taxonomy of 6 coarse and 10 fine types over
family-structured primitives, and held-out queries whose mention surfaces
never occur in the corpus (so the surface prior cannot fire).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import pytest

from typeground.corpus import (
    ConceptTypeTable,
    Corpus,
    MentionSentence,
    QueryMention,
)


def make_sentence(sid, tokens, span, concept=None):
    return MentionSentence(
        sentence_id=sid, tokens=tuple(tokens), mention_span=span, concept=concept
    )


@pytest.fixture
def tiny_corpus() -> Corpus:
    """Three concept-bearing records: concepts A, A, B."""
    return Corpus(
        [
            make_sentence("s0", ["the", "red", "fox", "A1"], (3, 4), "A"),
            make_sentence("s1", ["a", "red", "dog", "A2"], (3, 4), "A"),
            make_sentence("s2", ["the", "blue", "bird", "B1"], (3, 4), "B"),
        ]
    )


COARSE = ["/ALPHA", "/BETA", "/GAMMA", "/DELTA", "/EPSILON", "/ZETA"]
N_SUBS = [2, 2, 2, 2, 1, 1]  # 10 fine types over 6 families


@dataclass
class World:
    corpus: Corpus
    typedef_text: str
    concept_types_text: str
    types_table: ConceptTypeTable
    queries: list[QueryMention]
    concept_family: dict[str, int]
    gold_by_family: list[frozenset[str]]


def fine_targets(family: int) -> list[str]:
    return [f"{COARSE[family]}/KIND{j + 1}" for j in range(N_SUBS[family])]


def build_world(
    seed: int = 20250811,
    n_sentences: int = 500,
    n_concepts: int = 20,
    n_queries: int = 50,
    vocab_per_concept: int = 10,
) -> World:
    rng = random.Random(seed)

    typedef_lines = []
    concept_rows = []
    gold_by_family = []
    for i, coarse in enumerate(COARSE):
        typedef_lines.append(f"{coarse} := /dom{i}/*")
        for j, fine in enumerate(fine_targets(i)):
            typedef_lines.append(f"{fine} := /dom{i}/kind{j + 1}")
        gold_by_family.append(frozenset([coarse, *fine_targets(i)]))
    typedef_text = "\n".join(typedef_lines) + "\n"

    concepts = [f"Concept_{i:02d}" for i in range(n_concepts)]
    concept_family = {c: i % len(COARSE) for i, c in enumerate(concepts)}
    for c in concepts:
        fam = concept_family[c]
        prims = [f"/dom{fam}/core"] + [f"/dom{fam}/kind{j + 1}" for j in range(N_SUBS[fam])]
        concept_rows.append(f"{c}\t{','.join(prims)}")
    concept_types_text = "\n".join(concept_rows) + "\n"

    vocab = {
        c: [f"topic{i:02d}w{k:02d}" for k in range(vocab_per_concept)]
        for i, c in enumerate(concepts)
    }

    records = []
    for i in range(n_sentences):
        c = concepts[i % n_concepts]
        ctx = rng.sample(vocab[c], 6)
        tokens = ["the", *ctx[:3], f"Entity_{concepts.index(c):02d}", *ctx[3:], "of"]
        records.append(make_sentence(f"sent{i:04d}", tokens, (4, 5), c))
    corpus = Corpus(records)

    queries = []
    for k in range(n_queries):
        fam = k % len(COARSE)
        fam_concepts = [c for c in concepts if concept_family[c] == fam]
        c = rng.choice(fam_concepts)
        other = rng.choice([x for x in concepts if concept_family[x] != fam])
        ctx = rng.sample(vocab[c], 8)
        noise = rng.sample(vocab[other], 2)
        tokens = [*ctx[:4], f"zzz{k:02d}", *ctx[4:], *noise]
        sentence = make_sentence(f"query{k:02d}", tokens, (4, 5))
        queries.append(QueryMention(sentence, gold_by_family[fam]))

    types_table = _parse_table(concept_types_text)
    return World(
        corpus=corpus,
        typedef_text=typedef_text,
        concept_types_text=concept_types_text,
        types_table=types_table,
        queries=queries,
        concept_family=concept_family,
        gold_by_family=gold_by_family,
    )


def _parse_table(text: str) -> ConceptTypeTable:
    entries = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        concept, types = line.split("\t")
        entries[concept] = frozenset(t.strip().lower() for t in types.split(","))
    return ConceptTypeTable(entries)


@pytest.fixture(scope="session")
def world() -> World:
    return build_world()


@dataclass
class WorldFiles:
    world: World
    root: object  # pathlib.Path
    corpus: str
    queries: str
    typedefs: str
    concept_types: str
    index: str
    priors: str
    reps: str


@pytest.fixture(scope="session")
def world_files(world, tmp_path_factory) -> WorldFiles:
    """The synthetic world on disk, with artifacts built through the CLI."""
    from typeground.cli import main
    from typeground.corpus import record_to_json, save_corpus

    root = tmp_path_factory.mktemp("world")
    corpus_path = root / "corpus.jsonl"
    save_corpus(world.corpus, corpus_path)
    queries_path = root / "queries.jsonl"
    with open(queries_path, "w", encoding="utf-8") as fh:
        for q in world.queries:
            fh.write(record_to_json(q.sentence, gold_types=q.gold_types) + "\n")
    typedef_path = root / "taxonomy.typedef"
    typedef_path.write_text(world.typedef_text, encoding="utf-8")
    table_path = root / "concept_types.tsv"
    table_path.write_text(world.concept_types_text, encoding="utf-8")

    index_path = root / "index.bin"
    priors_path = root / "priors.tsv"
    reps_path = root / "reps.bin"
    assert main(["build-index", "--corpus", str(corpus_path), "--out", str(index_path)]) == 0
    assert main(["build-priors", "--corpus", str(corpus_path), "--out", str(priors_path)]) == 0
    assert main(["build-reps", "--corpus", str(corpus_path), "--out", str(reps_path)]) == 0
    return WorldFiles(
        world=world,
        root=root,
        corpus=str(corpus_path),
        queries=str(queries_path),
        typedefs=str(typedef_path),
        concept_types=str(table_path),
        index=str(index_path),
        priors=str(priors_path),
        reps=str(reps_path),
    )
