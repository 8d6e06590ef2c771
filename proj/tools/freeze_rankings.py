#!/usr/bin/env python3
"""Regenerate tests/fixtures/frozen_rankings.json.

Independent re-implementation of the offline relation ranker: hashed
character-trigram counts (FNV-1a 32, 4096 buckets) over the lowercased,
space-padded text, cosine similarity against the normalized predicate name.
Predicates come from a plain scan of the N-Triples fixture, both edge
directions, label predicate excluded.
"""

import argparse
import json
import math
import re
from pathlib import Path

RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
KG = "http://example.org/kg/"
DIMS = 4096

CASES = [
    ("founded", None, KG + "Intel"),
    ("spouse", KG + "Michelle_Obama", KG + "Barack_Obama"),
    ("first movie released", KG + "Harry_Potter", None),
    ("author", KG + "Harry_Potter", None),
    ("born in", KG + "Barack_Obama", None),
    ("born in", KG + "J._K._Rowling", None),
    ("directed by", KG + "Harry_Potter_and_the_Chamber_of_Secrets_film", None),
    ("wrote", None, KG + "paper/conversational-qa-agents"),
    ("published in", KG + "paper/conversational-qa-agents", None),
    ("published in year", KG + "paper/conversational-qa-agents", None),
    ("part of series", None, KG + "Harry_Potter_film_series"),
]

TRIPLE = re.compile(r'^<([^>]*)>\s+<([^>]*)>\s+(<[^>]*>|".*)\s*\.\s*$')


def load_edges(path):
    edges = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = TRIPLE.match(line)
        if not m:
            raise ValueError("unparsed line: " + line)
        s, p, o = m.group(1), m.group(2), m.group(3)
        obj = o[1:-1] if o.startswith("<") else None
        edges.append((s, p, obj))
    return edges


def fnv1a(data):
    h = 2166136261
    for b in data:
        h ^= b
        h = (h * 16777619) & 0xFFFFFFFF
    return h


def embed(text):
    padded = (" " + text.strip().lower() + " ").encode("utf-8")
    vec = [0.0] * DIMS
    for i in range(len(padded) - 2):
        vec[fnv1a(padded[i:i + 3]) % DIMS] += 1.0
    return vec


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return 0.0 if na == 0 or nb == 0 else dot / (na * nb)


def predicate_label(iri):
    seg = re.split(r"[/#]", iri)[-1]
    seg = re.sub(r"[_\-.]+", " ", seg)
    seg = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", seg)
    seg = re.sub(r"(?<=[A-Z])(?=[A-Z][a-z])", " ", seg)
    return " ".join(seg.lower().split())


def predicates(edges, source, target):
    out = set()
    for s, p, o in edges:
        if p == RDFS_LABEL:
            continue
        if source is not None and s != source:
            continue
        if target is not None and o != target:
            continue
        out.add(p)
    return sorted(out)


def rank(edges, relation, subject, obj):
    rel = embed(relation)
    scored = []
    for p in predicates(edges, subject, obj):
        scored.append((p, "forward", cosine(rel, embed(predicate_label(p)))))
    for p in predicates(edges, obj, subject):
        scored.append((p, "reverse", cosine(rel, embed(predicate_label(p)))))
    scored.sort(key=lambda t: (-t[2], t[0], t[1] != "forward"))
    return [{"iri": p, "direction": d, "score": s} for p, d, s in scored]


def main():
    root = Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser()
    ap.add_argument("--kg", default=root / "data/desk/desk-kg.nt")
    ap.add_argument("--out", default=root / "tests/fixtures/frozen_rankings.json")
    args = ap.parse_args()

    edges = load_edges(args.kg)
    cases = []
    for relation, subject, obj in CASES:
        cases.append({
            "relation": relation,
            "subject": subject,
            "object": obj,
            "ranking": rank(edges, relation, subject, obj),
        })
    Path(args.out).write_text(json.dumps(cases, indent=1) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
