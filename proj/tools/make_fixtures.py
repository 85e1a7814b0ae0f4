#!/usr/bin/env python3
"""Regenerates the toy pipeline corpus under tests/fixtures/pipeline."""

import argparse
import json
import random
import re
import struct
from pathlib import Path

TOPICS = {
    0: ("wedding", ["wedding", "bride", "dress", "ceremony", "guests", "reception", "venue", "groom"]),
    1: ("money", ["money", "rent", "loan", "paid", "bills", "debt", "salary", "budget"]),
    2: ("family", ["mom", "dad", "sister", "brother", "parents", "kids", "grandma", "cousin"]),
}
FILLER = ("the a to and of in it that was for on with as at this but they have from or one had by "
          "what all were when we there can an your which their said if do will each about how up out "
          "them then she many some so these would other into has more her two like him see time could "
          "no make than first been its who now people my made over did down only way find use may water "
          "long little very after words called just where most know get through back much before go good "
          "new write our used me man too any day same right look think also around another came come work "
          "three word must because does part even place well such here take why things help put years "
          "different away again off went old number great tell men say small every found still between "
          "name should home big give air line set own under read last never us left end along while might "
          "next sound below saw something thought both few those always looked show large often together "
          "asked house world going want school important until form food keep children feet land side "
          "without once animals life enough took sometimes four head above began almost live page "
          "got earth need far hand high year light parts country let night following picture "
          "being study second eyes soon times story since white days ever paper hard near sentence "
          "better best across during today others however sure means knew its try told young miles sun ways "
          "thing whole hear example heard several change answer room sea against top turned learn point "
          "city play toward five using himself usually").split()
YTA_WORDS = ["cruel", "selfish", "rude", "entitled", "petty", "mean"]
NTA_WORDS = ["fair", "reasonable", "kind", "generous", "honest", "respectful"]
CATEGORIES = {
    "art": ["painting", "drawing", "sculpture"],
    "music": ["guitar", "piano", "drums"],
    "gaming": ["gaming", "pcgaming", "boardgames"],
}
TAGS = {
    "cruel": "Judgment: Cruelty;Evaluation: Good/Bad",
    "mean": "Judgment: Cruelty;Evaluation: Good/Bad",
    "selfish": "Judgment: Selfishness",
    "entitled": "Judgment: Selfishness",
    "petty": "Judgment: Selfishness;Evaluation: Good/Bad",
    "rude": "Politeness",
    "respectful": "Politeness",
    "fair": "Evaluation: Good/Bad;Judgment: Fairness",
    "reasonable": "Judgment: Fairness",
    "honest": "Judgment: Honesty",
    "kind": "Judgment: Kindness;Evaluation: Good/Bad",
    "generous": "Judgment: Kindness",
    "she": "Pronouns",
    "he": "Pronouns",
    "they": "Pronouns",
    "you": "Pronouns",
    "with": "Prepositions",
    "to": "Prepositions",
    "not": "Negation",
    "very": "Degree",
    "really": "Degree",
}
WORD = re.compile(r"[A-Za-z0-9'\x80-\xff]+|[^\sA-Za-z0-9'\x80-\xff]")


def tokenize(text):
    return WORD.findall(text)


def post_body(rng, topic, gender):
    words = TOPICS[topic][1]
    marker = {"f": f"I [{rng.randint(19, 45)}F]", "m": f"I ({rng.randint(19, 45)}m)", None: "I"}[gender]
    body = [marker, "need", "advice", "about", "the"]
    body += rng.choices(words, k=12) + rng.choices(FILLER, k=10)
    return "AITA for this? " + " ".join(body) + "."


def comment_body(rng, verdict, n_tokens, negate):
    signal = YTA_WORDS if verdict == "YTA" else NTA_WORDS
    words = rng.choices(FILLER, k=n_tokens)
    for _ in range(2):
        words[rng.randrange(len(words))] = rng.choice(signal)
    if negate:
        i = rng.randrange(1, len(words))
        words[i - 1] = "not"
        words[i] = rng.choice(signal)
    return f"{verdict}. " + " ".join(words) + "."


def conllu_for(comment_id, text):
    tokens = tokenize(text)
    lines = [f"# instance_id = {comment_id}"]
    n = len(tokens)
    for i, tok in enumerate(tokens, start=1):
        if i == n:
            head, rel = 0, "root"
        elif tok == "not":
            head, rel = i + 1, "neg"
        elif tok == ".":
            head, rel = n, "punct"
        else:
            head, rel = i + 1, "dep" if i % 3 else "amod"
        lines.append(f"{i}\t{tok}\t{tok.lower()}\t_\t_\t_\t{head}\t{rel}\t_\t_")
    return "\n".join(lines) + "\n\n"


def write_emb_static(path, words, dim, rng):
    with open(path, "wb") as f:
        f.write(b"EMB1" + struct.pack("<IBII", 1, 0, dim, len(words)))
        for w in words:
            raw = w.encode("utf-8")
            f.write(struct.pack("<I", len(raw)) + raw)
            f.write(struct.pack(f"<{dim}f", *[rng.gauss(0.0, 0.5) for _ in range(dim)]))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "tests/fixtures/pipeline")
    ap.add_argument("--posts", type=int, default=24)
    ap.add_argument("--comments-per-post", type=int, default=12)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)

    base_time = 1_600_000_000
    posts, comments, conllu, histories = [], [], [], []
    commenters = [f"u{i:03d}" for i in range(60)]
    interest = {u: rng.choice(sorted(CATEGORIES)) for u in commenters}
    for p in range(args.posts):
        topic = p % len(TOPICS)
        gender = ["f", "m", "f", None][(p // 3) % 4]
        pid = f"p{p:03d}"
        posts.append({"id": pid, "kind": "post", "author_id": f"op{p}", "body": post_body(rng, topic, gender),
                      "score": rng.randint(50, 5000), "created_utc": base_time + p * 3600})
        for c in range(args.comments_per_post):
            cid = f"{pid}c{c:02d}"
            verdict = "YTA" if (p + c) % 2 else "NTA"
            kind = c % 12
            score = rng.randint(101, 3000)
            flair = "Partassipant"
            if kind == 10:
                verdict = "ESH"
            if kind == 11 and p % 2:
                score = 50
            text = comment_body(rng, verdict, rng.randint(24, 60), negate=(c % 5 == 0))
            author = rng.choice(commenters)
            comments.append({"id": cid, "kind": "comment", "parent_id": pid, "author_id": author, "body": text,
                             "score": score, "author_flair": flair, "created_utc": base_time + p * 3600 + c * 60})
            conllu.append(conllu_for(cid, text))
        # one nested reply per post, never eligible
        comments.append({"id": f"{pid}r", "kind": "comment", "parent_id": f"{pid}c00", "author_id": "u000",
                         "body": "NTA " + " ".join(rng.choices(FILLER, k=30)), "score": 500,
                         "author_flair": "Partassipant", "created_utc": base_time})

    for u in commenters:
        for k in range(rng.randint(2, 6)):
            cat = interest[u] if k % 3 else rng.choice(sorted(CATEGORIES))
            histories.append({"commenter_id": u, "subreddit": rng.choice(CATEGORIES[cat]),
                              "timestamp": base_time + rng.randint(-80, 80) * 86400})
        histories.append({"commenter_id": u, "subreddit": "cooking", "timestamp": base_time - 300 * 86400})

    def dump_jsonl(name, rows):
        with open(out / name, "w") as f:
            for r in rows:
                f.write(json.dumps(r, sort_keys=True) + "\n")

    dump_jsonl("posts.jsonl", posts)
    dump_jsonl("comments.jsonl", comments)
    dump_jsonl("histories.jsonl", histories)
    (out / "parses.conllu").write_text("".join(conllu))
    (out / "moral_lexicon.txt").write_text("\n".join(YTA_WORDS + NTA_WORDS) + "\n")
    topics = []
    for tid, (name, words) in TOPICS.items():
        probs = {w: 0.08 for w in words}
        probs.update({w: 0.001 for w in FILLER[:40]})
        topics.append({"topic_id": tid, "name": name, "word_probs": probs})
    (out / "topics.json").write_text(json.dumps({"topics": topics}, indent=1, sort_keys=True) + "\n")
    cmap = {s: cat for cat, subs in CATEGORIES.items() for s in subs}
    (out / "category_map.json").write_text(json.dumps(cmap, indent=1, sort_keys=True) + "\n")
    (out / "tag_lexicon.tsv").write_text("".join(f"{w}\t{c}\n" for w, c in sorted(TAGS.items())))
    vocab = sorted(set(FILLER + YTA_WORDS + NTA_WORDS + list(TAGS) + ["nta", "yta", "esh"]))
    write_emb_static(out / "static.emb", vocab, 16, rng)


if __name__ == "__main__":
    main()
