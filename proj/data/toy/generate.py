"""Regenerates the toy corpus, role manifest and role-play bundle in this directory."""
import json
import random

rng = random.Random(7)

SOURCES = ["forum", "script", "chat"]
TOPICS = ["the harbour", "the old mill", "dinner plans", "the storm", "a lost key", "the market",
          "the garden", "a letter", "the train", "the library"]
STYLES = {
    "forum":  [("ada", "honestly", "!!", ["fascinating", "brilliant", "remarkable"]),
               ("bo", "well", "...", ["meh", "dull", "whatever"]),
               ("cy", "look", ".", ["precisely", "obviously", "clearly"]),
               ("dee", "hmm", "?", ["perhaps", "maybe", "possibly"]),
               ("eli", "yo", "!", ["dude", "sick", "wild"])],
    "script": [("fay", "alas", ".", ["sorrow", "fate", "tears"]),
               ("gus", "ha", "!", ["splendid", "jolly", "capital"]),
               ("hal", "sir", ".", ["duty", "honour", "orders"]),
               ("ivy", "darling", "~", ["lovely", "sweet", "charming"]),
               ("jon", "listen", "!", ["money", "deal", "profit"])],
    "chat":   [("kai", "lol", " :)", ["nice", "cool", "fun"]),
               ("lux", "ugh", " :(", ["tired", "bored", "sleepy"]),
               ("max", "ok so", ".", ["basically", "literally", "actually"]),
               ("nia", "omg", "!!!", ["amazing", "obsessed", "cute"]),
               ("oli", "tbh", ".", ["fair", "true", "valid"])],
}
TEMPLATES = ["{o}, I think {t} is {w}{p}", "{o}, did you see {t}? so {w}{p}", "{o} {w}, {w2} even{p}",
             "{o}, let's talk about {t}{p}", "{o}, {t} again? {w}{p}", "{o}, that is {w2} and {w}{p}",
             "{o}, tell me more about {t}{p}", "{o}, I would never call {t} {w}{p}"]


def utter(style, topic):
    opener, punct, words = style[1], style[2], style[3]
    return rng.choice(TEMPLATES).format(o=opener.capitalize(), t=topic, w=rng.choice(words),
                                        w2=rng.choice(words), p=punct)


convs = []
for source in SOURCES:
    speakers = STYLES[source]
    for c in range(12):
        k = 3 if c % 4 == 0 else 2
        members = [speakers[(c + j * 2) % len(speakers)] for j in range(k)]
        topic = rng.choice(TOPICS)
        turns = []
        for _ in range(6):
            for m in members:
                turns.append({"speaker_id": m[0], "text": utter(m, topic)})
        convs.append({"conversation_id": f"{source}-{c:02d}", "source_id": source, "turns": turns})

with open("conversations.jsonl", "w") as f:
    for c in convs:
        f.write(json.dumps(c) + "\n")

roles = [{"role_id": name.upper(), "speaker_id": name} for name in ["ada", "fay", "kai", "gus"]]
with open("roles.json", "w") as f:
    json.dump({"roles": roles}, f, indent=1)
    f.write("\n")

style_of = {s[0]: s for src in STYLES.values() for s in src}
bundle = []
for model, fidelity in [("echo", 1.0), ("drift", 0.5)]:
    for g in range(2):
        a, b = roles[(2 * g) % 4], roles[(2 * g + 1) % 4]
        conv = f"{model}-self-{g}"
        for me, other in [(a, b), (b, a)]:
            turns = []
            for _ in range(6):
                src = style_of[me["speaker_id"]] if rng.random() < fidelity else style_of["max"]
                turns.append(utter(src, rng.choice(TOPICS)))
            bundle.append({"model_id": model, "role_id": me["role_id"], "conversation_id": conv,
                           "counterpart_role_id": other["role_id"], "turns": turns})
with open("roleplay.jsonl", "w") as f:
    for r in bundle:
        f.write(json.dumps(r) + "\n")
