# Corpus handling: tokenizing, building a vocabulary, turning dialogues into id samples.
import json
import tempfile
from pathlib import Path

from softaug.corpus import build_vocab, load_corpus, tokenize
from softaug.toydata import toy_dialogues

print(tokenize("I don't know, really."))

# a toy persona-dialogue corpus with synonym variety in the replies
train, valid, test = toy_dialogues(n_train=300, n_valid=20, n_test=20, seed=0)
d = train.dialogues[0]
print("context :", [" ".join(s) for s in d.context])
print("history :", [" ".join(s) for s in d.history])
print("response:", " ".join(d.response))

vocab = build_vocab(train)
print(len(vocab), "types; first non-reserved:", vocab.tokens[5:15])

# context segments and turns are joined with <sep>; responses end in <eos>
sample = train.encode(vocab)[0]
print(vocab.decode(sample.history))
print(vocab.decode(sample.response))

# the on-disk format is one JSON object per line
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "mini.jsonl"
    path.write_text(json.dumps({"context": ["i have a dog ."], "history": ["Hi! Any pets?"],
                                "response": "Yes, a puppy."}) + "\n")
    split = load_corpus(path)
    print(split.dialogues[0])
