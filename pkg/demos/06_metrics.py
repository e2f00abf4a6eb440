# Diversity and overlap metrics on hand-sized inputs.
from softaug.metrics import bleu, dist_n, ent_n, evaluate, nist4, sen_n

responses = [["a", "b"], ["a", "c"]]
print("Dist-1", dist_n(responses, 1))  # 3 distinct of 4
print("Ent-1 ", ent_n(responses, 1))   # nats
print("Sen-1 ", sen_n([["a", "a"], ["b", "c"]], 1))

cand = [["the", "cat", "sat", "on", "the", "mat"]]
ref = [["the", "cat", "is", "on", "the", "mat"]]
print("BLEU  ", bleu(cand, ref), "=", (1 / 32) ** 0.25)
print("NIST-4", nist4(cand, ref))
print("self  ", bleu(ref, ref))

print(evaluate(cand, ref, ppl=12.0).table())
