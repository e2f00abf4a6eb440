"""Synthetic corpora for desk-scale experiments and tests.

``synonym_corpus`` plants interchangeable word pairs in otherwise distinct
contexts; ``toy_dialogues`` produces persona-grounded templated dialogues
whose responses mix synonyms freely.
"""

from __future__ import annotations

import numpy as np

from .corpus import CorpusSplit, Dialogue

_SYN_FILLERS = ("i", "think", "you", "we", "it", "is", "was", "really", "so", "very",
                "that", "this", "my", "your", "just", "also", "still", "then")


def synonym_corpus(n_pairs: int = 20, n_sentences: int = 5000, seed: int = 0):
    """Sentences where each planted pair shares a private set of context words.

    Returns ``(split, pairs)`` with ``pairs`` a list of ``(word_a, word_b)``.
    """
    rng = np.random.default_rng(seed)
    pairs = [(f"syna{i}", f"synb{i}") for i in range(n_pairs)]
    topic_words = [[f"ctx{i}w{j}" for j in range(6)] for i in range(n_pairs)]
    dialogues = []
    for _ in range(n_sentences):
        c = int(rng.integers(n_pairs))
        word = pairs[c][int(rng.integers(2))]
        left = list(rng.choice(topic_words[c], size=2, replace=False))
        right = list(rng.choice(topic_words[c], size=2, replace=False))
        filler = list(rng.choice(_SYN_FILLERS, size=2))
        sent = filler[:1] + left + [word] + right + filler[1:]
        dialogues.append(Dialogue((), (tuple(sent),), ()))
    return CorpusSplit(dialogues, tag="train"), pairs


# topic -> (persona template, questions, entity groups); each group is
# (synonyms, descriptors) where descriptors only ever co-occur with that group
_TOPICS = {
    "pets": ("i have a {e} .",
             ["do you have any pets ?", "what animal lives with you ?", "tell me about your pets ."],
             [(["dog", "puppy"], ["barks", "fetch", "leash"]),
              (["cat", "kitty"], ["purrs", "yarn", "whiskers"]),
              (["bird", "parrot"], ["sings", "feathers", "cage"]),
              (["fish", "goldfish"], ["swims", "tank", "bubbles"])]),
    "food": ("my favorite food is {e} .",
             ["what do you like to eat ?", "what is your favorite food ?", "are you hungry ?"],
             [(["pizza", "flatbread"], ["cheese", "oven", "slices"]),
              (["pasta", "noodles"], ["sauce", "boiled", "forks"]),
              (["burgers", "sandwiches"], ["grill", "buns", "ketchup"]),
              (["sushi", "sashimi"], ["wasabi", "rice", "chopsticks"])]),
    "work": ("i work as a {e} .",
             ["what do you do for a living ?", "what is your job ?", "where do you work ?"],
             [(["teacher", "tutor"], ["students", "lessons", "homework"]),
              (["doctor", "physician"], ["patients", "clinic", "medicine"]),
              (["chef", "cook"], ["kitchen", "recipes", "knives"]),
              (["pilot", "aviator"], ["planes", "airport", "flights"])]),
    "sports": ("i enjoy playing {e} .",
               ["do you play any sports ?", "what do you do for fun ?", "do you like sports ?"],
               [(["soccer", "football"], ["goals", "kick", "cleats"]),
                (["tennis", "squash"], ["racket", "court", "serve"]),
                (["basketball", "hoops"], ["dunk", "dribble", "rebounds"]),
                (["golf", "golfing"], ["clubs", "tee", "caddie"])]),
    "music": ("i listen to {e} music .",
              ["what music do you like ?", "do you like music ?", "what do you listen to ?"],
              [(["rock", "metal"], ["guitar", "drums", "loud"]),
               (["jazz", "blues"], ["saxophone", "trumpet", "smooth"]),
               (["classical", "orchestral"], ["violin", "piano", "symphony"]),
               (["rap", "hiphop"], ["rhymes", "beats", "lyrics"])]),
    "travel": ("i like to travel to {e} .",
               ["do you like to travel ?", "where do you go on vacation ?", "any travel plans ?"],
               [(["paris", "france"], ["eiffel", "croissants", "louvre"]),
                (["tokyo", "japan"], ["temples", "ramen", "trains"]),
                (["rome", "italy"], ["colosseum", "gelato", "vatican"]),
                (["london", "england"], ["tea", "rain", "museums"])]),
    "books": ("i read {e} books .",
              ["do you like reading ?", "what books do you read ?", "read anything good lately ?"],
              [(["mystery", "detective"], ["clues", "crime", "suspects"]),
               (["fantasy", "magic"], ["dragons", "wizards", "quests"]),
               (["history", "historical"], ["wars", "kings", "empires"]),
               (["romance", "romantic"], ["couples", "kisses", "weddings"])]),
    "vehicles": ("i drive a {e} .",
                 ["how do you get around ?", "do you have a car ?", "how do you commute ?"],
                 [(["truck", "pickup"], ["haul", "tow", "cargo"]),
                  (["bike", "bicycle"], ["pedal", "helmet", "trails"]),
                  (["van", "minivan"], ["seats", "family", "sliding"]),
                  (["scooter", "moped"], ["zip", "traffic", "parking"])]),
}
_ANSWERS = [
    "i {love} my {e} , the {d} is {good} .",
    "my {e} is {good} , i {love} the {d} .",
    "yes , {e} and {d} are {good} .",
    "i {love} {e} because of the {d} .",
    "the {d} makes {e} so {good} .",
]
_LOVE = ["love", "adore", "enjoy", "like", "cherish"]
_GOOD = ["great", "awesome", "amazing", "wonderful", "nice", "fantastic", "lovely", "fun"]
_FOLLOW_UPS = ["what about you ?", "and you ?", "do you like it too ?", "how about yourself ?",
               "have you tried it ?", "what do you think ?", "tell me about yours ."]
_GREETINGS = ["hi !", "hello !", "hey there .", "good morning .", "hi , how are you ?"]


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]


def _dialogue(rng: np.random.Generator, topics: list[str]) -> Dialogue:
    t = int(rng.integers(len(topics)))
    persona, questions, groups = _TOPICS[topics[t]]
    synonyms, descriptors = _pick(rng, groups)
    context = [persona.format(e=_pick(rng, synonyms))]
    history = []
    if rng.random() < 0.5:
        history.append(_pick(rng, _GREETINGS))
    history.append(_pick(rng, questions))
    # the reply may name the entity with either synonym and any of its descriptors
    answer = _pick(rng, _ANSWERS).format(
        e=_pick(rng, synonyms), d=_pick(rng, descriptors), love=_pick(rng, _LOVE), good=_pick(rng, _GOOD))
    if rng.random() < 0.5:
        answer += " " + _pick(rng, _FOLLOW_UPS)
    return Dialogue.from_text(context, history, answer)


def toy_dialogues(n_train: int = 2000, n_valid: int = 200, n_test: int = 200, seed: int = 0):
    """Train/valid/test splits of templated persona dialogues (vocabulary ~200)."""
    rng = np.random.default_rng(seed)
    topics = sorted(_TOPICS)
    make = lambda n: [_dialogue(rng, topics) for _ in range(n)]  # noqa: E731
    return (CorpusSplit(make(n_train), "train"), CorpusSplit(make(n_valid), "valid"),
            CorpusSplit(make(n_test), "test"))
