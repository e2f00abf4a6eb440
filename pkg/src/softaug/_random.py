"""Named, independently reproducible random streams derived from one run seed."""

import zlib

import numpy as np

STREAMS = ("init", "selection", "shuffle", "negatives")


def stream(seed: int, name: str) -> np.random.Generator:
    if name not in STREAMS:
        raise ValueError(f"unknown random stream {name!r}")
    # crc32 keeps the mapping stable across interpreter runs (str hash is salted)
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("ascii"))])
