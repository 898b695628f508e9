"""Named sub-seeds so each pipeline stage can be replayed on its own."""

import zlib

import numpy as np


def stage_seed(seed: int, stage: str, *index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), zlib.crc32(stage.encode("utf-8")), *map(int, index)])


def stage_rng(seed: int, stage: str, *index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stage_seed(seed, stage, *index)))
