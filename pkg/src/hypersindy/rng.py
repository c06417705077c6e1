"""Seeded random streams.

All randomness comes from numpy's counter-based Philox generator. A stream is
identified by a root seed plus a tuple of non-negative integer keys; the pair
is hashed through ``SeedSequence`` so streams with different keys are
statistically independent and reproducible on every platform. Conventions
used across the package:

* ``(seed, SIMULATE)``            one stream per simulated trajectory
* ``(seed, INIT)``                parameter initialisation
* ``(seed, TRAIN, epoch)``        shuffling for an epoch
* ``(seed, TRAIN, epoch, batch)`` encoder and mask noise for one minibatch
* ``(seed, THRESHOLD, epoch)``    prior draws for permanent thresholding
* ``(seed, SAMPLE)``              coefficient ensembles and generated trajectories
"""

from __future__ import annotations

import numpy as np

SIMULATE = 0
INIT = 1
TRAIN = 2
THRESHOLD = 3
SAMPLE = 4
BOOTSTRAP = 5


def stream(seed: int, *keys: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
