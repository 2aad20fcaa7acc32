"""Counter-based random streams, one per (base seed, replica, purpose)."""

import numpy as np

NOISE_STREAM = 0
SHUFFLE_STREAM = 1


def replica_generator(base_seed: int, replica: int = 0, stream: int = NOISE_STREAM) -> np.random.Generator:
    """Independent Philox stream keyed by ``(base_seed, replica, stream)``.

    Streams for distinct keys are independent by construction, so replicas
    can run in any order or in parallel without changing their draws.
    """
    seq = np.random.SeedSequence(int(base_seed), spawn_key=(int(replica), int(stream)))
    return np.random.Generator(np.random.Philox(seq))
