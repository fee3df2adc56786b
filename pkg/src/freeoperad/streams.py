"""Counter-based random streams keyed by (seed, *path).

Each particle, box or optimisation step draws from its own Philox stream, so
results do not depend on the order or process in which work is executed.
"""

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
