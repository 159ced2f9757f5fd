"""Counter-based random streams keyed by (seed, stream index...)."""
import numpy as np

SEED_MASK = (1 << 64) - 1


def stream(seed: int, *index: int) -> np.random.Generator:
    """Philox generator determined only by ``seed`` and ``index``.

    Work items draw from their own stream so results do not depend on the
    order or the thread in which items are processed.
    """
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.Philox(ss))
