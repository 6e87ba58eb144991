"""Sub-seed derivation: every random stream comes from one root seed.

Stream ``k`` of root ``r`` is seeded with ``SeedSequence([r, k])``; the
streams used by the command-line pipelines are numbered below.
"""

import numpy as np

SIMULATE = 0
BOOTSTRAP = 1
MLE_STARTS = 2
REPLICAS = 3


def sub_seed(root: int, k: int) -> int:
    """A 63-bit integer seed for stream ``k`` of ``root``."""
    return int(np.random.SeedSequence([int(root), int(k)]).generate_state(1, np.uint64)[0] >> 1)
