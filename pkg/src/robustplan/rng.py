"""Counter-based random streams.

Every stochastic quantity in the package is drawn from a Philox stream whose
key is hashed from ``(seed, purpose, *ids)`` and whose counter encodes the
trial index.  A trial therefore sees the same numbers no matter which other
trials run, or in which order, which keeps parallel evaluation reproducible.
"""

from __future__ import annotations

import numpy as np

# stream purposes
MILESTONES = 1
EDGE_TRIALS = 2
QUERY_TRIALS = 3
POLICY_RUNS = 4
MDP_MILESTONES = 5
MDP_STARTS = 6
MDP_TRIALS = 7


def check_seed(seed) -> int:
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream_key(seed: int, *ids: int) -> np.ndarray:
    """Hash a seed and integer labels into a 128-bit Philox key."""
    ss = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=tuple(int(i) for i in ids))
    return ss.generate_state(2, np.uint64)


def trial_generator(key: np.ndarray, trial: int) -> np.random.Generator:
    """Generator for one trial; trial ``t`` starts at counter block ``t * 2**128``."""
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, int(trial), 0]))


def trial_generators(key: np.ndarray, trials):
    """Yield a generator positioned at each trial's block in turn.

    Bit-identical to :func:`trial_generator` but reuses one bit generator,
    so each yielded generator must be used up before the next is requested.
    """
    bitgen = np.random.Philox(key=key)
    gen = np.random.Generator(bitgen)
    for t in trials:
        bitgen.state = {
            "bit_generator": "Philox",
            "state": {"counter": np.array([0, 0, int(t), 0], dtype=np.uint64), "key": key},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        yield gen


def derive(seed: int, *ids: int) -> np.random.Generator:
    """A generator for the stream labelled ``(seed, *ids)``."""
    return trial_generator(stream_key(seed, *ids), 0)
