"""Reproducible random-number streams.

All randomness flows through counter-based Philox generators keyed by a
64-bit user seed, a named stream label, and a member index:

    sub-seed(seed, stream, i) = SeedSequence(entropy=seed,
                                             spawn_key=(STREAMS[stream], i))

Normal draws use ``Generator.standard_normal`` (ziggurat). This derivation is
part of the output contract: the same (seed, stream, member) always yields the
same draws, independent of how many members exist or in what order they are
generated.

Stream labels keep the truth-simulation noise, the conditional-sampler noise,
and initial-condition draws mutually independent, matching the requirement
that sampler noise be independent of the noise driving the simulated truth.
"""

import numpy as np

STREAMS = {
    "truth": 0,
    "forward": 1,
    "backward": 2,
    "init": 3,
}


def generator(seed, stream, member=0):
    """Philox generator for one (seed, stream, member) triple."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=(STREAMS[stream], int(member)))
    return np.random.Generator(np.random.Philox(ss))
