"""Seeded random streams for the benchmark.

Every (master seed, trial, stream tag) triple gets its own PCG64 generator.
The 64-bit substream seed is ``mix64(master, trial, tag)``, computed with
numpy's ``SeedSequence`` hash, so a trial's data never depends on how many
other trials are run or in which order. Gaussian samples use Box-Muller on
the generator's uniform stream, which keeps them independent of numpy's
internal normal sampler.
"""

import numpy as np

STREAM_TAGS = {"spikes": 1, "noise": 2, "denoise": 3}


def mix64(master_seed, trial_index, tag):
    """Deterministic 64-bit seed for one substream."""
    if isinstance(tag, str):
        tag = STREAM_TAGS[tag]
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(trial_index), int(tag)])
    return int(ss.generate_state(1, np.uint64)[0])


def substream(master_seed, trial_index, tag):
    return np.random.Generator(np.random.PCG64(mix64(master_seed, trial_index, tag)))


def box_muller(rng, n):
    """``n`` standard normal samples from pairs of uniforms."""
    m = (n + 1) // 2
    u1 = rng.random(m)
    u2 = rng.random(m)
    # 1 - u1 lies in (0, 1], so the log is finite
    rad = np.sqrt(-2.0 * np.log1p(-u1))
    ang = 2.0 * np.pi * u2
    z = np.empty(2 * m)
    z[0::2] = rad * np.cos(ang)
    z[1::2] = rad * np.sin(ang)
    return z[:n]
