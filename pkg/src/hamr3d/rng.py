"""Counter-based random streams for reproducible, shard-independent noise.

Every grain owns a Philox stream keyed by (run seed, grain id); the stream
position is addressed by the global step index through the Philox counter.
Results are therefore identical no matter how grains are distributed over
chunks, processes, or threads, and a chunk can be regenerated in isolation.
"""

from __future__ import annotations

import numpy as np

_NOISE_DTYPE = np.float32


def _keyed_state(template_state: dict, seed: int, grain_id: int,
                 step0: int) -> dict:
    st = template_state
    st["state"]["key"][0] = np.uint64(seed)
    st["state"]["key"][1] = np.uint64(grain_id)
    st["state"]["counter"][:] = (0, 0, 0, np.uint64(step0))
    st["buffer_pos"] = 4  # discard any buffered words
    st["has_uint32"] = 0
    st["uinteger"] = 0
    return st


def grain_normals(seed: int, grain_id: int, step0: int, n_steps: int,
                  n_vars: int = 6, out: np.ndarray | None = None) -> np.ndarray:
    """Standard normals for one grain, steps [step0, step0 + n_steps).

    The draw depends only on (seed, grain_id, step0): the Philox counter is
    positioned from step0 alone.  Callers must request aligned blocks (same
    step0 partitioning) to see identical values.
    """
    bg = np.random.Philox(key=[np.uint64(seed), np.uint64(grain_id)],
                          counter=[0, 0, 0, np.uint64(step0)])
    gen = np.random.Generator(bg)
    if out is None:
        return gen.standard_normal((n_steps, n_vars), dtype=_NOISE_DTYPE)
    gen.standard_normal(out=out, dtype=_NOISE_DTYPE)
    return out


def block_normals(seed: int, grain_ids: np.ndarray, step0: int, n_steps: int,
                  n_vars: int = 6) -> np.ndarray:
    """Noise block of shape (n_steps, n_grains, n_vars) from per-grain streams.

    One Philox bit generator is re-keyed in place per grain; the resulting
    values are identical to constructing a fresh keyed generator per grain.
    """
    n = len(grain_ids)
    out = np.empty((n, n_steps, n_vars), dtype=_NOISE_DTYPE)
    bg = np.random.Philox(key=[0, 0])
    gen = np.random.Generator(bg)
    st = bg.state
    for i, gid in enumerate(grain_ids):
        bg.state = _keyed_state(st, seed, int(gid), step0)
        gen.standard_normal(out=out[i], dtype=_NOISE_DTYPE)
    # (grain, step, var) -> (step, grain, var) layout for the kernel
    return np.ascontiguousarray(out.transpose(1, 0, 2))


def spawn_seed(base_seed: int, *indices: int) -> int:
    """Derive a child seed for an independent run (media sampling, repeats)."""
    ss = np.random.SeedSequence([int(base_seed), *[int(i) for i in indices]])
    return int(ss.generate_state(1, np.uint64)[0])
