"""SplitMix64: the run RNG.

64-bit state; next(state) = state + 0x9E3779B97F4A7C15, output mixed by the
murmur-style finalizer.  Chosen because the whole algorithm fits in a dozen
lines, so an independent reimplementation (any language) reproduces every
perturbation bit for bit from the seed printed in the run summary.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Deterministic stream of uint64 / uniforms / gaussians."""

    def __init__(self, seed: int):
        self._state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)

    def next_uint64(self, count: int | None = None):
        n = 1 if count is None else int(count)
        old = self._state
        steps = (np.arange(1, n + 1, dtype=np.uint64)) * _GOLDEN
        with np.errstate(over="ignore"):
            states = old + steps
            out = _mix(states)
            self._state = old + np.uint64(n) * _GOLDEN
        return int(out[0]) if count is None else out

    def uniform(self, count: int | None = None):
        """Uniforms in [0, 1) with 53-bit resolution."""
        u = self.next_uint64(count if count is not None else 1)
        u = np.asarray(u, dtype=np.uint64)
        vals = (u >> np.uint64(11)).astype(np.float64) * (2.0**-53)
        return float(vals[0]) if count is None else vals

    def gaussian(self, count: int):
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        n = int(count)
        m = (n + 1) // 2
        u1 = self.uniform(m)
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log1p(-u1))  # u1 in [0,1): 1-u1 in (0,1]
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def complex_gaussian(self, shape):
        n = int(np.prod(shape))
        re = self.gaussian(n)
        im = self.gaussian(n)
        return (re + 1j * im).reshape(shape)
