"""Counter-based uniform random numbers keyed by (seed, row, col, sample, dim).

Each value is a pure function of its key, so the result of a render does not
depend on how pixels are split across chunks or threads.
"""
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    # splitmix64 finalizer; uint64 arithmetic wraps by design
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def pixel_keys(seed: int, rows, cols) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.uint64)
    cols = np.asarray(cols, dtype=np.uint64)
    with np.errstate(over="ignore"):
        k = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
        k = _mix(k ^ (rows * _GOLDEN + np.uint64(1)))
        return _mix(k ^ (cols * _M1 + np.uint64(2)))


def uniforms(seed: int, rows, cols, n_samples: int, n_dims: int) -> np.ndarray:
    """Uniforms in [0, 1), shape ``(len(rows), n_samples, n_dims)``."""
    keys = pixel_keys(seed, rows, cols)[:, None]
    counters = np.arange(n_samples * n_dims, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        bits = _mix(keys + (counters + np.uint64(1)) * _GOLDEN)
    vals = (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    return vals.reshape(keys.shape[0], n_samples, n_dims)
