"""numpy implementation of the Monte Carlo accumulation kernel.

Same contract as the compiled ``logtails._kernels.accumulate_chunk``.
"""

import math

import numpy as np


def accumulate_chunk(z, chol, center, signs, alpha, log_shift, level, upper):
    """Return ``(hits, min_logw, max_logw, s1, s2)`` for one chunk of normals."""
    y = z @ np.asarray(chol).T + center
    total = np.exp(y) @ signs
    event = total >= level if upper else total <= level
    hits = int(np.count_nonzero(event))
    if hits == 0:
        return 0, math.inf, -math.inf, 0.0, 0.0
    lw = log_shift - z[event] @ alpha
    max_lw = float(lw.max())
    d = np.exp(lw - max_lw)
    return hits, float(lw.min()), max_lw, math.fsum(d), math.fsum(d * d)
