"""Model-free encoder for tests and dry runs: vectors derived from a hash of
the input, so equal inputs give equal outputs."""

import hashlib

import numpy as np


class HashEncoder:
    def __init__(self, dim, tokens=1):
        self.dim = dim
        self.tokens = tokens
        self.calls = 0

    def _vec(self, payload):
        seed = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
        return np.random.default_rng(seed).standard_normal((self.tokens, self.dim)).astype(np.float32)

    def encode(self, items):
        self.calls += 1
        out = []
        for it in items:
            payload = it.encode("utf-8") if isinstance(it, str) else it.tobytes()
            out.append(self._vec(payload))
        return out
