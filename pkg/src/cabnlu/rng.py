"""Named, splittable random streams on a counter-based generator.

Every source of randomness in the package (parameter init, shuffling,
dropout masks, corpus sampling) draws from a stream derived from a root
seed plus a path of names, so runs are reproducible across platforms
and independent components never share a stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _derive_key(seed: int, path: tuple[str, ...]) -> int:
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed)).encode())
    for name in path:
        h.update(b"/")
        h.update(name.encode())
    return int.from_bytes(h.digest(), "little")


class SeedStream:
    """A point in a tree of deterministic random streams.

    ``split(*names)`` derives an independent child stream; ``generator()``
    returns a numpy Generator (Philox, counter-based) for this node.
    """

    __slots__ = ("seed", "path")

    def __init__(self, seed: int, path: tuple[str, ...] = ()):
        self.seed = int(seed)
        self.path = path

    def split(self, *names: str | int) -> "SeedStream":
        return SeedStream(self.seed, self.path + tuple(str(n) for n in names))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=_derive_key(self.seed, self.path)))

    def derived_seed(self) -> int:
        """A scalar seed for components that take plain integers."""
        return _derive_key(self.seed, self.path) % (2 ** 63)

    def __repr__(self) -> str:
        return f"SeedStream(seed={self.seed}, path={'/'.join(self.path)!r})"
