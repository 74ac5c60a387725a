"""Counter-based noise for coupled simulation arms.

Every random draw used by the simulator is a pure function of the tuple
``(seed, subject, variable, time, slot)``.  Nothing is stateful: there is
no cursor to advance and no draw order to preserve, so two simulations
that share a seed produce bit-identical noise for every cell regardless
of policy, chunking or thread schedule.  This is what makes counterfactual
arms couple exactly: an intervention changes values downstream of the
intervened cell, never the noise.

The mixer is a SplitMix64-style finalizer applied to a per-stream key.
``slot`` distinguishes multiple draws consumed for the same cell (for
example one Gumbel variate per candidate category).  Slots below
:data:`RULE_SLOT` are reserved for samplers; transition rules use
``RULE_SLOT + k`` for their own decisions so the two never collide.
"""

from __future__ import annotations

import hashlib

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtri

__all__ = ["NoiseStream", "NoiseDraw", "derive_noise", "RULE_SLOT"]

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# First slot index reserved for transition-rule decisions (stay/redraw
# coins, raise draws, ...).  Sampler-internal draws use slots below this.
RULE_SLOT = 64


def _finalize_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _finalize_array(z: NDArray[np.uint64]) -> NDArray[np.uint64]:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def _variable_tag(name: str) -> int:
    """Stable 64-bit tag for a variable name (independent of declaration
    order, so renumbering variables in a config never shifts noise)."""
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _to_unit(z: NDArray[np.uint64]) -> NDArray[np.float64]:
    # 53 mantissa bits, offset to the open interval (0, 1) so inverse-CDF
    # transforms never hit an infinity.
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54


class NoiseStream:
    """Vectorized keyed noise source for one simulation seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._seed_hash = _finalize_int((self.seed & _MASK) ^ _GOLDEN)
        self._key_cache: dict[tuple[str, int, int], int] = {}

    def _stream_key(self, variable: str, t: int, slot: int) -> int:
        cached = self._key_cache.get((variable, t, slot))
        if cached is not None:
            return cached
        h = self._seed_hash
        h = _finalize_int(h ^ (_variable_tag(variable) * _MIX1))
        h = _finalize_int(h ^ ((t & _MASK) * _MIX2))
        h = _finalize_int(h ^ ((slot & _MASK) * _GOLDEN))
        self._key_cache[(variable, t, slot)] = h
        return h

    def uniform(
        self, variable: str, t: int, slot: int, subjects: NDArray[np.integer]
    ) -> NDArray[np.float64]:
        """Uniform(0, 1) draws keyed by (seed, subject, variable, t, slot)."""
        key = self._stream_key(variable, t, slot)
        z = np.asarray(subjects, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = z * np.uint64(_GOLDEN) + np.uint64(key)
        return _to_unit(_finalize_array(z))

    def normal(
        self, variable: str, t: int, slot: int, subjects: NDArray[np.integer]
    ) -> NDArray[np.float64]:
        """Standard normal draws via the inverse CDF of a keyed uniform."""
        return ndtri(self.uniform(variable, t, slot, subjects))

    def gumbel(
        self, variable: str, t: int, subjects: NDArray[np.integer], n_classes: int
    ) -> NDArray[np.float64]:
        """Matrix of standard Gumbel draws, one column per candidate class.

        Column ``j`` uses slot ``j``, so the draw for a given class is the
        same whichever subset of classes a caller considers.
        """
        cols = [
            -np.log(-np.log(self.uniform(variable, t, j, subjects)))
            for j in range(n_classes)
        ]
        return np.column_stack(cols)


class NoiseDraw:
    """Scalar view of one (subject, variable, t) cell of a stream."""

    def __init__(self, stream: NoiseStream, subject: int, variable: str, t: int):
        self._stream = stream
        self._subject = np.array([subject], dtype=np.uint64)
        self._variable = variable
        self._t = t

    def uniform(self, slot: int = 0) -> float:
        return float(self._stream.uniform(self._variable, self._t, slot, self._subject)[0])

    def normal(self, slot: int = 0) -> float:
        return float(self._stream.normal(self._variable, self._t, slot, self._subject)[0])

    def gumbel(self, n_classes: int) -> NDArray[np.float64]:
        return self._stream.gumbel(self._variable, self._t, self._subject, n_classes)[0]


def derive_noise(seed: int, subject: int, variable: str, t: int) -> NoiseDraw:
    """Noise for one simulation cell.

    The draw depends only on the arguments; in particular it does not
    depend on the policy arm, on other variables' values, or on how many
    draws other cells consumed.
    """
    return NoiseDraw(NoiseStream(seed), subject, variable, t)
