"""Seeded uniform random stream with exact draw accounting.

splitmix64 generator over explicit uint64 state.  The state rides in a
2-element uint64 array: slot 0 is the generator state, slot 1 counts draws,
so tests can verify how many uniforms a routine consumed (the greedy
evaluation path must consume none).

Two implementations of the same recurrence: a numba-native one (wrapping
uint64 arithmetic) and a masked pure-int one for the fallback path.  They
produce identical streams; test_rng pins that.
"""
import numpy as np

from .accel import USING_NUMBA, njit

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLD = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# uint64-typed constants so numba never promotes through signed ints
_U_GOLD = np.uint64(_GOLD)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_U_ONE = np.uint64(1)
_U_S30 = np.uint64(30)
_U_S27 = np.uint64(27)
_U_S31 = np.uint64(31)
_U_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@njit(cache=True)
def _uniform_jit(state):
    s = state[0] + _U_GOLD
    state[0] = s
    state[1] = state[1] + _U_ONE
    z = s
    z = (z ^ (z >> _U_S30)) * _U_MIX1
    z = (z ^ (z >> _U_S27)) * _U_MIX2
    z = z ^ (z >> _U_S31)
    return (z >> _U_S11) * _INV53


def _uniform_py(state):
    s = (int(state[0]) + _GOLD) & _MASK
    state[0] = s
    state[1] = int(state[1]) + 1
    z = s
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    z = z ^ (z >> 31)
    return (z >> 11) * _INV53


uniform = _uniform_jit if USING_NUMBA else _uniform_py


def new_state(seed: int) -> np.ndarray:
    """Fresh generator state; slot 1 is the draw counter, starting at 0."""
    return np.array([int(seed) & _MASK, 0], dtype=np.uint64)


class SplitMix64:
    """Thin stateful handle over the raw state array."""
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = new_state(seed)

    def uniform(self) -> float:
        return uniform(self.state)

    @property
    def position(self) -> int:
        """Number of uniforms drawn so far."""
        return int(self.state[1])
