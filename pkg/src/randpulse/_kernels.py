"""Compiled inner loops for the feedback circuits.

Each kernel advances a whole block of clock bins with the exact per-bin
semantics of the matching circuit class: the output bit is computed from
state as it stood at the start of the bin, and the counter then applies
the net increment and clamps. Keeping these in one private module lets the
circuit classes stay readable while block simulation runs at native speed.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def lfsr_word_block(state, width, tap_shifts, out):
    """Fill out[i] with the word visible in bin i (before that bin's shift).

    Returns the register state after the last shift.
    """
    mask = (np.int64(1) << width) - 1
    s = np.int64(state)
    for i in range(out.size):
        out[i] = s
        fb = np.int64(0)
        for j in range(tap_shifts.size):
            fb ^= s >> tap_shifts[j]
        s = ((s << 1) & mask) | (fb & 1)
    return s


@njit(cache=True)
def divider_block(a, b, words, c0, top, out):
    """Comparator-feedback divider: z = [word < C], inc = a, dec = z AND b."""
    c = np.int64(c0)
    for i in range(a.size):
        z = np.int64(1) if words[i] < c else np.int64(0)
        out[i] = np.uint8(z)
        c += np.int64(a[i]) - (z & np.int64(b[i]))
        if c < 0:
            c = np.int64(0)
        elif c > top:
            c = top
    return c


@njit(cache=True)
def divider_counter_block(a, b, c0, top, out):
    """Divider with the comparator replaced by a zero test: z = [C > 0]."""
    c = np.int64(c0)
    for i in range(a.size):
        z = np.int64(1) if c > 0 else np.int64(0)
        out[i] = np.uint8(z)
        c += np.int64(a[i]) - (z & np.int64(b[i]))
        if c < 0:
            c = np.int64(0)
        elif c > top:
            c = top
    return c


@njit(cache=True)
def sub_counter_block(a, b, c0, top, out):
    """Pulse-inhibit subtractor: count a-pulses, spend the count to swallow
    b-pulses, pass b through only when the count is empty."""
    c = np.int64(c0)
    for i in range(a.size):
        ai = a[i]
        bi = b[i]
        o = np.uint8(0)
        if ai and bi:
            pass  # the pair cancels, no count change
        elif ai:
            if c < top:
                c += 1
            # at the top the a-pulse is lost, the one error source
        elif bi:
            if c > 0:
                c -= 1
            else:
                o = np.uint8(1)
        out[i] = o
    return c


@njit(cache=True)
def comparator_block(a, b, c0, top, half, out):
    """Saturating race counter: output is the MSB, inc = a, dec = b."""
    c = np.int64(c0)
    for i in range(a.size):
        out[i] = np.uint8(1) if c >= half else np.uint8(0)
        c += np.int64(a[i]) - np.int64(b[i])
        if c < 0:
            c = np.int64(0)
        elif c > top:
            c = top
    return c
