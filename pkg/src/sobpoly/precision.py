"""Global working precision and tolerances.

All arithmetic runs on mpmath ``mpf`` values under a single global context.
Sobolev moment matrices are severely ill-conditioned, so fixed doubles fail
beyond degree ~10; the default is 256 bits.  Tolerances are always explicit:
``2^(-prec + guard)`` with a 40-bit guard, scaled by the magnitude of the
data being compared.  Nothing in the library compares reals implicitly.
"""

from contextlib import contextmanager

from mpmath import mp, mpf

DEFAULT_BITS = 256
GUARD_BITS = 40
MIN_BITS = 64

mp.prec = DEFAULT_BITS


def set_precision(bits):
    """Set the global working precision (binary digits, >= 64)."""
    if bits < MIN_BITS:
        raise ValueError(f"precision must be at least {MIN_BITS} bits, got {bits}")
    mp.prec = int(bits)


def get_precision():
    return mp.prec


@contextmanager
def precision(bits):
    """Temporarily run at a different working precision."""
    old = mp.prec
    set_precision(bits)
    try:
        yield
    finally:
        mp.prec = old


def tolerance(guard=GUARD_BITS):
    """Default comparison tolerance 2^(-prec + guard) at current precision."""
    return mpf(2) ** (-mp.prec + guard)


def close(a, b, tol=None, scale=1):
    """|a - b| <= tol * max(1, |scale|); tol defaults to tolerance()."""
    if tol is None:
        tol = tolerance()
    s = abs(mpf(scale))
    if s < 1:
        s = mpf(1)
    return abs(mpf(a) - mpf(b)) <= tol * s
