"""Closed-form entropy kernels for a biallelic locus.

All kernels accept either a scalar frequency (returning ``float``) or an
array of frequencies (returning an ``ndarray`` of the same shape).  Entropy
is measured in nats.

Frequencies are canonicalised through their major allele ``M = max(p, 1-p)``
with the minor taken as ``1 - M`` (exact in binary floating point), so every
kernel is bit-for-bit symmetric under ``p -> 1 - p``.  A side effect is that
a frequency within about 2**-53 of 0 or 1 is treated as monomorphic, and
very small frequencies keep only part of their precision; neither happens
for frequencies built from realistic allele counts.
"""

import math

import numpy as np

from .errors import DomainError

#: Below this distance from q = 1 the Shannon limit replaces the closed form.
LIMIT_EPS = 1e-9


def check_q(q):
    q = float(q)
    if not q > 0 or not math.isfinite(q):
        raise DomainError(f"entropy order q must be a finite positive number, got {q!r}")
    return q


def _check_p_scalar(p):
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"allele frequency must lie in [0, 1], got {p!r}")
    return p


def _check_p_array(p):
    p = np.asarray(p, dtype=np.float64)
    if p.size and not (np.all(p >= 0.0) and np.all(p <= 1.0)):
        raise DomainError("allele frequencies must lie in [0, 1]")
    return p


def _split(p):
    major = p if p >= 0.5 else 1.0 - p
    return 1.0 - major, major


def _shannon_scalar(p):
    minor, major = _split(p)
    if minor == 0.0:
        return 0.0
    return -(minor * math.log(minor) + major * math.log(major))


def _tsallis_scalar(p, q):
    if abs(q - 1.0) < LIMIT_EPS:
        return _shannon_scalar(p)
    minor, major = _split(p)
    if minor == 0.0:
        return 0.0
    # p**q + (1-p)**q - 1 rewritten with expm1 so it stays accurate near q = 1
    qm1 = q - 1.0
    gap = minor * math.expm1(qm1 * math.log(minor)) + major * math.expm1(qm1 * math.log(major))
    return -gap / qm1


def shannon_bern(p):
    """Shannon entropy ``-p ln p - (1-p) ln(1-p)`` with ``0 ln 0 = 0``."""
    if np.ndim(p) == 0:
        return _shannon_scalar(_check_p_scalar(p))
    p = _check_p_array(p)
    major = np.where(p >= 0.5, p, 1.0 - p)
    minor = 1.0 - major
    out = np.zeros_like(p)
    poly = minor > 0.0
    m, big = minor[poly], major[poly]
    out[poly] = -(m * np.log(m) + big * np.log(big))
    return out


def tsallis_bern(p, q):
    """Tsallis entropy of order ``q`` of a Bernoulli(p) variable.

    ``(1 - p**q - (1-p)**q) / (q - 1)`` for ``q != 1``; the Shannon entropy
    is substituted when ``|q - 1| < LIMIT_EPS``.

    >>> tsallis_bern(0.5, 2)
    0.5
    """
    q = check_q(q)
    if np.ndim(p) == 0:
        return _tsallis_scalar(_check_p_scalar(p), q)
    p = _check_p_array(p)
    if abs(q - 1.0) < LIMIT_EPS:
        return shannon_bern(p)
    major = np.where(p >= 0.5, p, 1.0 - p)
    minor = 1.0 - major
    out = np.zeros_like(p)
    poly = minor > 0.0
    m, big = minor[poly], major[poly]
    qm1 = q - 1.0
    gap = m * np.expm1(qm1 * np.log(m)) + big * np.expm1(qm1 * np.log(big))
    out[poly] = -gap / qm1
    return out


def heterozygosity(p):
    """Expected heterozygosity ``2p(1-p)``; equals ``tsallis_bern(p, 2)``."""
    if np.ndim(p) == 0:
        minor, major = _split(_check_p_scalar(p))
        return 2.0 * minor * major
    p = _check_p_array(p)
    major = np.where(p >= 0.5, p, 1.0 - p)
    return 2.0 * (1.0 - major) * major
