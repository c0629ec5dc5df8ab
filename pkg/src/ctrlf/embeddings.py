"""String-side word embeddings.

Two embeddings over a fixed 36-character alphabet (digits then lowercase
letters):

* ``dctow`` -- per-alphabet-channel orthonormal DCT-II of the word's
  one-hot character matrix, truncated to the first 3 low-frequency
  coefficients per channel: a 3 * 36 = 108-dim real vector.
* ``phoc`` -- pyramidal histogram of characters over 5 pyramid levels:
  a 36 * (1+2+3+4+5) = 540-dim binary vector.

Both expect labels already canonicalized by :func:`normalize_label`.
"""

from __future__ import annotations

import numpy as np
import scipy.fft

__all__ = [
    "ALPHABET",
    "CHAR_INDEX",
    "DCTOW_DIM",
    "PHOC_DIM",
    "PHOC_LEVELS",
    "EMBEDDING_DIMS",
    "normalize_label",
    "dctow",
    "phoc",
    "embed_string",
    "cosine_similarity",
]

ALPHABET = "0123456789abcdefghijklmnopqrstuvwxyz"
CHAR_INDEX = {c: i for i, c in enumerate(ALPHABET)}

DCTOW_COEFFS = 3
DCTOW_DIM = DCTOW_COEFFS * len(ALPHABET)

PHOC_LEVELS = (1, 2, 3, 4, 5)
PHOC_DIM = len(ALPHABET) * sum(PHOC_LEVELS)

EMBEDDING_DIMS = {"dctow": DCTOW_DIM, "phoc": PHOC_DIM}


def normalize_label(raw: str) -> str:
    """Lowercase and drop every character outside the alphabet."""
    return "".join(c for c in raw.lower() if c in CHAR_INDEX)


def _char_indices(word: str) -> list[int]:
    if not word:
        raise ValueError("cannot embed an empty word")
    try:
        return [CHAR_INDEX[c] for c in word]
    except KeyError as e:
        raise ValueError(
            f"character {e.args[0]!r} outside the alphabet; run normalize_label first"
        ) from None


def dctow(word: str) -> np.ndarray:
    """Embed a word as truncated DCT coefficients of its one-hot matrix.

    The orthonormal DCT-II runs along the character-position axis
    independently for each alphabet channel; the first 3 coefficients per
    channel are kept (zero-padded for words shorter than 3 characters) and
    flattened channel-major.
    """
    idx = _char_indices(word)
    m = len(idx)
    onehot = np.zeros((m, len(ALPHABET)), dtype=np.float64)
    onehot[np.arange(m), idx] = 1.0
    coeffs = scipy.fft.dct(onehot, type=2, norm="ortho", axis=0)
    kept = np.zeros((DCTOW_COEFFS, len(ALPHABET)), dtype=np.float64)
    kept[: min(m, DCTOW_COEFFS)] = coeffs[:DCTOW_COEFFS]
    return kept.T.ravel().copy()


def phoc(word: str) -> np.ndarray:
    """Embed a word as a binary pyramidal histogram of characters.

    Character i of an m-character word occupies [i/m, (i+1)/m]; its bit in
    region j of pyramid level l (region [j/l, (j+1)/l]) is set when the
    occupancy/region overlap is at least half the character's width, ties
    counting as inside. The overlap test is evaluated in exact integer
    arithmetic. Blocks are concatenated level-major, then region, then
    alphabet index.
    """
    idx = _char_indices(word)
    m = len(idx)
    vec = np.zeros(PHOC_DIM, dtype=np.float64)
    offset = 0
    for level in PHOC_LEVELS:
        for region in range(level):
            # Intervals scaled by m*level so the >= 0.5 rule is exact:
            # char i -> [i*level, (i+1)*level], region -> [region*m, (region+1)*m].
            r0, r1 = region * m, (region + 1) * m
            for i, ch in enumerate(idx):
                overlap = min((i + 1) * level, r1) - max(i * level, r0)
                if 2 * overlap >= level:
                    vec[offset + region * len(ALPHABET) + ch] = 1.0
        offset += level * len(ALPHABET)
    return vec


def embed_string(word: str, kind: str) -> np.ndarray:
    """Embed a normalized word with the named embedding."""
    if kind == "dctow":
        return dctow(word)
    if kind == "phoc":
        return phoc(word)
    raise ValueError(f"unknown embedding kind {kind!r}")


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two nonzero vectors."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine similarity undefined for a zero vector")
    return float(u @ v / (nu * nv))
