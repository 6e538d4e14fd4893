"""Shared test helpers: independent oracles and random fixture builders.

The oracles here deliberately avoid the library's own machinery — the
naive scanner compares window bytes directly, and the reference mixer is
a from-scratch rewrite of the documented hash — so that tests check the
implementation against something other than itself.
"""

from __future__ import annotations

import random

from nicsieve import Signature, SignatureSet


def naive_exact_matches(signatures, payload: bytes) -> list[tuple[int, int, str]]:
    """All-offsets byte-comparison scanner: the ground-truth oracle."""
    out = []
    for sig in signatures:
        pat = sig.pattern
        for off in range(len(payload) - len(pat) + 1):
            if payload[off : off + len(pat)] == pat:
                out.append((off, len(pat), sig.id))
    out.sort()
    return out


def reference_finalize(value: int) -> int:
    """Independent rewrite of the documented two-round finalizer."""
    value = (value ^ (value >> 33)) % 2**64
    value = (value * 0xFF51AFD7ED558CCD) % 2**64
    return (value ^ (value >> 33)) % 2**64


def reference_mix64(seed: int, data: bytes) -> int:
    """Independent rewrite of the documented byte-fold mixer."""
    state = seed % 2**64
    for byte in data:
        state = ((state ^ byte) * 0x100000001B3) % 2**64
    return reference_finalize(state)


def reference_probes(seed_a: int, seed_b: int, element: bytes, m: int,
                     k: int) -> list[int]:
    """Independent rewrite of the finalized double-hash probe sequence."""
    g1 = reference_mix64(seed_a, element)
    stride = reference_mix64(seed_b, element) | 1
    return [reference_finalize((g1 + i * stride) % 2**64) % m
            for i in range(k)]


def random_signature_set(rng: random.Random, count: int,
                         lengths: list[int] | None = None) -> SignatureSet:
    """Distinct random patterns with ids s0..s{count-1}."""
    if lengths is None:
        lengths = [rng.randint(2, 16) for _ in range(rng.randint(1, 5))]
    sigs: list[Signature] = []
    seen: set[bytes] = set()
    while len(sigs) < count:
        pattern = rng.randbytes(rng.choice(lengths))
        if pattern in seen:
            continue
        seen.add(pattern)
        sigs.append(Signature(id=f"s{len(sigs)}", pattern=pattern))
    return SignatureSet(signatures=sigs)
