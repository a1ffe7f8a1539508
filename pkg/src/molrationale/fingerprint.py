"""Circular (Morgan-style) bit fingerprints and Tanimoto similarity.

Hashing uses a fixed 64-bit mixing function so fingerprints are bit-exact
across platforms and runs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .chemgraph import MolGraph, _ORDER_CODE

DEFAULT_RADIUS = 2
DEFAULT_WIDTH = 2048

_MASK64 = (1 << 64) - 1
_SEED = 0x9E3779B97F4A7C15

_ELEMENT_CODE = {el: i + 1 for i, el in enumerate(("C", "N", "O", "S", "P", "F", "Cl", "Br", "I"))}


def _mix(x: int) -> int:
    # splitmix64 finalizer
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def _hash_ints(values) -> int:
    h = _SEED
    for v in values:
        h = _mix(h ^ ((v + 0x165667B19E3779F9) & _MASK64))
    return h


@dataclass(frozen=True)
class BitFingerprint:
    width: int
    radius: int
    bits: frozenset[int]

    def __post_init__(self):
        if self.width & (self.width - 1) or self.width <= 0:
            raise ValueError(f"width must be a power of two, got {self.width}")

    def popcount(self) -> int:
        return len(self.bits)

    def to_hex(self) -> str:
        buf = bytearray(self.width // 8)
        for b in self.bits:
            buf[b // 8] |= 1 << (b % 8)
        return bytes(buf).hex()

    @classmethod
    def from_hex(cls, text: str, radius: int = DEFAULT_RADIUS) -> "BitFingerprint":
        buf = bytes.fromhex(text)
        bits = {
            i * 8 + k for i, byte in enumerate(buf) for k in range(8) if byte >> k & 1
        }
        return cls(width=len(buf) * 8, radius=radius, bits=frozenset(bits))


def atom_environment_hashes(g: MolGraph, radius: int) -> list[list[int]]:
    """Per-round environment hash of every atom, rounds 0..radius."""
    hashes = [
        _hash_ints(
            (_ELEMENT_CODE[a.element], g.degree(i), a.charge + 16, int(a.aromatic))
        )
        for i, a in enumerate(g.atoms)
    ]
    rounds = [list(hashes)]
    for _ in range(radius):
        nxt = []
        for i in range(g.n):
            nb = sorted(
                (_ORDER_CODE[g.bond_between(i, j).order], hashes[j])
                for j in g.neighbors(i)
            )
            flat = [hashes[i]]
            for code, h in nb:
                flat.append(code)
                flat.append(h)
            nxt.append(_hash_ints(flat))
        hashes = nxt
        rounds.append(list(hashes))
    return rounds


def morgan_fingerprint(
    g: MolGraph, radius: int = DEFAULT_RADIUS, width: int = DEFAULT_WIDTH
) -> BitFingerprint:
    """Hash every atom environment up to the radius into a fixed-width bit set."""
    if radius > 4:
        raise ValueError("radius > 4 not supported")
    bits = set()
    for round_hashes in atom_environment_hashes(g, radius):
        for h in round_hashes:
            bits.add(h % width)
    return BitFingerprint(width=width, radius=radius, bits=frozenset(bits))


def tanimoto(a: BitFingerprint, b: BitFingerprint) -> float:
    """|a & b| / |a | b|; 1.0 when both are empty."""
    if a.width != b.width:
        raise ValueError(f"fingerprint width mismatch: {a.width} vs {b.width}")
    union = len(a.bits | b.bits)
    if union == 0:
        return 1.0
    return len(a.bits & b.bits) / union
