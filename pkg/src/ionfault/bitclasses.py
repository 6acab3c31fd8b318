"""Bit-class combinatorics over qubit indices.

Qubits are numbered 0..2^n-1 and bit 0 is the least significant bit.
A *bit class* ``(i, b)`` holds every index whose bit ``i`` equals ``b``.
An *equality class* ``[i, =]`` (``[i, !=]``) holds every index whose bits
``i-1`` and ``i`` are equal (different).  Everything here is a pure function.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, InvalidDeviceError, InvalidLabelError, MultiFaultError

__all__ = [
    "Coupling",
    "BitClass",
    "EqClass",
    "Syndrome",
    "PairSignature",
    "pad_to_power_of_two",
    "bit",
    "class_members",
    "classes_containing_pair",
    "is_complementary",
    "pair_signature",
    "candidates_from_syndrome",
    "restricted_eq_classes",
    "gray_code_check",
    "all_couplings",
    "syndrome_from_labels",
]


def bit(x: int, i: int) -> int:
    return (x >> i) & 1


@dataclass(frozen=True, order=True)
class Coupling:
    """Unordered qubit pair, stored with ``a < b``."""

    a: int
    b: int

    def __post_init__(self):
        a, b = int(self.a), int(self.b)
        if a == b:
            raise DomainError(f"coupling needs two distinct qubits, got {a}")
        if a < 0 or b < 0:
            raise DomainError(f"negative qubit index in ({a}, {b})")
        if a > b:
            a, b = b, a
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def of(cls, pair: Iterable[int]) -> "Coupling":
        a, b = pair
        return cls(a, b)

    def as_list(self) -> list[int]:
        return [self.a, self.b]

    def __iter__(self):
        yield self.a
        yield self.b

    def __str__(self):
        return f"{{{self.a},{self.b}}}"


@dataclass(frozen=True, order=True)
class BitClass:
    i: int
    b: int

    def __str__(self):
        return f"({self.i},{self.b})"


@dataclass(frozen=True, order=True)
class EqClass:
    i: int
    equal: bool = True

    def __str__(self):
        return f"[{self.i},{'=' if self.equal else '!='}]"


def _check_n(n: int):
    if n < 1:
        raise InvalidLabelError(f"bit width must be >= 1, got {n}")


def pad_to_power_of_two(N: int) -> tuple[int, frozenset[int]]:
    """Return the bit width ``n`` with ``2**n >= N`` and the virtual indices.

    Args:
        N: physical qubit count, at least 2.

    Returns:
        ``(n, virtual)`` where ``virtual`` is ``{N, ..., 2**n - 1}``.
    """
    if N < 2:
        raise InvalidDeviceError(f"need at least 2 qubits, got {N}")
    n = (N - 1).bit_length()
    return n, frozenset(range(N, 1 << n))


def class_members(n: int, label, N: int | None = None) -> tuple[int, ...]:
    """Members of a bit class or equality class, ascending.

    When ``N`` is given, indices ``>= N`` (virtual qubits) are dropped.
    """
    _check_n(n)
    size = 1 << n
    if isinstance(label, BitClass):
        if not 0 <= label.i < n or label.b not in (0, 1):
            raise InvalidLabelError(f"bad bit class {label} for n={n}")
        out = [x for x in range(size) if bit(x, label.i) == label.b]
    elif isinstance(label, EqClass):
        if not 0 < label.i < n:
            raise InvalidLabelError(f"bad equality class {label} for n={n}")
        want = 0 if label.equal else 1
        out = [x for x in range(size) if bit(x, label.i - 1) ^ bit(x, label.i) == want]
    else:
        raise InvalidLabelError(f"unknown label {label!r}")
    if N is not None:
        out = [x for x in out if x < N]
    return tuple(out)


def _check_coupling(n: int, c: Coupling):
    if c.b >= (1 << n):
        raise DomainError(f"coupling {c} out of range for n={n}")


def classes_containing_pair(n: int, c: Coupling) -> list[BitClass]:
    _check_coupling(n, c)
    return [BitClass(i, bit(c.a, i)) for i in range(n) if bit(c.a, i) == bit(c.b, i)]


def is_complementary(n: int, c: Coupling) -> bool:
    return c.a ^ c.b == (1 << n) - 1


@dataclass(frozen=True)
class PairSignature:
    """``xor_bits[j] = bit j XOR bit j+1`` of either endpoint."""

    xor_bits: tuple[int, ...]

    def as_int(self) -> int:
        return sum(v << j for j, v in enumerate(self.xor_bits))


def pair_signature(n: int, c: Coupling) -> PairSignature:
    _check_coupling(n, c)
    if not is_complementary(n, c):
        raise DomainError(f"{c} is not bit-complementary for n={n}")
    return PairSignature(tuple(bit(c.a, j) ^ bit(c.a, j + 1) for j in range(n - 1)))


@dataclass(frozen=True)
class Syndrome:
    """Failing stage-1 bit classes and the fixed-bit pattern they imply."""

    n: int
    failing: frozenset[BitClass] = field(default_factory=frozenset)

    @property
    def conflict(self) -> bool:
        pos = [lab.i for lab in self.failing]
        return len(pos) != len(set(pos))

    @property
    def fixed_bits(self) -> dict[int, int]:
        if self.conflict:
            raise MultiFaultError("conflicting syndrome has no fixed-bit pattern")
        return {lab.i: lab.b for lab in self.failing}

    @property
    def L(self) -> int:
        return len({lab.i for lab in self.failing})

    @property
    def free_bits(self) -> list[int]:
        fixed = {lab.i for lab in self.failing}
        return [i for i in range(self.n) if i not in fixed]

    def pattern(self) -> str:
        """Fixed bits as a string, most significant first, ``*`` for free."""
        fb = self.fixed_bits
        return "".join(str(fb[i]) if i in fb else "*" for i in reversed(range(self.n)))

    def __str__(self):
        return "{" + ",".join(str(x) for x in sorted(self.failing)) + "}"


def syndrome_from_labels(n: int, labels: Iterable) -> Syndrome:
    return Syndrome(n, frozenset(BitClass(*lab) if not isinstance(lab, BitClass) else lab
                                 for lab in labels))


def candidates_from_syndrome(n: int, s: Syndrome) -> list[Coupling]:
    """All pairs that share exactly the fixed bits and complement the free ones."""
    if s.conflict:
        raise MultiFaultError(f"syndrome {s} is in conflict; more than one fault")
    fixed = s.fixed_bits
    free = s.free_bits
    if not free:
        raise DomainError(f"syndrome {s} fixes every bit; no pair can produce it")
    base = sum(v << i for i, v in fixed.items())
    top = free[-1]
    out = []
    # anchor has its highest free bit 0; enumerate the other free bits
    for combo in range(1 << (len(free) - 1)):
        a = base
        for j, pos in enumerate(free[:-1]):
            a |= ((combo >> j) & 1) << pos
        partner = a
        for pos in free:
            partner ^= 1 << pos
        assert bit(a, top) == 0
        out.append(Coupling(a, partner))
    return sorted(out)


def restricted_eq_classes(
    n: int,
    free_bits: Sequence[int],
    fixed_bits: Mapping[int, int] | None = None,
    N: int | None = None,
) -> list[tuple[tuple[int, int], tuple[int, ...]]]:
    """Equality classes over consecutive free bits.

    Returns one ``((lo, hi), members)`` entry per neighbouring pair of
    ``free_bits``; members have equal bits at ``lo`` and ``hi`` and agree with
    ``fixed_bits`` where given.  Raises ``DomainError`` when fewer than two free
    bits remain, since the candidate is then already unique.
    """
    _check_n(n)
    free = list(free_bits)
    if len(free) < 2:
        raise DomainError("fewer than two free bits: no restricted test needed")
    fixed = dict(fixed_bits or {})
    universe = [x for x in range(1 << n) if all(bit(x, i) == v for i, v in fixed.items())]
    if N is not None:
        universe = [x for x in universe if x < N]
    out = []
    for lo, hi in zip(free, free[1:]):
        members = tuple(x for x in universe if bit(x, lo) == bit(x, hi))
        out.append(((lo, hi), members))
    return out


def gray_code_check(n: int, i: int, x: int) -> bool:
    """True iff ``x`` lies in ``[i, =]``, via the reflected Gray code of ``x``."""
    if not 0 < i < n:
        raise InvalidLabelError(f"equality class index must be in (0, {n}), got {i}")
    return bit(x ^ (x >> 1), i - 1) == 0


def all_couplings(N: int) -> frozenset[Coupling]:
    return frozenset(Coupling(a, b) for a, b in combinations(range(N), 2))
