from itertools import combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ionfault.bitclasses import (
    BitClass,
    Coupling,
    EqClass,
    Syndrome,
    all_couplings,
    candidates_from_syndrome,
    class_members,
    classes_containing_pair,
    gray_code_check,
    is_complementary,
    pad_to_power_of_two,
    pair_signature,
    restricted_eq_classes,
    syndrome_from_labels,
)
from ionfault.errors import DomainError, InvalidDeviceError, InvalidLabelError, MultiFaultError


def pairs(n):
    return [Coupling(a, b) for a, b in combinations(range(1 << n), 2)]


def comp_pairs(n):
    return [c for c in pairs(n) if is_complementary(n, c)]


# --------------------------------------------------------------- types

def test_coupling_is_canonical():
    assert Coupling(5, 2) == Coupling(2, 5)
    assert (Coupling(5, 2).a, Coupling(5, 2).b) == (2, 5)
    assert len({Coupling(1, 0), Coupling(0, 1)}) == 1


@pytest.mark.parametrize("a,b", [(3, 3), (-1, 2)])
def test_coupling_rejects_bad_pairs(a, b):
    with pytest.raises(DomainError):
        Coupling(a, b)


def test_all_couplings_count():
    assert len(all_couplings(8)) == 28
    assert len(all_couplings(11)) == 55


# --------------------------------------------------------------- padding

@pytest.mark.parametrize("N,expected", [
    (8, (3, frozenset())),
    (11, (4, frozenset({11, 12, 13, 14, 15}))),
    (32, (5, frozenset())),
    (2, (1, frozenset())),
    (3, (2, frozenset({3}))),
])
def test_pad_to_power_of_two(N, expected):
    assert pad_to_power_of_two(N) == expected


@pytest.mark.parametrize("N", [0, 1])
def test_pad_rejects_tiny_devices(N):
    with pytest.raises(InvalidDeviceError):
        pad_to_power_of_two(N)


@given(st.integers(2, 5000))
def test_pad_is_tight(N):
    n, virtual = pad_to_power_of_two(N)
    assert 2 ** n >= N and (2 ** (n - 1) < N or N == 2 ** n)
    assert virtual == frozenset(range(N, 2 ** n))


# --------------------------------------------------------------- classes

def test_class_member_examples():
    assert class_members(3, BitClass(1, 1)) == (2, 3, 6, 7)
    assert class_members(3, BitClass(0, 0)) == (0, 2, 4, 6)
    assert class_members(3, EqClass(2, True)) == (0, 1, 6, 7)
    assert class_members(3, EqClass(1, False)) == (1, 2, 5, 6)


def test_class_members_drop_virtual_qubits():
    assert class_members(4, BitClass(0, 1), N=11) == (1, 3, 5, 7, 9)


@pytest.mark.parametrize("label", [BitClass(3, 0), BitClass(0, 2), EqClass(0), EqClass(3), "x"])
def test_class_members_bad_label(label):
    with pytest.raises(InvalidLabelError):
        class_members(3, label)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_class_sizes(n):
    for i in range(n):
        for b in (0, 1):
            assert len(class_members(n, BitClass(i, b))) == 2 ** (n - 1)
    for i in range(1, n):
        for eq in (True, False):
            assert len(class_members(n, EqClass(i, eq))) == 2 ** (n - 1)


def test_classes_containing_pair_examples():
    assert classes_containing_pair(3, Coupling(2, 7)) == [BitClass(1, 1)]
    assert classes_containing_pair(3, Coupling(0, 7)) == []
    assert classes_containing_pair(3, Coupling(2, 6)) == [BitClass(0, 0), BitClass(1, 1)]


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_coverage_exclusivity_and_bound(n):
    longest = 0
    for c in pairs(n):
        cls = classes_containing_pair(n, c)
        # coverage: empty exactly for complementary pairs
        assert (len(cls) == 0) == is_complementary(n, c)
        # exclusivity: never both (i,0) and (i,1)
        assert len({lab.i for lab in cls}) == len(cls)
        assert len(cls) <= n - 1
        longest = max(longest, len(cls))
        # agrees with membership
        for lab in cls:
            mem = class_members(n, lab)
            assert c.a in mem and c.b in mem
    assert longest == n - 1


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_complementary_pairs_split_by_eq_classes(n):
    for c in comp_pairs(n):
        for i in range(1, n):
            inside = [eq for eq in (True, False)
                      if c.a in class_members(n, EqClass(i, eq))
                      and c.b in class_members(n, EqClass(i, eq))]
            assert len(inside) == 1


# --------------------------------------------------------------- signatures

def test_pair_signature_examples():
    assert pair_signature(3, Coupling(2, 5)).xor_bits == (1, 1)
    assert pair_signature(3, Coupling(0, 7)).xor_bits == (0, 0)
    assert pair_signature(4, Coupling(5, 10)).xor_bits == (1, 1, 1)


def test_pair_signature_rejects_non_complementary():
    with pytest.raises(DomainError):
        pair_signature(3, Coupling(2, 6))


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_pair_signature_injective(n):
    sigs = [pair_signature(n, c) for c in comp_pairs(n)]
    assert len(sigs) == 2 ** (n - 1)
    assert len(set(sigs)) == len(sigs)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_signature_is_endpoint_independent(n):
    for c in comp_pairs(n):
        b_side = tuple(((c.b >> j) ^ (c.b >> (j + 1))) & 1 for j in range(n - 1))
        assert pair_signature(n, c).xor_bits == b_side


# --------------------------------------------------------------- syndromes

def test_syndrome_properties():
    s = syndrome_from_labels(3, [(0, 0), (1, 1)])
    assert not s.conflict
    assert s.fixed_bits == {0: 0, 1: 1}
    assert s.L == 2
    assert s.pattern() == "*10"
    empty = Syndrome(3)
    assert empty.L == 0 and not empty.conflict and empty.pattern() == "***"
    bad = syndrome_from_labels(3, [(2, 0), (2, 1)])
    assert bad.conflict
    with pytest.raises(MultiFaultError):
        bad.fixed_bits


def test_candidates_examples():
    assert candidates_from_syndrome(3, syndrome_from_labels(3, [(0, 0), (1, 1)])) == \
        [Coupling(2, 6)]
    assert candidates_from_syndrome(3, syndrome_from_labels(3, [(0, 0)])) == \
        [Coupling(0, 6), Coupling(2, 4)]
    assert candidates_from_syndrome(3, Syndrome(3)) == \
        [Coupling(0, 7), Coupling(1, 6), Coupling(2, 5), Coupling(3, 4)]


def test_candidates_reject_conflict():
    with pytest.raises(MultiFaultError):
        candidates_from_syndrome(3, syndrome_from_labels(3, [(1, 0), (1, 1)]))


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_candidate_count_and_consistency(n):
    seen = {}
    for c in pairs(n):
        s = Syndrome(n, frozenset(classes_containing_pair(n, c)))
        seen.setdefault(s, set()).add(c)
    for s, group in seen.items():
        cands = candidates_from_syndrome(n, s)
        assert len(cands) == 2 ** (n - s.L - 1)
        assert set(cands) == group


# --------------------------------------------------------------- restricted classes

def test_restricted_examples():
    (lab, mem), = restricted_eq_classes(3, [1, 2], {0: 0})
    assert lab == (1, 2) and mem == (0, 6)
    out = restricted_eq_classes(3, [0, 1, 2])
    assert [m for _, m in out] == [(0, 3, 4, 7), (0, 1, 6, 7)]
    (lab, mem), = restricted_eq_classes(4, [0, 2], {1: 0, 3: 1})
    # four integers agree with the fixed bits; two of them have bit0 == bit2
    assert mem == (8, 13)
    (_, unfixed), = restricted_eq_classes(4, [0, 2])
    assert len(unfixed) == 8
    assert all((x >> 0) & 1 == (x >> 2) & 1 and (x >> 1) & 1 == 0 and (x >> 3) & 1 for x in mem)


def test_restricted_needs_two_free_bits():
    with pytest.raises(DomainError):
        restricted_eq_classes(3, [2], {0: 0, 1: 1})


# --------------------------------------------------------------- gray code

def test_gray_examples():
    assert gray_code_check(3, 1, 3)
    assert not gray_code_check(3, 2, 2)
    for n in range(2, 7):
        for i in range(1, n):
            assert gray_code_check(n, i, 0)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_gray_identity(n):
    for i in range(1, n):
        members = set(class_members(n, EqClass(i, True)))
        for x in range(1 << n):
            assert gray_code_check(n, i, x) == (x in members)


def test_gray_bad_index():
    with pytest.raises(InvalidLabelError):
        gray_code_check(3, 0, 1)
