import itertools
import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bispec import band_calculus as bc
from bispec.errors import DomainError, ParameterError

A = lambda n: bc.GroupType("A", n)  # noqa: E731
B = lambda n: bc.GroupType("B", n)  # noqa: E731
C = lambda n: bc.GroupType("C", n)  # noqa: E731
D = lambda n: bc.GroupType("D", n)  # noqa: E731


def W(*c):
    return bc.Weight(tuple(c))


@st.composite
def dominant(draw, family, max_rank=6, max_coord=8):
    lo = {"A": 2, "B": 1, "C": 1, "D": 2}[family]
    n = draw(st.integers(lo, max_rank))
    g = bc.GroupType(family, n)
    if family == "A":
        tail = sorted(draw(st.lists(st.integers(0, max_coord), min_size=n - 1, max_size=n - 1)), reverse=True)
        return g, bc.weight(g, tail + [0])
    c = sorted(draw(st.lists(st.integers(0, max_coord), min_size=n, max_size=n)), reverse=True)
    if family == "D" and draw(st.booleans()):
        c[-1] = -c[-1]
    return g, W(*c)


any_dominant = st.sampled_from("ABCD").flatmap(dominant)


# -- group types and weights -------------------------------------------------


@pytest.mark.parametrize("fam,n", [("A", 1), ("D", 1), ("B", 0), ("C", 0), ("E", 3)])
def test_grouptype_rejects_bad_rank(fam, n):
    with pytest.raises(ParameterError):
        bc.GroupType(fam, n)


def test_group_names():
    assert A(3).name == "SU(3)" and A(3).cartan == "A2"
    assert B(1).name == "SO(3)"
    assert D(4).name == "SO(8)"
    assert C(2).name == "Sp(2)"


def test_type_a_normalization():
    g = A(3)
    assert bc.weight(g, [3, 2, 1]) == W(2, 1, 0)
    assert bc.weight(g, [2, 1]) == W(2, 1, 0)


def test_weight_rejects_half_integers():
    with pytest.raises(DomainError):
        W(Fraction(1, 2), 0)


def test_dominance():
    assert bc.is_dominant(D(3), W(2, 1, -1))
    assert not bc.is_dominant(D(3), W(2, 0, -1))
    assert not bc.is_dominant(B(2), W(1, -1))
    assert not bc.is_dominant(A(3), W(0, 1, 0))


# -- fundamental weights -----------------------------------------------------


def test_fundamental_weights_examples():
    assert bc.band_one_irreps(A(3)) == [W(1, 0, 0), W(1, 1, 0)]
    assert bc.band_one_irreps(B(1)) == [W(1)]
    assert bc.rank_one_label(B(1), W(1)) == 2
    assert bc.band_one_irreps(D(3)) == [W(1, 0, 0), W(1, 1, 0), W(1, 1, 1), W(1, 1, -1)]


@pytest.mark.parametrize("n", range(2, 7))
def test_band_one_counts(n):
    assert len(bc.band_one_irreps(A(n))) == n - 1
    assert len(bc.band_one_irreps(B(n))) == n
    assert len(bc.band_one_irreps(C(n))) == n
    assert len(bc.band_one_irreps(D(n))) == n + 1


def test_band_one_exterior_powers():
    # the k-th banding weight of A_3 and B_3 is the highest weight of the k-th wedge
    for g in (A(4), B(3)):
        for k, w in enumerate(bc.band_one_irreps(g), start=1):
            assert list(w) == [1] * k + [0] * (g.n - k)


def test_rank_one_labels():
    assert bc.rank_one_label(A(2), bc.band_one_irreps(A(2))[0]) == 1
    assert bc.rank_one_label(B(1), bc.band_one_irreps(B(1))[0]) == 2
    assert bc.from_rank_one_label(B(1), 4) == W(2)
    with pytest.raises(DomainError, match="parity"):
        bc.from_rank_one_label(B(1), 3)


# -- admissibility -----------------------------------------------------------


def test_admissible_examples():
    assert bc.is_admissible(C(2), W(1, 1))
    assert bc.is_admissible(B(2), W(1, 1))
    # (1,0) in D_2 has spin labels (1,1): even sum, so it is an SO(4) weight
    assert bc.dynkin_labels(D(2), W(1, 0)) == (1, 1)
    assert bc.is_admissible(D(2), W(1, 0))


def test_spin_weights_are_not_admissible():
    h = Fraction(1, 2)
    assert not bc.is_admissible(B(2), (h, h))
    assert not bc.is_admissible(D(3), (h, h, h))
    assert not bc.is_admissible(D(3), (h, h, -h))
    assert bc.is_admissible(D(3), (1, 1, 0))


def test_admissible_rejects_non_dominant():
    with pytest.raises(DomainError):
        bc.is_admissible(B(2), (0, 1))


def _brute_admissible(g, lam):
    """Solve lam = sum a_i w_i over small non-negative integers in the Lie-algebra basis."""
    fws = bc.simply_connected_fundamentals(g)
    bound = int(2 * max(abs(x) for x in lam)) + 1
    target = [Fraction(x) for x in lam]
    for a in itertools.product(range(bound + 1), repeat=len(fws)):
        s = [sum(ai * w[j] for ai, w in zip(a, fws)) for j in range(g.n)]
        if g.family == "A":
            s = [x - s[-1] for x in s]
        if s == target:
            if g.family == "B":
                return a[-1] % 2 == 0
            if g.family == "D":
                return (a[-2] + a[-1]) % 2 == 0
            return True
    raise AssertionError("no expansion found")


@pytest.mark.parametrize("fam", "ABCD")
def test_admissibility_matches_brute_force(fam):
    h = Fraction(1, 2)
    for n in range({"A": 2, "B": 1, "C": 1, "D": 2}[fam], 4):
        g = bc.GroupType(fam, n)
        for c in itertools.product(range(0, 5), repeat=n):
            c = sorted(c, reverse=True)
            lam = bc.weight(g, c)
            assert bc.is_admissible(g, lam) == _brute_admissible(g, lam)
        if fam in "BD":
            spin = tuple([h + 1] + [h] * (n - 1))
            assert bc.is_admissible(g, spin) == _brute_admissible(g, spin) == False  # noqa: E712


# -- bands -------------------------------------------------------------------


def test_band_examples():
    assert bc.band_of(D(4), W(2, 2, 2, 0)) == 2
    assert bc.band_of(A(3), W(3, 1, 0)) == 3
    assert bc.enumerate_expansions(A(3), W(3, 1, 0)) == [(2, 1)]
    for g in (A(3), B(2), C(3), D(4)):
        assert bc.band_of(g, W(*[0] * g.n)) == 0


def test_band_rejects_non_dominant():
    with pytest.raises(DomainError):
        bc.band_of(A(3), W(0, 1, 0))


@given(any_dominant)
def test_band_is_first_coordinate(gl):
    g, lam = gl
    assert bc.band_of(g, lam) == lam[0]
    assert bc._combine(g, bc.banding_expansion(g, lam)) == lam


@given(dominant("D", max_rank=5, max_coord=5))
def test_d_band_well_defined(gl):
    g, lam = gl
    sums = {sum(e) for e in bc.enumerate_expansions(g, lam)}
    assert sums == {lam[0]}


# -- marching ----------------------------------------------------------------


def test_marching_pair_examples():
    s = bc.marching_pair(B(1), W(2))
    assert (s.left, s.right) == (W(1), W(1))
    assert bc.rank_one_label(B(1), s.left) == 2
    s = bc.marching_pair(A(3), W(2, 1, 0))
    assert (s.left, s.right) == (W(1, 1, 0), W(1, 0, 0))
    s = bc.marching_pair(C(2), W(2, 2))
    assert (s.left, s.right) == (W(1, 1), W(1, 1))
    with pytest.raises(DomainError):
        bc.marching_pair(A(3), W(1, 0, 0))


def test_halfband_examples():
    # SO(3) label 6 -> labels 4 and 2
    mu, nu = bc.halfband_split(B(1), W(3))
    assert (bc.rank_one_label(B(1), mu), bc.rank_one_label(B(1), nu)) == (4, 2)
    assert bc.halfband_split(A(3), W(2, 0, 0)) == (W(1, 0, 0), W(1, 0, 0))
    mu, nu = bc.halfband_split(D(3), W(2, 2, 0))
    assert bc.band_of(D(3), mu) == bc.band_of(D(3), nu) == 1
    with pytest.raises(DomainError):
        bc.halfband_split(B(2), W(1, 1))


@given(any_dominant)
def test_marching_pair_properties(gl):
    g, lam = gl
    b = bc.band_of(g, lam)
    if b <= 1:
        return
    s = bc.marching_pair(g, lam)
    assert s.left + s.right == lam
    assert bc.band_of(g, s.left) == 1
    assert bc.band_of(g, s.right) == b - 1
    mu, nu = bc.halfband_split(g, lam)
    assert mu + nu == lam
    for w in (mu, nu):
        assert bc.is_dominant(g, w) and bc.is_admissible(g, w)
        assert bc.band_of(g, w) <= -(-b // 2)


# -- schedules ---------------------------------------------------------------


def test_schedule_examples():
    (step,) = bc.classical_schedule(B(2))
    assert (step.left, step.right, step.target) == (W(1, 0), W(1, 0), W(1, 1))
    (step,) = bc.classical_schedule(C(2))
    assert step.justification == "contraction-kernel"
    assert step.wedge == (W(1, 1), W(0, 0))
    steps = bc.classical_schedule(D(3))
    last = steps[-1]
    assert last.right == W(1, 1, 0)
    assert set(last.targets) == {W(1, 1, 1), W(1, 1, -1)}


@pytest.mark.parametrize("fam", "ABCD")
@pytest.mark.parametrize("n", range(2, 7))
def test_schedule_covers_band_one_once(fam, n):
    g = bc.GroupType(fam, n)
    steps = bc.classical_schedule(g)
    targets = [t for s in steps for t in s.targets]
    assert sorted(targets) == sorted(bc.band_one_irreps(g)[1:])
    known = {bc.band_one_irreps(g)[0]}
    for i, s in enumerate(steps):
        assert all(p < i for p in s.prerequisites)
        assert s.left in known and s.right in known
        known.update(s.targets)


def test_schedule_json_roundtrip():
    data = json.loads(bc.schedule_to_json(bc.classical_schedule(D(4))))
    assert data[-1]["co_target"] == [1, 1, 1, -1]
    assert {"left", "right", "target", "justification", "prerequisites"} <= set(data[0])


def test_describe_is_json_serializable():
    d = bc.describe(D(4), W(2, 2, 2, 0))
    assert d["band"] == 2
    json.dumps(d)
