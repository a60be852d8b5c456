"""Weights, bands and frequency-marching schedules for the classical families.

Weights are integer vectors in the L_i basis.  For type A_{n-1} they are
normalized so the last coordinate is zero.  Every weight in the banding
system of every family has first coordinate 1, which is why the band of a
dominant weight comes out as its first coordinate.

Rank one is special in one respect: the integer customarily attached to a
weight of SU(2) or SO(3) is its Dynkin label (SU(2) fundamental weight 1,
SO(3) fundamental weight 2).  ``rank_one_label`` and ``from_rank_one_label``
convert between that integer and L-coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import DomainError, ParameterError

FAMILIES = ("A", "B", "C", "D")
JUSTIFICATIONS = ("highest-weight-additivity", "wedge-containment", "contraction-kernel")


@dataclass(frozen=True)
class GroupType:
    family: str
    n: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        lo = {"A": 2, "B": 1, "C": 1, "D": 2}[self.family]
        if int(self.n) != self.n or self.n < lo:
            raise ParameterError(f"type {self.family} needs n >= {lo}, got {self.n}")

    @property
    def name(self):
        return {
            "A": f"SU({self.n})",
            "B": f"SO({2 * self.n + 1})",
            "C": f"Sp({self.n})",
            "D": f"SO({2 * self.n})",
        }[self.family]

    @property
    def cartan(self):
        return f"{self.family}{self.n - 1 if self.family == 'A' else self.n}"

    @property
    def dim(self):
        """Number of L-coordinates."""
        return self.n


@dataclass(frozen=True, order=True)
class Weight:
    coords: tuple

    def __post_init__(self):
        c = tuple(self.coords)
        for x in c:
            if isinstance(x, float) and not x.is_integer():
                raise DomainError(f"non-integral coordinate {x} (spin weights are not representable)")
            if isinstance(x, Fraction) and x.denominator != 1:
                raise DomainError(f"non-integral coordinate {x} (spin weights are not representable)")
        object.__setattr__(self, "coords", tuple(int(x) for x in c))

    def __add__(self, other):
        return Weight(tuple(a + b for a, b in zip(self.coords, other.coords, strict=True)))

    def __sub__(self, other):
        return Weight(tuple(a - b for a, b in zip(self.coords, other.coords, strict=True)))

    def __iter__(self):
        return iter(self.coords)

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def scale(self, k):
        return Weight(tuple(k * a for a in self.coords))

    def to_list(self):
        return list(self.coords)


def weight(g: GroupType, coords) -> Weight:
    """Build a weight for ``g``, normalizing type-A coordinates to end in 0."""
    coords = list(coords)
    if g.family == "A" and len(coords) == g.n - 1:
        coords = coords + [0]
    if len(coords) != g.n:
        raise ParameterError(f"{g.cartan} weights have {g.n} coordinates, got {len(coords)}")
    if g.family == "A":
        last = coords[-1]
        coords = [c - last for c in coords]
    return Weight(tuple(coords))


def is_dominant(g: GroupType, lam: Weight) -> bool:
    c = _coords(g, lam)
    if any(c[i] < c[i + 1] for i in range(len(c) - 2)):
        return False
    if g.family == "D":
        return c[-2] >= abs(c[-1])
    return c[-2] >= c[-1] >= 0 if len(c) >= 2 else c[-1] >= 0


def _coords(g, lam):
    c = list(lam.coords if isinstance(lam, Weight) else lam)
    if len(c) != g.n:
        raise ParameterError(f"{g.cartan} weights have {g.n} coordinates, got {len(c)}")
    return c


def _require_dominant(g, lam):
    if not is_dominant(g, lam):
        if g.family == "D":
            rule = "l1 >= ... >= l_{n-1} >= |l_n|"
        else:
            rule = "l1 >= ... >= l_n >= 0"
        raise DomainError(f"{tuple(lam)} is not dominant for {g.cartan}: need {rule}")


# ---------------------------------------------------------------------------
# fundamental weights


def _omega(n, i):
    return Weight(tuple(1 if j < i else 0 for j in range(n)))


def fundamental_weights(g: GroupType) -> list:
    """Banding system: list of (name, Weight), all band one."""
    n = g.n
    if g.family == "A":
        return [(f"w{i}", _omega(n, i)) for i in range(1, n)]
    if g.family == "B":
        out = [(f"w{i}", _omega(n, i)) for i in range(1, n)]
        return out + [(f"w'{n}", _omega(n, n))]
    if g.family == "C":
        return [(f"w{i}", _omega(n, i)) for i in range(1, n + 1)]
    out = [(f"w{i}", _omega(n, i)) for i in range(1, n - 1)]
    out.append((f"w'{n - 1}", _omega(n, n - 1)))
    out.append((f"w'{n}", _omega(n, n)))
    out.append((f"w'{n + 1}", Weight(tuple([1] * (n - 1) + [-1]))))
    return out


def band_one_irreps(g: GroupType) -> list:
    return [w for _, w in fundamental_weights(g)]


def simply_connected_fundamentals(g: GroupType) -> list:
    """Fundamental weights of the Lie algebra, as Fraction vectors (spin weights included)."""
    n = g.n
    half = Fraction(1, 2)
    om = [[Fraction(1) if j < i else Fraction(0) for j in range(n)] for i in range(1, n + 1)]
    if g.family == "A":
        return om[: n - 1]
    if g.family == "C":
        return om
    if g.family == "B":
        return om[: n - 1] + [[half] * n]
    return om[: n - 2] + [[half] * n, [half] * (n - 1) + [-half]]


def dynkin_labels(g: GroupType, lam) -> tuple:
    """Coefficients of ``lam`` in the Lie-algebra fundamental weights.

    ``lam`` may contain Fractions (half-integers) so that spin weights can be
    tested.  The result is a tuple of Fractions.
    """
    c = [Fraction(x) for x in _coords(g, lam)]
    n = g.n
    if g.family == "A":
        c = [x - c[-1] for x in c]
        return tuple(c[i] - c[i + 1] for i in range(n - 1))
    if g.family == "C":
        return tuple(c[i] - c[i + 1] for i in range(n - 1)) + (c[-1],)
    if g.family == "B":
        return tuple(c[i] - c[i + 1] for i in range(n - 1)) + (2 * c[-1],)
    head = tuple(c[i] - c[i + 1] for i in range(n - 2))
    return head + (c[-2] + c[-1], c[-2] - c[-1])


def is_admissible(g: GroupType, lam) -> bool:
    """Does the Lie-algebra irrep with highest weight ``lam`` descend to the group?

    Always true for A and C (simply connected).  For B the last Dynkin label
    must be even, for D the sum of the two spin labels must be even.
    Non-dominant input raises DomainError.
    """
    a = dynkin_labels(g, lam)
    if any(x.denominator != 1 or x < 0 for x in a):
        raise DomainError(f"{tuple(lam)} is not a dominant integral weight of {g.cartan}")
    if g.family == "B":
        return a[-1] % 2 == 0
    if g.family == "D":
        return (a[-2] + a[-1]) % 2 == 0
    return True


def rank_one_label(g: GroupType, lam: Weight) -> int:
    """Integer label of a rank-one weight (SU(2) fundamental = 1, SO(3) fundamental = 2).

    A1 and C1 are both SU(2); B1 is SO(3) and only sees even labels.
    """
    if g.family == "A" and g.n == 2:
        return int(dynkin_labels(g, lam)[0])
    if g.family in "BC" and g.n == 1:
        return int(dynkin_labels(g, lam)[0])
    raise ParameterError(f"{g.cartan} is not rank one")


def from_rank_one_label(g: GroupType, k: int) -> Weight:
    if g.family == "A" and g.n == 2:
        return weight(g, [k, 0])
    if g.family == "B" and g.n == 1:
        if k % 2:
            raise DomainError(f"label {k} is a spin weight of SU(2); SO(3) needs an even label (parity rule)")
        return Weight((k // 2,))
    if g.family == "C" and g.n == 1:
        return weight(g, [k])
    raise ParameterError(f"{g.cartan} is not rank one")


# ---------------------------------------------------------------------------
# bands


def banding_expansion(g: GroupType, lam: Weight) -> tuple:
    """Deterministic non-negative expansion of ``lam`` in the banding system.

    Coefficients follow the order of ``fundamental_weights``.  For D_n the
    tail uses w'_n when l_n > 0 and w'_{n+1} when l_n < 0, never both.
    """
    _require_dominant(g, lam)
    if not is_admissible(g, lam):
        raise DomainError(f"{tuple(lam)} is not admissible for {g.name}")
    c = list(lam.coords)
    n = g.n
    if g.family in ("A", "B", "C"):
        m = n - 1 if g.family == "A" else n
        return tuple(c[i] - c[i + 1] if i + 1 < n else c[i] for i in range(m))
    head = [c[i] - c[i + 1] for i in range(n - 2)]
    if c[-1] >= 0:
        tail = [c[-2] - c[-1], c[-1], 0]
    else:
        tail = [c[-2] + c[-1], 0, -c[-1]]
    return tuple(head + tail)


def _combine(g, coeffs):
    ws = band_one_irreps(g)
    out = [0] * g.n
    for b, w in zip(coeffs, ws):
        for j in range(g.n):
            out[j] += b * w[j]
    return Weight(tuple(out))


def enumerate_expansions(g: GroupType, lam: Weight) -> list:
    """Every non-negative integer expansion of ``lam`` in the banding system.

    Exhaustive search with each coefficient bounded by l1; branches are cut
    when a partial sum overshoots one of the first n-1 coordinates (all
    banding weights are non-negative there).
    """
    target = list(lam.coords)
    ws = [w.coords for w in band_one_irreps(g)]
    n = g.n
    bound = max(target[0], 0)
    found = []

    def rec(i, acc, coeffs):
        if i == len(ws):
            if acc == target:
                found.append(tuple(coeffs))
            return
        w = ws[i]
        for b in range(bound + 1):
            nxt = [a + b * x for a, x in zip(acc, w)]
            if any(nxt[j] > target[j] for j in range(n - 1)):
                break
            rec(i + 1, nxt, coeffs + [b])

    rec(0, [0] * n, [])
    return found


def band_of(g: GroupType, lam: Weight) -> int:
    return sum(banding_expansion(g, lam))


@dataclass(frozen=True)
class MarchStep:
    """Target irreps determined from the bispectrum block of left (x) right.

    ``co_target`` is set only on the D_n step that yields both spin-type
    band-one irreps at once.  ``wedge`` and ``right_parts`` carry the
    exterior-power decompositions recorded for type C.
    """

    left: Weight
    right: Weight
    target: Weight
    justification: str
    prerequisites: tuple = ()
    co_target: Optional[Weight] = None
    wedge: tuple = ()
    right_parts: tuple = ()

    def __post_init__(self):
        if self.justification not in JUSTIFICATIONS:
            raise ParameterError(f"unknown justification {self.justification!r}")
        if self.justification == "highest-weight-additivity" and self.left + self.right != self.target:
            raise DomainError("highest-weight additivity requires target = left + right")

    @property
    def targets(self):
        return (self.target,) if self.co_target is None else (self.target, self.co_target)

    def to_json(self):
        d = {
            "left": self.left.to_list(),
            "right": self.right.to_list(),
            "target": self.target.to_list(),
            "justification": self.justification,
            "prerequisites": list(self.prerequisites),
        }
        if self.co_target is not None:
            d["co_target"] = self.co_target.to_list()
        if self.wedge:
            d["wedge"] = [w.to_list() for w in self.wedge]
        if self.right_parts:
            d["right_parts"] = [w.to_list() for w in self.right_parts]
        return d


def marching_pair(g: GroupType, lam: Weight) -> MarchStep:
    """Band-one factor and band b-1 factor whose tensor product contains ``lam``."""
    coeffs = banding_expansion(g, lam)
    b = sum(coeffs)
    if b <= 1:
        raise DomainError(f"marching needs band > 1, {tuple(lam)} has band {b}")
    i = max(k for k, c in enumerate(coeffs) if c > 0)
    mu = band_one_irreps(g)[i]
    return MarchStep(mu, lam - mu, lam, "highest-weight-additivity")


def halfband_split(g: GroupType, lam: Weight) -> tuple:
    """Split ``lam`` = mu + nu with both bands at most ceil(b/2)."""
    coeffs = banding_expansion(g, lam)
    b = sum(coeffs)
    if b <= 1:
        raise DomainError(f"split needs band > 1, {tuple(lam)} has band {b}")
    want = -(-b // 2)
    left = []
    taken = 0
    for c in coeffs:
        t = min(-(-c // 2), want - taken)
        left.append(t)
        taken += t
    right = [c - t for c, t in zip(coeffs, left)]
    return _combine(g, left), _combine(g, right)


def _wedge_parts_c(n, k):
    """Summands V_k, V_{k-2}, ... of the k-th exterior power of the defining rep of Sp(n)."""
    return tuple(_omega(n, j) for j in range(k, -1, -2))


def classical_schedule(g: GroupType) -> list:
    """Ordered steps that determine every band-one irrep from the defining one.

    The defining representation (first banding weight) is the input and is
    not itself a target.  Prerequisites are indices into the returned list.
    """
    n = g.n
    ws = band_one_irreps(g)
    v1 = ws[0]
    steps = []
    made = {}
    if g.family in ("A", "B"):
        for k in range(1, len(ws)):
            right = ws[k - 1]
            pre = (made[right],) if right in made else ()
            steps.append(MarchStep(v1, right, ws[k], "wedge-containment", pre))
            made[ws[k]] = len(steps) - 1
    elif g.family == "C":
        for k in range(1, n):
            right_parts = _wedge_parts_c(n, k)
            pre = tuple(sorted(made[w] for w in right_parts if w in made))
            steps.append(
                MarchStep(
                    v1,
                    ws[k - 1],
                    ws[k],
                    "contraction-kernel",
                    pre,
                    wedge=_wedge_parts_c(n, k + 1),
                    right_parts=right_parts,
                )
            )
            made[ws[k]] = len(steps) - 1
    else:
        # ws = [w1..w_{n-2}, w'_{n-1}, w'_n, w'_{n+1}]; wedge powers up to n-1 first
        for k in range(1, n - 1):
            right = ws[k - 1]
            pre = (made[right],) if right in made else ()
            steps.append(MarchStep(v1, right, ws[k], "wedge-containment", pre))
            made[ws[k]] = len(steps) - 1
        right = ws[n - 2]
        pre = (made[right],) if right in made else ()
        steps.append(MarchStep(v1, right, ws[n - 1], "wedge-containment", pre, co_target=ws[n]))
    return steps


def schedule_to_json(steps) -> str:
    return json.dumps([s.to_json() for s in steps], sort_keys=True)


def describe(g: GroupType, lam: Weight) -> dict:
    """Everything the CLI reports for one weight."""
    out = {
        "group": g.name,
        "type": g.cartan,
        "weight": lam.to_list(),
        "dominant": True,
        "admissible": is_admissible(g, lam),
        "dynkin_labels": [int(x) for x in dynkin_labels(g, lam)],
        "band": band_of(g, lam),
        "expansion": list(banding_expansion(g, lam)),
        "band_one": [w.to_list() for w in band_one_irreps(g)],
        "schedule": [s.to_json() for s in classical_schedule(g)],
    }
    if out["band"] > 1:
        out["marching_pair"] = marching_pair(g, lam).to_json()
        mu, nu = halfband_split(g, lam)
        out["halfband_split"] = [mu.to_list(), nu.to_list()]
    return out
