"""Representation theory of SU(2)/SO(3) in numbers.

Conventions (see docs/CONVENTIONS.md): rotations are ZYZ Euler triples with
matrix Rz(alpha) Ry(beta) Rz(gamma), Wigner matrices follow
D^l_{m'm} = exp(-i m' alpha) d^l_{m'm}(beta) exp(-i m gamma), and
Clebsch-Gordan coefficients use the Condon-Shortley phase.  Rows and
columns of every (2l+1)-square matrix are indexed m = -l..l.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial, isqrt
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

from .errors import ParameterError

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# rotations


def _qmul(p, q):
    w1, x1, y1, z1 = p
    w2, x2, y2, z2 = q
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def euler_from_quaternions(q):
    """ZYZ angles for an (..., 4) array of unit quaternions (w, x, y, z).

    Works through atan2 on half-angle sums, so it stays accurate at the
    gimbal-lock poles beta = 0 and beta = pi.
    """
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    beta = 2.0 * np.arctan2(np.hypot(x, y), np.hypot(w, z))
    s = np.arctan2(z, w)
    d = np.arctan2(-x, y)
    alpha = np.mod(s + d, TWO_PI)
    gamma = np.mod(s - d, TWO_PI)
    return alpha, beta, gamma


def quaternions_from_euler(alpha, beta, gamma):
    alpha, beta, gamma = np.broadcast_arrays(
        np.asarray(alpha, float), np.asarray(beta, float), np.asarray(gamma, float)
    )
    cb, sb = np.cos(beta / 2), np.sin(beta / 2)
    s, d = (alpha + gamma) / 2, (alpha - gamma) / 2
    return np.stack([cb * np.cos(s), -sb * np.sin(d), sb * np.cos(d), cb * np.sin(s)], axis=-1)


def random_quaternions(rng, n):
    """Haar-uniform rotations: normalized 4-d Gaussian vectors."""
    q = rng.standard_normal((n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


@dataclass(frozen=True)
class Rotation:
    """Element of SO(3), stored as a unit quaternion (w, x, y, z)."""

    quat: tuple

    def __post_init__(self):
        q = np.asarray(self.quat, dtype=float)
        if q.shape != (4,):
            raise ParameterError("quaternion must have 4 components")
        nrm = np.linalg.norm(q)
        if nrm == 0:
            raise ParameterError("zero quaternion")
        q = q / nrm
        # fix the double cover: w >= 0 (first nonzero component positive)
        for c in q:
            if abs(c) > 1e-15:
                if c < 0:
                    q = -q
                break
        object.__setattr__(self, "quat", tuple(float(c) for c in q))

    @classmethod
    def identity(cls):
        return cls((1.0, 0.0, 0.0, 0.0))

    @classmethod
    def from_euler(cls, alpha, beta, gamma):
        return cls(tuple(quaternions_from_euler(alpha, beta, gamma)))

    @classmethod
    def from_matrix(cls, R):
        x, y, z, w = _ScipyRotation.from_matrix(np.asarray(R, float)).as_quat()
        return cls((w, x, y, z))

    @classmethod
    def from_rotvec(cls, v):
        x, y, z, w = _ScipyRotation.from_rotvec(np.asarray(v, float)).as_quat()
        return cls((w, x, y, z))

    @classmethod
    def random(cls, rng):
        return cls(tuple(random_quaternions(rng, 1)[0]))

    @property
    def euler(self):
        a, b, g = euler_from_quaternions(np.array(self.quat))
        return float(a), float(b), float(g)

    def as_matrix(self):
        w, x, y, z = self.quat
        return _ScipyRotation.from_quat([x, y, z, w]).as_matrix()

    def inverse(self):
        w, x, y, z = self.quat
        return Rotation((w, -x, -y, -z))

    def __mul__(self, other):
        """Composition: (g1 * g2) acts as g1 after g2."""
        if not isinstance(other, Rotation):
            return NotImplemented
        return Rotation(tuple(_qmul(self.quat, other.quat)))

    def angle_to(self, other):
        """Geodesic distance in radians."""
        c = abs(float(np.dot(self.quat, other.quat)))
        return 2.0 * np.arccos(min(1.0, c))

    def to_json(self):
        return {"quaternion": list(self.quat), "euler_zyz": list(self.euler)}


# ---------------------------------------------------------------------------
# Wigner matrices


def _check_l(l):
    if int(l) != l or l < 0:
        raise ParameterError(f"l must be a non-negative integer, got {l!r}")
    return int(l)


def _sqrt_fraction(fr: Fraction, bits: int = 120) -> float:
    """float(sqrt(fr)) from exact integers, one rounding at the end."""
    if fr < 0:
        raise ValueError("negative")
    num, den = fr.numerator, fr.denominator
    root = isqrt((num << (2 * bits)) // den)
    return float(Fraction(root, 1 << bits))


@lru_cache(maxsize=None)
def _small_d_coeffs(l):
    """Coefficient tensor C[m', m, q] with
    d^l_{m'm}(beta) = sum_q C[m',m,q] cos(beta/2)^(2l-q) sin(beta/2)^q.
    """
    n = 2 * l + 1
    C = np.zeros((n, n, 2 * l + 1))
    f = factorial
    for mp in range(-l, l + 1):
        for m in range(-l, l + 1):
            pref = Fraction(f(l + mp) * f(l - mp) * f(l + m) * f(l - m))
            for s in range(max(0, m - mp), min(l + m, l - mp) + 1):
                den = f(l + m - s) * f(s) * f(mp - m + s) * f(l - mp - s)
                val = _sqrt_fraction(pref / (den * den))
                sign = -1.0 if (mp - m + s) % 2 else 1.0
                C[mp + l, m + l, mp - m + 2 * s] = sign * val
    C.flags.writeable = False
    return C


def wigner_d_small(l, beta):
    """Real Wigner small-d matrix d^l(beta) by the factorial sum.

    ``beta`` may be a scalar or an array; the result has shape
    ``beta.shape + (2l+1, 2l+1)``.
    """
    l = _check_l(l)
    beta = np.asarray(beta, dtype=float)
    C = _small_d_coeffs(l)
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    q = np.arange(2 * l + 1)
    basis = c[..., None] ** (2 * l - q) * s[..., None] ** q
    N = 2 * l + 1
    return (basis @ C.reshape(N * N, -1).T).reshape(beta.shape + (N, N))


def wigner_D_euler(l, alpha, beta, gamma):
    """Batched D^l for arrays of ZYZ angles; shape (..., 2l+1, 2l+1)."""
    l = _check_l(l)
    alpha, beta, gamma = np.broadcast_arrays(
        np.asarray(alpha, float), np.asarray(beta, float), np.asarray(gamma, float)
    )
    m = np.arange(-l, l + 1)
    d = wigner_d_small(l, beta)
    ea = np.exp(-1j * alpha[..., None] * m)
    eg = np.exp(-1j * gamma[..., None] * m)
    return ea[..., :, None] * d * eg[..., None, :]


def wigner_D(l, g: Rotation):
    a, b, c = g.euler
    return wigner_D_euler(l, a, b, c)


# ---------------------------------------------------------------------------
# real spherical-harmonic basis


@lru_cache(maxsize=None)
def real_basis(l):
    """Unitary W with complex-basis coefficients a = W @ b for real-basis b.

    Real harmonics: m<0 -> i/sqrt2 (Y^m - (-1)^m Y^-m), m=0 -> Y^0,
    m>0 -> 1/sqrt2 (Y^-m + (-1)^m Y^m).  In this basis every D^l is real
    orthogonal, and for l=1 the basis order is (y, z, x).
    """
    l = _check_l(l)
    n = 2 * l + 1
    U = np.zeros((n, n), dtype=complex)
    r = 1 / np.sqrt(2)
    for k in range(-l, l + 1):
        if k < 0:
            U[k + l, k + l] = 1j * r
            U[k + l, -k + l] = -1j * r * (-1) ** k
        elif k == 0:
            U[l, l] = 1.0
        else:
            U[k + l, -k + l] = r
            U[k + l, k + l] = r * (-1) ** k
    W = U.T.copy()
    W.flags.writeable = False
    return W


# (y, z, x) -> (x, y, z)
_YZX_TO_XYZ = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=float)


def to_cartesian(A1):
    """Map l=1 complex-basis coefficients (3 x R) to Cartesian (x, y, z) components.

    For a rotation g this intertwines D^1(g) with the 3x3 rotation matrix.
    """
    return _YZX_TO_XYZ @ (real_basis(1).conj().T @ np.asarray(A1))


def from_cartesian(X):
    return real_basis(1) @ (_YZX_TO_XYZ.T @ np.asarray(X))


# ---------------------------------------------------------------------------
# Clebsch-Gordan coefficients


@lru_cache(maxsize=None)
def _fact(n):
    return factorial(n)


@lru_cache(maxsize=200_000)
def _cg_exact(l1, m1, l2, m2, l3, m3):
    """Exact square and sign of a Condon-Shortley CG coefficient (Racah form)."""
    f = _fact
    pref = Fraction(
        (2 * l3 + 1) * f(l3 + l1 - l2) * f(l3 - l1 + l2) * f(l1 + l2 - l3),
        f(l1 + l2 + l3 + 1),
    ) * (f(l3 + m3) * f(l3 - m3) * f(l1 - m1) * f(l1 + m1) * f(l2 - m2) * f(l2 + m2))
    kmin = max(0, l2 - l3 - m1, l1 - l3 + m2)
    kmax = min(l1 + l2 - l3, l1 - m1, l2 + m2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            f(k)
            * f(l1 + l2 - l3 - k)
            * f(l1 - m1 - k)
            * f(l2 + m2 - k)
            * f(l3 - l2 + m1 + k)
            * f(l3 - l1 - m2 + k)
        )
        total += Fraction((-1) ** k, den)
    return total * total * pref, (total > 0) - (total < 0)


def clebsch_gordan(l1, m1, l2, m2, l3, m3):
    """<l1 m1 l2 m2 | l3 m3>, zero outside the selection rules."""
    for l, m in ((l1, m1), (l2, m2), (l3, m3)):
        if l < 0 or abs(m) > l:
            return 0.0
    if m1 + m2 != m3 or not abs(l1 - l2) <= l3 <= l1 + l2:
        return 0.0
    sq, sign = _cg_exact(int(l1), int(m1), int(l2), int(m2), int(l3), int(m3))
    if sign == 0:
        return 0.0
    return sign * _sqrt_fraction(sq)


def cg_block(l1, l2, l3):
    """Dense array c[m1, m2, m3] of <l1 m1 l2 m2 | l3 m3>."""
    out = np.zeros((2 * l1 + 1, 2 * l2 + 1, 2 * l3 + 1))
    if not abs(l1 - l2) <= l3 <= l1 + l2:
        return out
    for m1 in range(-l1, l1 + 1):
        for m2 in range(-l2, l2 + 1):
            m3 = m1 + m2
            if abs(m3) <= l3:
                out[m1 + l1, m2 + l2, m3 + l3] = clebsch_gordan(l1, m1, l2, m2, l3, m3)
    return out


def _coupling_from_blocks(l1, l2, blocks):
    n1, n2 = 2 * l1 + 1, 2 * l2 + 1
    cols = [blocks[l3].reshape(n1 * n2, 2 * l3 + 1) for l3 in range(abs(l1 - l2), l1 + l2 + 1)]
    return np.hstack(cols)


# ---------------------------------------------------------------------------
# the table


CACHE_MAGIC = b"BSCG"
CACHE_FORMAT_VERSION = 1
CACHE_ENV = "BISPEC_CG_CACHE"


@dataclass(frozen=True)
class CGTable:
    """All CG blocks with l1, l2 <= max_l (hence l3 <= 2 max_l) and the
    unitary coupling matrices C[l1][l2].

    ``coupling[(l1, l2)]`` has rows indexed (m1, m2) with m1 outer, matching
    ``np.kron(D1, D2)``, and columns ordered by l3 ascending then m3
    ascending, so that kron(D1, D2) = C (+)_l3 D^l3 C^T.
    """

    max_l: int
    coupling: dict = field(repr=False)

    @classmethod
    def build(cls, max_l):
        max_l = _check_l(max_l)
        coupling = {}
        for l1 in range(max_l + 1):
            for l2 in range(max_l + 1):
                blocks = {l3: cg_block(l1, l2, l3) for l3 in range(abs(l1 - l2), l1 + l2 + 1)}
                C = _coupling_from_blocks(l1, l2, blocks)
                C.flags.writeable = False
                coupling[(l1, l2)] = C
        return cls(max_l, coupling)

    def _check(self, *ls):
        for l in ls:
            if l < 0 or l > self.max_l:
                raise ParameterError(f"l={l} outside CG table range 0..{self.max_l}")

    def coupling_matrix(self, l1, l2):
        self._check(l1, l2)
        return self.coupling[(l1, l2)]

    def block(self, l1, l2, l3):
        """c[m1, m2, m3]; a zero array when (l1, l2, l3) violates the triangle rule."""
        self._check(l1, l2)
        n1, n2, n3 = 2 * l1 + 1, 2 * l2 + 1, 2 * l3 + 1
        lo = abs(l1 - l2)
        if not lo <= l3 <= l1 + l2:
            return np.zeros((n1, n2, n3))
        start = sum(2 * k + 1 for k in range(lo, l3))
        C = self.coupling[(l1, l2)]
        return C[:, start : start + n3].reshape(n1, n2, n3)

    def __getitem__(self, key):
        return self.block(*key)

    # -- binary cache ------------------------------------------------------
    def save(self, path):
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(CACHE_MAGIC)
            fh.write(struct.pack("<II", CACHE_FORMAT_VERSION, self.max_l))
            for l1 in range(self.max_l + 1):
                for l2 in range(self.max_l + 1):
                    fh.write(np.ascontiguousarray(self.coupling[(l1, l2)], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        """Read a cache file; returns None on missing file or version mismatch."""
        path = Path(path)
        if not path.exists():
            return None
        data = path.read_bytes()
        if len(data) < 12 or data[:4] != CACHE_MAGIC:
            return None
        version, max_l = struct.unpack("<II", data[4:12])
        if version != CACHE_FORMAT_VERSION:
            return None
        off = 12
        coupling = {}
        for l1 in range(max_l + 1):
            for l2 in range(max_l + 1):
                n = (2 * l1 + 1) * (2 * l2 + 1)
                nbytes = 8 * n * n
                if off + nbytes > len(data):
                    return None
                C = np.frombuffer(data, dtype="<f8", count=n * n, offset=off).reshape(n, n).copy()
                C.flags.writeable = False
                coupling[(l1, l2)] = C
                off += nbytes
        return cls(max_l, coupling)


_TABLES: dict = {}


def get_table(max_l, cache_path=None):
    """Shared table covering at least ``max_l``.

    Consults the on-disk cache named by ``cache_path`` or the
    BISPEC_CG_CACHE environment variable; a stale or too-small cache is
    rebuilt and rewritten.
    """
    max_l = _check_l(max_l)
    for have, tab in _TABLES.items():
        if have >= max_l:
            return tab
    cache_path = cache_path or os.environ.get(CACHE_ENV)
    tab = None
    if cache_path:
        tab = CGTable.load(cache_path)
        if tab is not None and tab.max_l < max_l:
            tab = None
    if tab is None:
        tab = CGTable.build(max_l)
        if cache_path:
            tab.save(cache_path)
    _TABLES[tab.max_l] = tab
    return tab
