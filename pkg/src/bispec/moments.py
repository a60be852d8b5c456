"""Closed-form moments of a Signal.

The third moment integrates g.f (x) g.f (x) conj(g.f) over SO(3).  By
Schur's lemma its (l1, l2, l3) component is (1/N3) CG (x) M with the
invariant pairing matrix

    M[r3, (r1, r2)] = sum_m conj(A_l3[m, r3]) B[m, (r1, r2)],
    B = cg_project(A_l1, A_l2, l3),

so only the R3 x (R1 R2) matrices M are stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, UnrecoverableError
from .signal import RepSpec, Signal, _dec, _enc


def triangle(l1, l2, l3):
    return abs(l1 - l2) <= l3 <= l1 + l2


def cg_project(A, B, l3, table):
    """Project A (x) B onto the V_l3 isotypic component.

    Returns the N3 x (R1 R2) matrix with columns (r1, r2), r1 outer, or
    None when (l1, l2, l3) violates the triangle rule.
    """
    A, B = np.asarray(A), np.asarray(B)
    l1, l2 = (A.shape[0] - 1) // 2, (B.shape[0] - 1) // 2
    if not triangle(l1, l2, l3):
        return None
    c = table.block(l1, l2, l3)
    out = np.einsum("abc,ai,bj->cij", c, A, B, optimize=True)
    return out.reshape(2 * l3 + 1, A.shape[1] * B.shape[1])


@dataclass
class MomentBlocks:
    m1: np.ndarray
    m2: dict = field(default_factory=dict)
    m3: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list, compare=False)

    def to_json(self):
        return {
            "format_version": 1,
            "m1": [[float(z.real), float(z.imag)] for z in np.asarray(self.m1)],
            "m2": {str(l): _enc(G) for l, G in sorted(self.m2.items())},
            "m3": {",".join(map(str, k)): _enc(M) for k, M in sorted(self.m3.items())},
        }

    @classmethod
    def from_json(cls, d):
        if isinstance(d, str):
            d = json.loads(d)
        m1 = np.array([complex(a, b) for a, b in d["m1"]], dtype=complex)
        m2 = {int(k): _dec(v) for k, v in d["m2"].items()}
        m3 = {}
        for k, v in d["m3"].items():
            key = tuple(int(x) for x in k.split(","))
            m3[key] = _dec(v) if v and v[0] else np.zeros((0, 0), complex)
        return cls(m1, m2, m3)

    def max_abs_diff(self, other, which=("m1", "m2", "m3")):
        errs = [0.0]
        if "m1" in which and len(self.m1):
            errs.append(np.abs(self.m1 - other.m1).max())
        if "m2" in which:
            errs += [np.abs(G - other.m2[l]).max() for l, G in self.m2.items() if G.size]
        if "m3" in which:
            errs += [np.abs(M - other.m3[k]).max() for k, M in self.m3.items() if M.size]
        return float(max(errs))

    def scale(self):
        """Largest entry of m3, the natural unit for tolerances."""
        vals = [np.abs(M).max() for M in self.m3.values() if M.size]
        return float(max(vals, default=0.0))


def moment1(f: Signal):
    if 0 not in f.spec.degrees:
        return np.zeros(0, dtype=complex)
    return f[0].ravel().copy()


def moment2(f: Signal):
    return {l: A.conj().T @ A for l, A in f.blocks.items()}


def _check_table(spec, table):
    if table is None or table.max_l < spec.L:
        have = None if table is None else table.max_l
        raise ParameterError(f"CG table covers l <= {have}, signal needs l <= {spec.L}")


def moment3_block(f: Signal, l1, l2, l3, table):
    B = cg_project(f[l1], f[l2], l3, table)
    if B is None:
        return None
    return f[l3].conj().T @ B


def moment3(f: Signal, table):
    _check_table(f.spec, table)
    degs = f.spec.degrees
    out = {}
    for l1 in degs:
        for l2 in degs:
            for l3 in degs:
                if triangle(l1, l2, l3):
                    out[(l1, l2, l3)] = moment3_block(f, l1, l2, l3, table)
    return out


def moments(f: Signal, table) -> MomentBlocks:
    return MomentBlocks(moment1(f), moment2(f), moment3(f, table))


def recover_m1_m2_from_m3(m3, spec: RepSpec, rel_tol=1e-12):
    """Read m1 and the Gram blocks off the third moment.

    The (0,0,0) block has entries M[j, (i, k)] = conj(a_j) a_i a_k where a is
    the trivial-representation row.  Its diagonal z_j = a_j |a_j|^2 gives
    a_j = z_j / |z_j|^(2/3); the remaining entries are then read linearly
    against the largest one.  Gram blocks come from the (0, l, l) family,
    M[r3, (k, r2)] = a_k G_l[r3, r2], dividing by the largest a_k.
    """
    if 0 not in spec.degrees or (0, 0, 0) not in m3:
        raise UnrecoverableError("no trivial-representation component; m3 does not determine m1, m2")
    R0 = spec.mult(0)
    M0 = np.asarray(m3[(0, 0, 0)]).reshape(R0, R0, R0)
    diag = np.array([M0[j, j, j] for j in range(R0)])
    if np.abs(diag).max() <= 0:
        raise UnrecoverableError("trivial-representation block A_0 is zero")
    k = int(np.argmax(np.abs(diag)))
    z = diag[k]
    ak = z / np.abs(z) ** (2.0 / 3.0)
    nk2 = np.abs(ak) ** 2
    scale = max(np.abs(M).max() for M in m3.values() if np.asarray(M).size) ** (1 / 3)
    if np.abs(ak) <= rel_tol * scale:
        raise UnrecoverableError("trivial-representation block A_0 is numerically zero")
    # M0[k, k, j] = |a_k|^2 a_j
    a = M0[k, k, :] / nk2
    a[k] = ak
    m2 = {}
    for l in spec.degrees:
        M = np.asarray(m3[(0, l, l)]).reshape(spec.mult(l), R0, spec.mult(l))
        G = M[:, k, :] / ak
        m2[l] = 0.5 * (G + G.conj().T)
    return a, m2
