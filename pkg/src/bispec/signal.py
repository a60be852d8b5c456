"""Signals in V = (+)_l V_l^{R_l} for SO(3).

A signal is a map l -> A_l, an N_l x R_l complex matrix (rows m = -l..l in
the complex spherical-harmonic basis, columns the R_l copies).  Rotations
act by left multiplication with D^l(g).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import AlignmentUnavailable, ParameterError
from .su2 import Rotation, real_basis, to_cartesian, wigner_D

FORMAT_VERSION = 1


class RealStructure(str, Enum):
    GENERIC_COMPLEX = "generic_complex"
    # coefficients in the real harmonic basis are real for even l and
    # purely imaginary for odd l (Fourier transform of a real density)
    CRYO_REAL = "cryo_real"

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        aliases = {"cryo": cls.CRYO_REAL, "complex": cls.GENERIC_COMPLEX}
        if s in aliases:
            return aliases[s]
        try:
            return cls(s)
        except ValueError:
            raise ParameterError(f"unknown structure {s!r}") from None


@dataclass(frozen=True)
class RepSpec:
    bands: tuple  # ((l, R_l), ...) sorted by l

    def __post_init__(self):
        bands = tuple((int(l), int(r)) for l, r in self.bands)
        ls = [l for l, _ in bands]
        if any(l < 0 for l in ls) or any(r < 0 for _, r in bands):
            raise ParameterError("degrees and multiplicities must be non-negative")
        if len(set(ls)) != len(ls):
            raise ParameterError("repeated degree in RepSpec")
        if not any(r > 0 for _, r in bands):
            raise ParameterError("RepSpec needs at least one positive multiplicity")
        object.__setattr__(self, "bands", tuple(sorted(bands)))

    @classmethod
    def uniform(cls, L, R):
        return cls(tuple((l, R) for l in range(L + 1)))

    @classmethod
    def from_multiplicities(cls, mults):
        return cls(tuple(enumerate(mults)))

    @property
    def degrees(self):
        return [l for l, r in self.bands if r > 0]

    @property
    def L(self):
        return max(self.degrees)

    def mult(self, l):
        return dict(self.bands).get(l, 0)

    @property
    def dim(self):
        return sum((2 * l + 1) * r for l, r in self.bands)

    def to_json(self):
        return {"bands": [list(b) for b in self.bands]}


def _enc(M):
    M = np.asarray(M)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _dec(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


@dataclass(frozen=True)
class Signal:
    spec: RepSpec
    blocks: dict
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        blocks = {}
        for l in self.spec.degrees:
            if l not in self.blocks:
                raise ParameterError(f"missing block for l={l}")
            A = np.array(self.blocks[l], dtype=complex)
            if A.shape != (2 * l + 1, self.spec.mult(l)):
                raise ParameterError(
                    f"block l={l} has shape {A.shape}, expected {(2 * l + 1, self.spec.mult(l))}"
                )
            A.flags.writeable = False
            blocks[l] = A
        object.__setattr__(self, "blocks", blocks)

    def __getitem__(self, l):
        return self.blocks[l]

    def norm(self):
        return float(np.sqrt(sum(np.linalg.norm(A) ** 2 for A in self.blocks.values())))

    def vector(self):
        return np.concatenate([self.blocks[l].ravel() for l in self.spec.degrees])

    def __sub__(self, other):
        return Signal(self.spec, {l: self[l] - other[l] for l in self.spec.degrees})

    def __add__(self, other):
        return Signal(self.spec, {l: self[l] + other[l] for l in self.spec.degrees})

    def scaled(self, c):
        return Signal(self.spec, {l: c * A for l, A in self.blocks.items()})

    def real_basis_blocks(self):
        """Blocks expressed in the real spherical-harmonic basis."""
        return {l: real_basis(l).conj().T @ A for l, A in self.blocks.items()}

    def to_json(self):
        return {
            "format_version": FORMAT_VERSION,
            "spec": self.spec.to_json(),
            "blocks": {str(l): _enc(A) for l, A in self.blocks.items()},
        }

    @classmethod
    def from_json(cls, d):
        if isinstance(d, str):
            d = json.loads(d)
        if d.get("format_version") != FORMAT_VERSION:
            raise ParameterError(f"unsupported signal format {d.get('format_version')!r}")
        spec = RepSpec(tuple(tuple(b) for b in d["spec"]["bands"]))
        blocks = {}
        for l in spec.degrees:
            rows = d["blocks"][str(l)]
            blocks[l] = _dec(rows) if rows and rows[0] else np.zeros((2 * l + 1, spec.mult(l)), complex)
        return cls(spec, blocks)


def act(g: Rotation, f: Signal) -> Signal:
    return Signal(f.spec, {l: wigner_D(l, g) @ A for l, A in f.blocks.items()})


def cryo_phase(l):
    """Phase of cryo_real coefficients in the real basis: 1 for even l, i for odd l."""
    return 1.0 if l % 2 == 0 else 1j


def from_real_basis(l, B):
    return real_basis(l) @ B


def project_structure(f: Signal, structure) -> Signal:
    """Nearest signal carrying the given real structure."""
    structure = RealStructure.parse(structure)
    if structure is RealStructure.GENERIC_COMPLEX:
        return f
    out = {}
    for l, A in f.blocks.items():
        ph = cryo_phase(l)
        B = real_basis(l).conj().T @ A
        out[l] = from_real_basis(l, ph * np.real(B / ph))
    return Signal(f.spec, out)


def has_structure(f: Signal, structure, tol=1e-12) -> bool:
    structure = RealStructure.parse(structure)
    if structure is RealStructure.GENERIC_COMPLEX:
        return True
    scale = max(f.norm(), 1.0)
    for l, A in f.blocks.items():
        B = real_basis(l).conj().T @ A / cryo_phase(l)
        if np.abs(B.imag).max(initial=0.0) > tol * scale:
            return False
    return True


def random_signal(spec: RepSpec, structure="generic_complex", seed=None, table=None) -> Signal:
    """Gaussian signal; deterministic under ``seed``.

    Complex entries are standard circular Gaussians; cryo_real entries are
    standard real Gaussians in the real harmonic basis (times i for odd l).
    Attaches rank diagnostics for the A_l blocks and the marching blocks
    cg_project(A_1, A_{l-1}, l).
    """
    structure = RealStructure.parse(structure)
    rng = np.random.default_rng(seed)
    blocks = {}
    for l in spec.degrees:
        shape = (2 * l + 1, spec.mult(l))
        if structure is RealStructure.CRYO_REAL:
            B = rng.standard_normal(shape) * cryo_phase(l)
            blocks[l] = from_real_basis(l, B)
        else:
            blocks[l] = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    f = Signal(spec, blocks)
    f.diagnostics.update(genericity_diagnostics(f, table))
    return f


def genericity_diagnostics(f: Signal, table=None) -> dict:
    from .moments import cg_project
    from .su2 import get_table

    ranks = {l: int(np.linalg.matrix_rank(A)) for l, A in f.blocks.items()}
    out = {"block_ranks": ranks, "marching_ranks": {}}
    degs = f.spec.degrees
    if 1 in degs:
        table = table or get_table(max(f.spec.L, 1))
        for l in degs:
            if l >= 2 and (l - 1) in degs:
                B = cg_project(f[1], f[l - 1], l, table)
                out["marching_ranks"][l] = int(np.linalg.matrix_rank(B))
    return out


# ---------------------------------------------------------------------------
# registration


def _residual(g, f, h, scale):
    return (act(g, f) - h).norm() / scale


def procrustes_rotation(Xf, Xh):
    """Rotation R in SO(3) minimizing ||R Xf - Xh||_F for complex 3 x R data."""
    M = np.real(Xh @ Xf.conj().T)
    U, _, Vt = np.linalg.svd(M)
    s = np.sign(np.linalg.det(U @ Vt)) or 1.0
    return U @ np.diag([1.0, 1.0, s]) @ Vt


def distance_up_to_group(f: Signal, h: Signal, tol=1e-10, max_refine=200):
    """Best rotation g and relative error ||g.f - h|| / ||f||.

    The initial candidate aligns the l=1 blocks by orthogonal Procrustes in
    Cartesian coordinates.  If that leaves a residual above ``tol`` a
    shrinking-grid local search over small rotation vectors refines it.
    """
    if f.spec != h.spec:
        raise ParameterError("signals live in different representations")
    if 1 not in f.spec.degrees:
        raise AlignmentUnavailable("no l=1 component to register on")
    Xf, Xh = to_cartesian(f[1]), to_cartesian(h[1])
    if min(np.linalg.matrix_rank(Xf, tol=1e-10 * max(np.abs(Xf).max(), 1e-300)),
           np.linalg.matrix_rank(Xh, tol=1e-10 * max(np.abs(Xh).max(), 1e-300))) <= 1:
        raise AlignmentUnavailable("l=1 block has rank <= 1; registration is not defined")
    scale = f.norm() or 1.0
    g = Rotation.from_matrix(procrustes_rotation(Xf, Xh))
    best = _residual(g, f, h, scale)
    if best <= tol:
        return g, best
    step = 0.05
    offsets = [np.array(v, float) for v in np.ndindex(3, 3, 3)]
    offsets = [o - 1.0 for o in offsets if tuple(o) != (1, 1, 1)]
    for _ in range(max_refine):
        improved = False
        for o in offsets:
            cand = Rotation.from_rotvec(step * o) * g
            r = _residual(cand, f, h, scale)
            if r < best:
                best, g, improved = r, cand, True
        if not improved:
            step /= 2
            if step < 1e-10:
                break
    return g, best
