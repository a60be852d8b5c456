"""Brute-force Haar integration and the multi-reference alignment simulator.

The quadrature is a product rule in ZYZ Euler angles: equispaced alpha and
gamma, Gauss-Legendre in cos(beta).  It integrates products of up to d
Wigner entries of degree <= L exactly, so oracle comparisons run at
roundoff level.  Nothing here uses the Clebsch-Gordan code: the invariant
vectors that contract full tensors down to pairing matrices are themselves
obtained by quadrature.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .moments import MomentBlocks, triangle
from .signal import RealStructure, RepSpec, Signal, cryo_phase, from_real_basis
from .su2 import Rotation, euler_from_quaternions, random_quaternions, real_basis, wigner_D_euler


@dataclass
class QuadratureRule:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    weights: np.ndarray
    degree: int
    _D: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.weights)

    def nodes(self):
        for a, b, g, w in zip(self.alpha, self.beta, self.gamma, self.weights):
            yield Rotation.from_euler(a, b, g), float(w)

    def D(self, l):
        """Wigner matrices of degree l at every node, shape (n, 2l+1, 2l+1)."""
        if l not in self._D:
            self._D[l] = wigner_D_euler(l, self.alpha, self.beta, self.gamma)
        return self._D[l]

    def integrate(self, values):
        """Weighted sum over the leading (node) axis."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def build_quadrature(L, d=3) -> QuadratureRule:
    """Rule exact for products of d Wigner entries of degree <= L."""
    if L < 1 or d < 1:
        raise ParameterError("quadrature needs L >= 1 and d >= 1")
    deg = d * L
    n_ag = 2 * deg + 1
    n_b = deg + 1
    x, wb = np.polynomial.legendre.leggauss(n_b)
    ang = 2 * np.pi * np.arange(n_ag) / n_ag
    A, Bx, G = np.meshgrid(ang, x, ang, indexing="ij")
    W = np.broadcast_to(wb[None, :, None] / (2.0 * n_ag * n_ag), A.shape)
    return QuadratureRule(
        A.ravel(), np.arccos(Bx.ravel()), G.ravel(), np.ascontiguousarray(W).ravel(), deg
    )


def _need(rule, degree):
    if rule.degree < degree:
        raise ParameterError(f"quadrature degree {rule.degree} is below the required {degree}")


def invariant_vector(l1, l2, l3, rule):
    """Unit-normalized invariant of V_l1 (x) V_l2 (x) V_l3^* from quadrature.

    Scaled to squared norm 2 l3 + 1 and signed so that the entry at
    (m1, m2, m3) = (l1, l3 - l1, l3) is positive, which reproduces the
    Condon-Shortley Clebsch-Gordan array without computing it.
    """
    if not triangle(l1, l2, l3):
        raise ParameterError(f"({l1}, {l2}, {l3}) violates the triangle rule")
    _need(rule, l1 + l2 + l3)
    a0, b0, c0 = 2 * l1, l3 - l1 + l2, 2 * l3
    D1, D2, D3 = rule.D(l1)[:, :, a0], rule.D(l2)[:, :, b0], rule.D(l3)[:, :, c0].conj()
    v = np.einsum("n,na,nb,nc->abc", rule.weights, D1, D2, D3, optimize=True)
    v = v.real
    return v * np.sqrt(2 * l3 + 1) / np.linalg.norm(v)


def _rotated(f: Signal, rule):
    return {l: np.einsum("nab,bi->nai", rule.D(l), A) for l, A in f.blocks.items()}


def oracle_tensor(f: Signal, ls, rule):
    """Full moment tensor block for degrees ``ls`` (last slot conjugated).

    For ls = (l1, l2, l3) the result is indexed [m1, r1, m2, r2, m3, r3].
    """
    _need(rule, sum(ls))
    X = _rotated(f, rule)
    arrays = [X[l] for l in ls[:-1]] + [X[ls[-1]].conj()]
    if len(ls) == 1:
        return rule.integrate(arrays[0])
    if len(ls) == 2:
        return np.einsum("n,nai,nbj->aibj", rule.weights, *arrays, optimize=True)
    if len(ls) == 3:
        return np.einsum("n,nai,nbj,nck->aibjck", rule.weights, *arrays, optimize=True)
    raise ParameterError("moment degree must be 1, 2 or 3")


def oracle_moment(f: Signal, d, rule) -> MomentBlocks:
    """Moment of degree d by direct Haar integration, in MomentBlocks layout."""
    if d not in (1, 2, 3):
        raise ParameterError("moment degree must be 1, 2 or 3")
    _need(rule, d * f.spec.L)
    X = _rotated(f, rule)
    degs = f.spec.degrees
    if d == 1:
        m1 = rule.integrate(X[0]).ravel() if 0 in degs else np.zeros(0, complex)
        return MomentBlocks(m1)
    if d == 2:
        m2 = {l: np.einsum("n,nmr,nms->rs", rule.weights, X[l].conj(), X[l]) for l in degs}
        return MomentBlocks(np.zeros(0, complex), m2)
    m3 = {}
    for l1 in degs:
        for l2 in degs:
            for l3 in degs:
                if not triangle(l1, l2, l3):
                    continue
                u = invariant_vector(l1, l2, l3, rule)
                Y = np.einsum("abc,nai,nbj->ncij", u, X[l1], X[l2], optimize=True)
                M = np.einsum("n,nck,ncij->kij", rule.weights, X[l3].conj(), Y, optimize=True)
                m3[(l1, l2, l3)] = M.reshape(M.shape[0], -1)
    return MomentBlocks(np.zeros(0, complex), {}, m3)


# ---------------------------------------------------------------------------
# MRA sampling


@dataclass
class MRASample:
    y: Signal
    g: Rotation | None = None
    noise: Signal | None = None


DEFAULT_CHUNK = 1 << 14


def _chunk_sizes(N, chunk):
    sizes = [chunk] * (N // chunk)
    if N % chunk:
        sizes.append(N % chunk)
    return sizes


def sample_mra_batches(f: Signal, sigma, N, structure="cryo_real", seed=None, chunk=DEFAULT_CHUNK, debug=False):
    """Yield batches {l: (n, 2l+1, R_l)} of noisy rotated copies of f.

    Rotations are Haar-uniform (normalized Gaussian quaternions).  Noise is
    i.i.d. N(0, sigma^2) on each real coordinate of the signal space: the
    real harmonic coordinates for cryo_real (times i for odd l), real and
    imaginary parts separately for generic_complex.  Chunk seeds are spawned
    from ``seed`` so output is independent of how batches are consumed.
    With ``debug`` the hidden rotations and noise are yielded as well.
    """
    if sigma < 0 or N < 1:
        raise ParameterError("need sigma >= 0 and N >= 1")
    structure = RealStructure.parse(structure)
    sizes = _chunk_sizes(int(N), int(chunk))
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    for n, ss in zip(sizes, seqs):
        rng = np.random.default_rng(ss)
        q = random_quaternions(rng, n)
        a, b, c = euler_from_quaternions(q)
        ys, noises = {}, {}
        for l, A in f.blocks.items():
            X = wigner_D_euler(l, a, b, c) @ A
            shape = (n,) + A.shape
            if structure is RealStructure.CRYO_REAL:
                E = rng.standard_normal(shape).transpose(0, 2, 1).reshape(-1, shape[1])
                Wt = (sigma * cryo_phase(l)) * real_basis(l).T
                e = (E @ Wt).reshape(n, shape[2], shape[1]).transpose(0, 2, 1)
            else:
                e = sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
            ys[l] = X + e
            noises[l] = e
        if debug:
            yield ys, q, noises
        else:
            yield ys


def sample_mra(f: Signal, sigma, N, structure="cryo_real", seed=None, debug=False):
    """List of MRASample; convenient for small N."""
    out = []
    for ys, q, noises in sample_mra_batches(f, sigma, N, structure, seed, debug=True):
        n = len(q)
        for i in range(n):
            y = Signal(f.spec, {l: Y[i] for l, Y in ys.items()})
            if debug:
                out.append(MRASample(y, Rotation(tuple(q[i])), Signal(f.spec, {l: e[i] for l, e in noises.items()})))
            else:
                out.append(MRASample(y))
    return out


class MomentAccumulator:
    """Running sums of y, Y^* Y and Y3^* cg(Y1, Y2) over sample batches.

    With ``structure="cryo_real"`` samples are first mapped to their real
    harmonic coordinates (phase i for odd l removed).  In those coordinates
    the coupling against conj(V_l3) is a real matrix, so every sum runs in
    real arithmetic; any part of a sample outside the structure is dropped.
    """

    SUB = 512  # samples per pass; keeps the pairwise products in cache

    def __init__(self, spec: RepSpec, table, structure="generic_complex"):
        self.spec = spec
        self.table = table
        self.real = RealStructure.parse(structure) is RealStructure.CRYO_REAL
        self.n = 0
        degs = spec.degrees
        dt = float if self.real else complex
        self.s1 = np.zeros(spec.mult(0), dt)
        self.s2 = {l: np.zeros((spec.mult(l), spec.mult(l)), dt) for l in degs}
        self.s3 = {}
        self._K = {}
        for l1 in degs:
            for l2 in degs:
                l3s = [l3 for l3 in degs if triangle(l1, l2, l3)]
                for l3 in l3s:
                    self.s3[(l1, l2, l3)] = np.zeros((spec.mult(l3), spec.mult(l1) * spec.mult(l2)), dt)
                if l3s:
                    self._K[(l1, l2)] = self._coupling(l1, l2, max(l3s))

    def _coupling(self, l1, l2, hi):
        """Rows (l3, m3) for l3 = |l1-l2|..hi, columns (m1, m2)."""
        lo = abs(l1 - l2)
        C = self.table.coupling_matrix(l1, l2)[:, : (hi + 1) ** 2 - lo**2]
        if not self.real:
            return np.ascontiguousarray(C.T)
        W12 = np.kron(real_basis(l1), real_basis(l2)) * (cryo_phase(l1) * cryo_phase(l2))
        rows = []
        for l3 in range(lo, hi + 1):
            st = (l3 - lo) * (l3 + lo)
            Ct = real_basis(l3).conj().T @ C[:, st : st + 2 * l3 + 1].T @ W12 * np.conj(cryo_phase(l3))
            rows.append(Ct.real)
        return np.vstack(rows)

    def add(self, ys):
        n = next(iter(ys.values())).shape[0]
        for s in range(0, n, self.SUB):
            self._add({l: Y[s : s + self.SUB] for l, Y in ys.items()})

    def _transposed(self, ys):
        # sample axis last so every contraction below is a contiguous GEMM
        out = {}
        for l in self.spec.degrees:
            Y = np.ascontiguousarray(ys[l].transpose(1, 2, 0))
            if self.real:
                N, R, n = Y.shape
                Y = (real_basis(l).conj().T @ Y.reshape(N, R * n)) / cryo_phase(l)
                Y = np.ascontiguousarray(Y.real).reshape(N, R, n)
            out[l] = Y
        return out

    def _add(self, ys):
        degs = self.spec.degrees
        Yt = self._transposed(ys)
        n = next(iter(Yt.values())).shape[2]
        self.n += n
        if 0 in degs:
            self.s1 += Yt[0][0].sum(axis=1)
        Yc = Yt if self.real else {l: Y.conj() for l, Y in Yt.items()}
        for l in degs:
            for m in range(2 * l + 1):
                self.s2[l] += Yc[l][m] @ Yt[l][m].T
        for (l1, l2), K in self._K.items():
            R1, R2 = self.spec.mult(l1), self.spec.mult(l2)
            N1, N2 = 2 * l1 + 1, 2 * l2 + 1
            # Z[m1, m2, r1, r2, n] = Y1[m1, r1, n] Y2[m2, r2, n]
            Z = Yt[l1][:, None, :, None, :] * Yt[l2][None, :, None, :, :]
            Z = Z.reshape(N1 * N2, R1 * R2 * n)
            if self.real:
                B = (K @ Z).reshape(-1, R1 * R2, n)
            else:
                # K is real: multiply the (re, im) float view, half the flops of complex GEMM
                B = (K @ Z.view(float)).view(complex).reshape(-1, R1 * R2, n)
            lo = abs(l1 - l2)
            for l3 in degs:
                key = (l1, l2, l3)
                if key not in self.s3:
                    continue
                start = (l3 - lo) * (l3 + lo)  # sum of 2k+1 for k in [lo, l3)
                acc = self.s3[key]
                for c in range(2 * l3 + 1):
                    acc += Yc[l3][c] @ B[start + c].T

    def raw(self) -> MomentBlocks:
        n = max(self.n, 1)
        return MomentBlocks(
            self.s1.astype(complex) / n,
            {l: G.astype(complex) / n for l, G in self.s2.items()},
            {k: M.astype(complex) / n for k, M in self.s3.items()},
        )


def noise_pseudo_covariance(l, sigma, structure):
    """E[eps eps^T] for one copy of V_l under the given noise model."""
    structure = RealStructure.parse(structure)
    if structure is RealStructure.GENERIC_COMPLEX:
        return np.zeros((2 * l + 1, 2 * l + 1), complex)
    W = real_basis(l)
    return sigma**2 * cryo_phase(l) ** 2 * (W @ W.T)


def debias(raw: MomentBlocks, sigma, spec: RepSpec, table, structure="cryo_real") -> MomentBlocks:
    """Remove the Gaussian-noise bias from raw empirical moments.

    m2 loses sigma^2 N_l on the diagonal.  m3 loses the three pairings of
    the noise with itself, each multiplied by the estimated first moment:
    (l, 0, l) and (0, l, l) blocks pick up sigma^2 N_l delta (x) m1, and the
    (l, l, 0) blocks pick up conj(m1) times the l=0 coupling of the noise
    pseudo-covariance.
    """
    structure = RealStructure.parse(structure)
    if sigma > 0 and structure is not RealStructure.CRYO_REAL:
        raise ParameterError("debiasing is derived for the real (cryo_real) noise model only")
    s2 = sigma**2
    m1 = raw.m1.copy()
    m2 = {l: G - s2 * (2 * l + 1) * np.eye(G.shape[0]) for l, G in raw.m2.items()}
    m3 = {k: M.copy() for k, M in raw.m3.items()}
    if sigma == 0 or 0 not in spec.degrees:
        return MomentBlocks(m1, m2, m3)
    R0 = spec.mult(0)
    for l in spec.degrees:
        R = spec.mult(l)
        N = 2 * l + 1
        eye = np.eye(R)
        # conj(eps3) cg(eps1, x2): pairs slot 1 with slot 3, x2 -> m1
        m3[(l, 0, l)] -= s2 * N * np.einsum("ki,j->kij", eye, m1).reshape(R, R * R0)
        # conj(eps3) cg(x1, eps2)
        m3[(0, l, l)] -= s2 * N * np.einsum("kj,i->kij", eye, m1).reshape(R, R0 * R)
        # conj(x3) cg(eps1, eps2): only the l3 = 0 component survives
        K = noise_pseudo_covariance(l, sigma, structure)
        c = float(np.einsum("ab,ab->", table.block(l, l, 0)[:, :, 0], K).real)
        m3[(l, l, 0)] -= c * np.einsum("k,ij->kij", m1.conj(), eye).reshape(R0, R * R)
    return MomentBlocks(m1, m2, m3)


def empirical_moments(batches, sigma, spec: RepSpec, table, structure="cryo_real") -> MomentBlocks:
    """Debiased empirical moments from an iterable of sample batches or MRASamples."""
    acc = MomentAccumulator(spec, table, structure)
    for item in batches:
        if isinstance(item, MRASample):
            item = {l: A[None] for l, A in item.y.blocks.items()}
        acc.add(item)
    mb = debias(acc.raw(), sigma, spec, table, structure)
    if acc.n < 100:
        mb.warnings = [f"only {acc.n} samples; moment estimates carry large variance"]
    return mb


# ---------------------------------------------------------------------------
# binary dumps

SAMPLE_MAGIC = b"BSMR"
SAMPLE_FORMAT_VERSION = 1


def dump_samples(path, spec: RepSpec, batches):
    """Write sample batches: header, then per sample every block as (re, im) f64 LE."""
    arrays = {l: [] for l in spec.degrees}
    for ys in batches:
        for l in spec.degrees:
            arrays[l].append(ys[l])
    arrays = {l: np.concatenate(v) for l, v in arrays.items()}
    N = len(next(iter(arrays.values())))
    with open(path, "wb") as fh:
        fh.write(SAMPLE_MAGIC)
        fh.write(struct.pack("<II", SAMPLE_FORMAT_VERSION, len(spec.bands)))
        for l, r in spec.bands:
            fh.write(struct.pack("<II", l, r))
        fh.write(struct.pack("<Q", N))
        flat = np.concatenate([arrays[l].reshape(N, -1) for l in spec.degrees], axis=1)
        fh.write(np.ascontiguousarray(flat).astype("<c16").tobytes())


def load_samples(path):
    data = open(path, "rb").read()
    if data[:4] != SAMPLE_MAGIC:
        raise ParameterError("not a sample dump")
    version, nb = struct.unpack("<II", data[4:12])
    if version != SAMPLE_FORMAT_VERSION:
        raise ParameterError(f"sample dump version {version} unsupported")
    off = 12
    bands = []
    for _ in range(nb):
        bands.append(struct.unpack("<II", data[off : off + 8]))
        off += 8
    (N,) = struct.unpack("<Q", data[off : off + 8])
    off += 8
    spec = RepSpec(tuple(bands))
    flat = np.frombuffer(data, dtype="<c16", offset=off).reshape(N, -1)
    out, col = {}, 0
    for l in spec.degrees:
        k = (2 * l + 1) * spec.mult(l)
        out[l] = flat[:, col : col + k].reshape(N, 2 * l + 1, spec.mult(l)).copy()
        col += k
    return spec, out
