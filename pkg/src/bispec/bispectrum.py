"""Fourier coefficients on L^2(SO(3)), bispectrum blocks and the S^1 reference.

Convention: F_l(f) = int f(h) D^l(h)^* dh, so left translation
f -> f(g^-1 .) acts by F_l -> F_l D^l(g)^*, and f(h) = sum_l N_l tr(F_l D^l(h)).
A Signal with blocks A_l embeds as the function with F_l = A_l^* (zero rows
padded when R_l < N_l), which turns act(g, .) into left translation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .errors import GenericityError, MarchingBreak, ParameterError
from .signal import Signal, _dec, _enc
from .su2 import Rotation, wigner_D

COND_LIMIT = 1e12


@dataclass(frozen=True)
class FourierCoeffs:
    blocks: dict

    def __post_init__(self):
        out = {}
        for l, F in self.blocks.items():
            F = np.array(F, dtype=complex)
            if F.shape != (2 * l + 1, 2 * l + 1):
                raise ParameterError(f"F_{l} has shape {F.shape}, expected {(2 * l + 1,) * 2}")
            out[int(l)] = F
        object.__setattr__(self, "blocks", out)

    @property
    def L(self):
        return max(self.blocks)

    def __getitem__(self, l):
        return self.blocks[l]

    @classmethod
    def random(cls, L, seed=None):
        rng = np.random.default_rng(seed)
        return cls({l: rng.standard_normal((2 * l + 1,) * 2) + 1j * rng.standard_normal((2 * l + 1,) * 2)
                    for l in range(L + 1)})

    def evaluate(self, D):
        """f at group elements given their Wigner matrices {l: (n, N, N)}."""
        return sum((2 * l + 1) * np.einsum("ab,nba->n", F, D[l]) for l, F in self.blocks.items())


def translate(F: FourierCoeffs, g: Rotation) -> FourierCoeffs:
    """Coefficients of h -> f(g^-1 h)."""
    return FourierCoeffs({l: M @ wigner_D(l, g).conj().T for l, M in F.blocks.items()})


def signal_to_fourier(f: Signal) -> FourierCoeffs:
    blocks = {}
    for l in range(f.spec.L + 1):
        N = 2 * l + 1
        F = np.zeros((N, N), complex)
        if l in f.spec.degrees:
            A = f[l]
            if A.shape[1] > N:
                raise ParameterError(f"multiplicity {A.shape[1]} exceeds {N} at l={l}; no L^2(SO(3)) embedding")
            F[: A.shape[1]] = A.conj().T
        blocks[l] = F
    return FourierCoeffs(blocks)


def _check_band(F, l1, l2):
    if l1 + l2 > F.L or min(l1, l2) < 0:
        raise ParameterError(f"pair ({l1}, {l2}) exceeds band limit {F.L}")


def tensor_fourier(F: FourierCoeffs, l1, l2, table):
    """F(V_l1 (x) V_l2) = C (+)_l3 F_l3 C^T with C the real coupling matrix."""
    _check_band(F, l1, l2)
    C = table.coupling_matrix(l1, l2)
    mid = block_diag(*[F[l3] for l3 in range(abs(l1 - l2), l1 + l2 + 1)])
    return C @ mid @ C.T


def bispectrum_block(F: FourierCoeffs, l1, l2, table):
    return np.kron(F[l1], F[l2]) @ tensor_fourier(F, l1, l2, table).conj().T


def bispectrum(F: FourierCoeffs, table):
    return {
        (l1, l2): bispectrum_block(F, l1, l2, table)
        for l1 in range(F.L + 1)
        for l2 in range(F.L + 1)
        if l1 + l2 <= F.L
    }


def bispectrum_to_json(blocks):
    return {f"{l1},{l2}": _enc(B) for (l1, l2), B in sorted(blocks.items())}


def bispectrum_from_json(d):
    return {tuple(int(x) for x in k.split(",")): _dec(v) for k, v in d.items()}


def invert_block(F1, F2, a2, table):
    """All F_l3 from one bispectrum block and the two factor coefficients.

    Solves (F1 (x) F2) X = a2 for X = F(V (x) W)^*, then undoes the coupling
    and reads the diagonal blocks.
    """
    F1, F2, a2 = (np.asarray(x, dtype=complex) for x in (F1, F2, a2))
    l1, l2 = (F1.shape[0] - 1) // 2, (F2.shape[0] - 1) // 2
    for l, M in ((l1, F1), (l2, F2)):
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise GenericityError(f"F_{l} is singular (condition number {cond:.3g})", l=l, cond=float(cond))
    X = np.linalg.solve(np.kron(F1, F2), a2)
    C = table.coupling_matrix(l1, l2)
    mid = C.T @ X.conj().T @ C
    out, off = {}, 0
    for l3 in range(abs(l1 - l2), l1 + l2 + 1):
        n = 2 * l3 + 1
        out[l3] = mid[off : off + n, off : off + n]
        off += n
    return out


# ---------------------------------------------------------------------------
# S^1


@dataclass(frozen=True)
class S1Signal:
    """Coefficients f_n for n = -b..b, stored at index n + b."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if len(c) % 2 == 0:
            raise ParameterError("S1Signal needs an odd number of coefficients (n = -b..b)")
        object.__setattr__(self, "coeffs", c)

    @property
    def band(self):
        return (len(self.coeffs) - 1) // 2

    def __getitem__(self, n):
        b = self.band
        return self.coeffs[n + b] if -b <= n <= b else 0j

    @classmethod
    def from_dict(cls, d, band=None):
        b = band if band is not None else max(abs(n) for n in d)
        c = np.zeros(2 * b + 1, complex)
        for n, v in d.items():
            c[n + b] = v
        return cls(c)

    @classmethod
    def random(cls, band, seed=None):
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal(2 * band + 1) + 1j * rng.standard_normal(2 * band + 1))

    def rotate(self, theta):
        n = np.arange(-self.band, self.band + 1)
        return S1Signal(self.coeffs * np.exp(1j * n * theta))


def s1_bispectrum(f: S1Signal):
    b = f.band
    return {
        (k, l): f[k] * f[l] * np.conj(f[k + l])
        for k in range(-b, b + 1)
        for l in range(-b, b + 1)
        if abs(k + l) <= b
    }


def s1_march(bis, f0=None, f1=None, band=None, rel_tol=1e-12):
    """Recover f from its bispectrum, fixing the phase of f_1.

    f0 defaults to the cube-root reading of b(0,0) and f1 to the positive
    real number with |f1|^2 = b(0,1)/f0.  Positive frequencies march by
    f_{n+1} = conj(b(1,n) / (f1 f_n)); negative ones start from b(1,-1)
    (or b(-1,2) when f0 = 0) and march with the mirror recursion.
    """
    if band is None:
        band = max(max(abs(k), abs(l)) for k, l in bis)
    scale = max(abs(v) for v in bis.values()) ** (1 / 3) if bis else 0.0
    tiny = rel_tol * max(scale, 1e-300)
    if f0 is None:
        z = bis[(0, 0)]
        f0 = z / abs(z) ** (2 / 3) if abs(z) > tiny**3 else 0j
    if f1 is None:
        if abs(f0) <= tiny:
            raise ParameterError("f1 must be supplied when f0 = 0")
        f1 = np.sqrt(abs(bis[(0, 1)] / f0))
    if abs(f1) <= tiny:
        raise MarchingBreak("f_1 = 0; marching cannot start", index=1)
    out = {0: complex(f0), 1: complex(f1)}
    for n in range(1, band):
        if abs(out[n]) <= tiny:
            raise MarchingBreak(f"f_{n} vanishes; marching breaks", index=n)
        out[n + 1] = np.conj(bis[(1, n)] / (f1 * out[n]))
    if abs(out[band]) <= tiny and band >= 2:
        raise MarchingBreak(f"f_{band} vanishes", index=band)
    if band >= 1:
        if abs(f0) > tiny:
            fm1 = bis[(1, -1)] / (f1 * np.conj(f0))
        elif band >= 2:
            fm1 = bis[(-1, 2)] / (out[2] * np.conj(f1))
        else:
            raise MarchingBreak("f_0 = 0 and band 1 leaves f_-1 undetermined", index=0)
        out[-1] = fm1
        for n in range(1, band):
            if abs(out[-n]) <= tiny:
                raise MarchingBreak(f"f_{-n} vanishes; marching breaks", index=-n)
            out[-n - 1] = np.conj(bis[(-1, -n)] / (fm1 * out[-n]))
    return S1Signal.from_dict(out, band)


def s1_orbit_distance(f: S1Signal, h: S1Signal):
    """min over theta of ||rotate(f, theta) - h|| / ||f||, and the argmin.

    Maximizes the correlation p(t) = Re sum conj(h_n) f_n e^{int}: a fine
    grid brackets the global maximum, Newton polishes it to roundoff.
    """
    if f.band != h.band:
        raise ParameterError("signals have different bands")
    n = np.arange(-f.band, f.band + 1)
    w = np.conj(h.coeffs) * f.coeffs
    grid = np.linspace(0, 2 * np.pi, 64 * max(f.band, 1), endpoint=False)
    t = grid[int(np.argmax((np.exp(1j * np.outer(grid, n)) @ w).real))]
    for _ in range(50):
        e = w * np.exp(1j * n * t)
        d1, d2 = -(n * e).imag.sum(), -(n * n * e).real.sum()
        if d2 >= 0:
            break
        step = -d1 / d2
        t += step
        if abs(step) < 1e-16:
            break
    scale = np.linalg.norm(f.coeffs) or 1.0
    d = np.linalg.norm(f.rotate(t).coeffs - h.coeffs) / scale
    return float(d), float(np.mod(t, 2 * np.pi))


def weight_zero_monomials(freqs, max_degree=3):
    """Monomials in v_k and conj(v_k) (k in freqs) of degree <= max_degree and weight 0.

    Each monomial is a sorted tuple of (frequency, conjugated) factors; these
    span the S^1-invariant polynomials of that degree.
    """
    letters = [(k, False) for k in freqs] + [(k, True) for k in freqs]
    out = []
    for d in range(1, max_degree + 1):
        for combo in itertools.combinations_with_replacement(letters, d):
            if sum(-k if c else k for k, c in combo) == 0:
                out.append(combo)
    return out


def evaluate_monomials(f: S1Signal, monomials):
    vals = {}
    for mono in monomials:
        v = 1 + 0j
        for k, c in mono:
            v *= np.conj(f[k]) if c else f[k]
        vals[mono] = v
    return vals


def counterexample_pair():
    """Two signals on V_0 + V_1 + V_3 with equal invariants of degree <= 3 but different orbits."""
    a = S1Signal.from_dict({0: 1, 1: 1, 3: 1}, band=3)
    b = S1Signal.from_dict({0: 1, 1: 1, 3: 1j}, band=3)
    return a, b
