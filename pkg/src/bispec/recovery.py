"""Orbit recovery from the third moment.

Pipeline: read m1 and the Gram blocks off m3, factor the l=1 Gram matrix,
remove the residual ambiguity of that factor using the (1,1,1) block, then
march l = 2..L by linear least squares against the (1, l-1, l) blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BispecError, GenericityError, InconsistencyError, MarchingBreak
from .moments import MomentBlocks, cg_project, moments, recover_m1_m2_from_m3
from .signal import (
    RealStructure,
    RepSpec,
    Signal,
    cryo_phase,
    distance_up_to_group,
    project_structure,
)
from .su2 import Rotation, from_cartesian, real_basis, to_cartesian

RANK_RTOL = 1e-10


@dataclass
class RecoveryReport:
    recovered: Signal
    structure: str
    sign_choice: str | None = None
    sign_residuals: tuple | None = None
    rank_diagnostics: dict = field(default_factory=dict)
    steps: list = field(default_factory=list)
    moment_residual: float | None = None
    align: Rotation | None = None
    rel_error: float | None = None

    def to_json(self):
        return {
            "format_version": 1,
            "structure": self.structure,
            "sign_choice": self.sign_choice,
            "sign_residuals": None if self.sign_residuals is None else [float(x) for x in self.sign_residuals],
            "rank_diagnostics": {str(l): d for l, d in sorted(self.rank_diagnostics.items())},
            "steps": [[int(l), float(r)] for l, r in self.steps],
            "moment_residual": self.moment_residual,
            "align": None if self.align is None else self.align.to_json(),
            "rel_error": self.rel_error,
            "recovered": self.recovered.to_json(),
        }


def factor_gram(G1, structure="generic_complex"):
    """A 3 x R1 factor of the l=1 Gram matrix from its top three eigenpairs.

    For cryo_real the factor is real in the real harmonic basis, so the
    remaining ambiguity is O(3) instead of U(3).
    """
    structure = RealStructure.parse(structure)
    G1 = np.asarray(G1, dtype=complex)
    if G1.shape[0] < 3:
        raise GenericityError(f"l=1 multiplicity {G1.shape[0]} < 3; Gram factor is not unique enough")
    G1 = 0.5 * (G1 + G1.conj().T)
    if structure is RealStructure.CRYO_REAL:
        lam, V = np.linalg.eigh(G1.real)
    else:
        lam, V = np.linalg.eigh(G1)
    lam, V = lam[::-1][:3], V[:, ::-1][:, :3]
    if lam[0] <= 0 or lam[2] <= RANK_RTOL * lam[0]:
        raise GenericityError(f"l=1 Gram matrix has rank < 3 (eigenvalues {lam})", l=1)
    Y = np.sqrt(lam)[:, None] * V.conj().T
    if structure is RealStructure.CRYO_REAL:
        return real_basis(1) @ (cryo_phase(1) * Y)
    return Y


def predicted_111(A1, table):
    return A1.conj().T @ cg_project(A1, A1, 1, table)


def resolve_sign(A1, m3_111, table, tol=1e-8, scale=None):
    """Pick the sign of a real-basis factor by testing both against the (1,1,1) block.

    The block is cubic with one conjugated slot, so it flips sign with A1.
    Returns (signed A1, "+" or "-", (winner residual, loser residual)).
    """
    M = np.asarray(m3_111)
    P = predicted_111(A1, table)
    if scale is None:
        scale = np.linalg.norm(A1) ** 3
    if np.linalg.norm(M) <= 1e-8 * scale:
        raise GenericityError("(1,1,1) block vanishes; sign is undetermined")
    nM = np.linalg.norm(M)
    rp, rm = np.linalg.norm(P - M) / nM, np.linalg.norm(P + M) / nM
    sign = "+" if rp <= rm else "-"
    win, lose = min(rp, rm), max(rp, rm)
    if win > tol:
        raise InconsistencyError(f"neither sign reproduces the (1,1,1) block (residuals {rp:.3g}, {rm:.3g})")
    return (A1 if sign == "+" else -A1), sign, (win, lose)


def _cross_constant(table):
    """kappa with to_cartesian(cg_project(a, b, 1)) = kappa * (to_cartesian(a) x to_cartesian(b))."""
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((3, 1)), rng.standard_normal((3, 1))
    lhs = to_cartesian(cg_project(a, b, 1, table)).ravel()
    rhs = np.cross(to_cartesian(a).ravel(), to_cartesian(b).ravel())
    return lhs @ rhs.conj() / (rhs @ rhs.conj())


def resolve_unitary(A1, m3_111, table, tol=1e-8):
    """Remove the U(3) ambiguity of a complex Gram factor up to SO(3).

    With X the Cartesian form of the true l=1 block and Xt = w X for unknown
    unitary w, the (1,1,1) block is linear in S = conj(det w) w w^T:
    M[k, (i, j)] = kappa xt_k^* S (xt_i x xt_j).  Solving for S gives
    P = w w^T = S / det S and det w = conj(det S); P is a symmetric unitary,
    so P = O diag(e^{i phi}) O^T with O real and w is fixed up to a real
    orthogonal factor whose determinant the det condition pins to +1.
    """
    M = np.asarray(m3_111)
    Xt = to_cartesian(A1)
    R = Xt.shape[1]
    kappa = _cross_constant(table)
    cross = np.cross(Xt[:, :, None], Xt[:, None, :], axis=0).reshape(3, R * R)
    # M[k, q] = kappa sum_ab conj(Xt[a, k]) S[a, b] cross[b, q]
    design = kappa * np.einsum("ak,bq->kqab", Xt.conj(), cross).reshape(R * R * R, 9)
    s, res, rank, sv = np.linalg.lstsq(design, M.reshape(-1), rcond=None)
    if rank < 9:
        raise GenericityError("(1,1,1) block does not determine the unitary ambiguity", rank=int(rank))
    S = s.reshape(3, 3)
    S = 0.5 * (S + S.T)
    dS = np.linalg.det(S)
    if abs(dS) <= 1e-12:
        raise GenericityError("degenerate (1,1,1) block; unitary ambiguity not resolved")
    P = S / dS
    _, O = np.linalg.eigh(P.real + 0.5377 * P.imag)
    phases = np.angle(np.diag(O.T @ P @ O))
    w = O @ np.diag(np.exp(0.5j * phases))
    target = np.conj(dS) / abs(dS)
    if abs(np.linalg.det(w) - target) > abs(-np.linalg.det(w) - target):
        w = w @ np.diag([1.0, 1.0, -1.0])
    X = w.conj().T @ Xt
    out = from_cartesian(X)
    resid = np.linalg.norm(predicted_111(out, table) - M) / max(np.linalg.norm(M), 1e-300)
    if resid > tol:
        raise InconsistencyError(f"unitary correction leaves (1,1,1) residual {resid:.3g}")
    return out, resid


def frequency_march(m3, A0, A1, spec: RepSpec, table, structure="generic_complex", tol=1e-8):
    """Solve for A_2..A_L from the (1, l-1, l) blocks, given A_0 and A_1.

    Returns (signal, steps, rank_diagnostics).
    """
    structure = RealStructure.parse(structure)
    blocks = {}
    if 0 in spec.degrees:
        blocks[0] = np.asarray(A0, dtype=complex).reshape(1, -1)
    blocks[1] = np.asarray(A1, dtype=complex)
    steps, diag = [], {}
    for l in range(2, spec.L + 1):
        if spec.mult(l) == 0:
            raise MarchingBreak(f"degree {l} absent; marching needs every l <= L", index=l)
        B = cg_project(blocks[1], blocks[l - 1], l, table)
        sv = np.linalg.svd(B, compute_uv=False)
        rank = int((sv > RANK_RTOL * sv[0]).sum()) if sv.size and sv[0] > 0 else 0
        diag[l] = {
            "rank": rank,
            "needed": 2 * l + 1,
            "sigma_max": float(sv[0]) if sv.size else 0.0,
            "sigma_min": float(sv[-1]) if sv.size else 0.0,
            "cond": float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf"),
        }
        if rank < 2 * l + 1:
            raise MarchingBreak(
                f"B block at l={l} has rank {rank} < {2 * l + 1} (R1*R{l - 1} = {B.shape[1]})",
                index=l,
                rank=rank,
            )
        M = np.asarray(m3[(1, l - 1, l)])
        rhs = M.conj().T
        Al, *_ = np.linalg.lstsq(B.conj().T, rhs, rcond=None)
        resid = float(np.linalg.norm(B.conj().T @ Al - rhs) / max(np.linalg.norm(rhs), 1e-300))
        steps.append((l, resid))
        if resid > tol:
            raise InconsistencyError(f"marching residual {resid:.3g} at l={l} exceeds {tol:g}", l=l)
        blocks[l] = Al
        if structure is RealStructure.CRYO_REAL:
            W = real_basis(l)
            ph = cryo_phase(l)
            blocks[l] = W @ (ph * np.real(W.conj().T @ Al / ph))
    return Signal(spec, blocks), steps, diag


def _tag(stage, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except BispecError as e:
        if e.stage is None:
            e.stage = stage
        raise


def recover_orbit(m3, spec: RepSpec, structure, table, truth: Signal | None = None, tol=1e-8) -> RecoveryReport:
    """Recover a signal from its third moment.

    ``m3`` is a MomentBlocks or a plain dict of m3 blocks.  With ``truth``
    given, the report carries the registered relative error.  Pass
    ``tol=np.inf`` for noisy (empirical) moments: consistency checks are
    skipped and the cryo structure is enforced by projection.
    """
    structure = RealStructure.parse(structure)
    if isinstance(m3, MomentBlocks):
        m3 = m3.m3
    if spec.mult(1) < 3:
        raise GenericityError(f"l=1 multiplicity {spec.mult(1)} < 3: Gram factor has rank < 3", stage="factor_gram")
    a0, m2 = _tag("recover_m1_m2", recover_m1_m2_from_m3, m3, spec)
    G1 = m2[1].real if structure is RealStructure.CRYO_REAL else m2[1]
    A1 = _tag("factor_gram", factor_gram, G1, structure)
    M111 = m3[(1, 1, 1)]
    report = RecoveryReport(recovered=None, structure=structure.value)
    if structure is RealStructure.CRYO_REAL:
        scale = np.trace(G1).real ** 1.5
        A1, sign, res = _tag("resolve_sign", resolve_sign, A1, M111, table, tol=tol, scale=scale)
        report.sign_choice, report.sign_residuals = sign, res
    else:
        A1, res = _tag("resolve_unitary", resolve_unitary, A1, M111, table, tol=tol)
        report.sign_residuals = (res,)
    f, steps, diag = _tag("frequency_march", frequency_march, m3, a0, A1, spec, table, structure, tol)
    if structure is RealStructure.CRYO_REAL:
        f = project_structure(f, structure)
    report.recovered, report.steps, report.rank_diagnostics = f, steps, diag
    pred = moments(f, table).m3
    num = np.sqrt(sum(np.linalg.norm(pred[k] - m3[k]) ** 2 for k in pred))
    den = np.sqrt(sum(np.linalg.norm(m3[k]) ** 2 for k in pred))
    report.moment_residual = float(num / max(den, 1e-300))
    if np.isfinite(tol) and report.moment_residual > tol:
        raise InconsistencyError(f"recovered signal misses the input moments by {report.moment_residual:.3g}",
                                 stage="verify")
    if truth is not None:
        g, err = _tag("register", distance_up_to_group, f, truth)
        report.align, report.rel_error = g, float(err)
    return report
