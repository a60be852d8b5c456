import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bispec.bispectrum import (
    FourierCoeffs,
    S1Signal,
    bispectrum,
    bispectrum_block,
    bispectrum_from_json,
    bispectrum_to_json,
    counterexample_pair,
    evaluate_monomials,
    invert_block,
    s1_bispectrum,
    s1_march,
    s1_orbit_distance,
    signal_to_fourier,
    tensor_fourier,
    translate,
    weight_zero_monomials,
)
from bispec.errors import GenericityError, MarchingBreak, ParameterError
from bispec.signal import RepSpec, act, random_signal
from bispec.su2 import Rotation

seeds = st.integers(0, 2**32 - 1)


def test_shapes_checked():
    with pytest.raises(ParameterError):
        FourierCoeffs({1: np.eye(2)})


def test_tensor_fourier_trivial_and_band(table):
    F = FourierCoeffs.random(3, seed=0)
    assert np.allclose(tensor_fourier(F, 2, 0, table), F[2])
    with pytest.raises(ParameterError):
        tensor_fourier(F, 2, 2, table)


def test_tensor_fourier_unitary(table):
    rng = np.random.default_rng(0)
    F = FourierCoeffs({l: np.linalg.qr(rng.standard_normal((2 * l + 1,) * 2))[0] for l in range(4)})
    T = tensor_fourier(F, 1, 2, table)
    assert np.abs(T @ T.conj().T - np.eye(15)).max() < 1e-12


def test_tensor_fourier_against_quadrature(table, rule_for):
    # F(V (x) W) is the transform of f against the rotation kron(D1, D2)
    F = FourierCoeffs.random(2, seed=3)
    rule = rule_for(2, 2)
    vals = F.evaluate({l: rule.D(l) for l in range(3)})
    for l1, l2 in [(1, 1), (0, 2), (1, 0)]:
        K = np.einsum("nab,ncd->nacbd", rule.D(l1), rule.D(l2)).reshape(len(rule), (2 * l1 + 1) * (2 * l2 + 1), -1)
        oracle = np.einsum("n,n,nji->ij", rule.weights, vals, K.conj())
        assert np.abs(oracle - tensor_fourier(F, l1, l2, table)).max() < 1e-12


def test_translation_matches_signal_action():
    f = random_signal(RepSpec(((0, 1), (1, 3), (2, 4))), seed=2)
    g = Rotation.random(np.random.default_rng(0))
    lhs, rhs = signal_to_fourier(act(g, f)), translate(signal_to_fourier(f), g)
    for l in range(3):
        assert np.abs(lhs[l] - rhs[l]).max() < 1e-13
    with pytest.raises(ParameterError):
        signal_to_fourier(random_signal(RepSpec(((1, 4),)), seed=0))


def test_block_l0(table):
    F = FourierCoeffs.random(3, seed=1)
    F = FourierCoeffs({**F.blocks, 0: np.ones((1, 1))})
    for l in range(4):
        assert np.abs(bispectrum_block(F, l, 0, table) - F[l] @ F[l].conj().T).max() < 1e-12
    zero = FourierCoeffs({l: np.zeros((2 * l + 1,) * 2) for l in range(3)})
    assert not bispectrum_block(zero, 1, 1, table).any()


@given(seeds)
def test_bispectrum_invariant(seed):
    from bispec.su2 import get_table

    table = get_table(5)
    F = FourierCoeffs.random(4, seed=seed)
    g = Rotation.random(np.random.default_rng(seed))
    a, b = bispectrum(F, table), bispectrum(translate(F, g), table)
    assert max(np.abs(a[k] - b[k]).max() for k in a) < 1e-10


def test_invert_block_roundtrip(table):
    worst = 0.0
    for seed in range(20):
        F = FourierCoeffs.random(4, seed=seed)
        for (l1, l2), B in bispectrum(F, table).items():
            for l3, X in invert_block(F[l1], F[l2], B, table).items():
                worst = max(worst, np.abs(X - F[l3]).max())
    assert worst < 1e-9


def test_invert_identity(table):
    F = FourierCoeffs({**FourierCoeffs.random(2, seed=0).blocks, 1: 2 * np.eye(3)})
    a2 = bispectrum_block(F, 1, 1, table)
    out = invert_block(2 * np.eye(3), 2 * np.eye(3), a2, table)
    # (F1 (x) F2)^-1 = I / 4, so the blocks are read straight off a2
    direct = table.coupling_matrix(1, 1).T @ (a2 / 4).conj().T @ table.coupling_matrix(1, 1)
    assert np.allclose(out[0], direct[:1, :1]) and np.allclose(out[2], F[2])


def test_invert_singular(table):
    F = FourierCoeffs.random(2, seed=0)
    S = F[1].copy()
    S[2] = S[0]
    with pytest.raises(GenericityError) as e:
        invert_block(S, F[1], bispectrum_block(F, 1, 1, table), table)
    assert e.value.info["l"] == 1 and e.value.info["cond"] > 1e12


def test_json_keys(table):
    blocks = bispectrum(FourierCoeffs.random(2, seed=0), table)
    d = json.loads(json.dumps(bispectrum_to_json(blocks)))
    assert "1,1" in d
    back = bispectrum_from_json(d)
    assert all(np.array_equal(back[k], blocks[k]) for k in blocks)


# -- S^1 ---------------------------------------------------------------------


def test_s1_basics():
    f = S1Signal.random(3, seed=0)
    b = s1_bispectrum(f)
    assert b[(0, 0)] == pytest.approx(f[0] * f[0] * np.conj(f[0]))
    assert (3, 1) not in b
    with pytest.raises(ParameterError):
        S1Signal(np.ones(4))


@given(seeds, st.floats(0, 2 * np.pi))
def test_s1_translation_invariance(seed, theta):
    f = S1Signal.random(5, seed=seed)
    a, b = s1_bispectrum(f), s1_bispectrum(f.rotate(theta))
    assert max(abs(a[k] - b[k]) for k in a) < 1e-10


def test_s1_march_ones():
    f = S1Signal(np.ones(9))
    h = s1_march(s1_bispectrum(f))
    assert np.allclose(h.coeffs, 1)


@given(seeds)
def test_s1_march_roundtrip(seed):
    f = S1Signal.random(8, seed=seed)
    h = s1_march(s1_bispectrum(f))
    assert s1_orbit_distance(f, h)[0] <= 1e-12 * max(1.0, np.abs(f.coeffs).max() / np.abs(f.coeffs).min())


def test_s1_march_break_index():
    c = {n: 1.0 for n in range(-3, 4)}
    c[2] = 0.0
    with pytest.raises(MarchingBreak) as e:
        s1_march(s1_bispectrum(S1Signal.from_dict(c)))
    assert e.value.index == 2


def test_s1_zero_f0_uses_alternative_start():
    f = S1Signal.random(4, seed=1)
    c = f.coeffs.copy()
    c[4] = 0
    f = S1Signal(c)
    h = s1_march(s1_bispectrum(f), f0=0, f1=abs(f[1]))
    assert s1_orbit_distance(f, h)[0] < 1e-12


def test_counterexample():
    a, b = counterexample_pair()
    mons = weight_zero_monomials([0, 1, 3], 3)
    # only v0, |v1|^2, |v3|^2 and their products survive: none couple v3 to v1
    assert all({k for k, _ in m} != {1, 3} for m in mons)
    va, vb = evaluate_monomials(a, mons), evaluate_monomials(b, mons)
    assert max(abs(va[m] - vb[m]) for m in mons) <= 1e-12
    assert s1_orbit_distance(a, b)[0] > 0.1
