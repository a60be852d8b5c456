import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import block_diag

from bispec.errors import ParameterError
from bispec.su2 import (
    CGTable,
    Rotation,
    clebsch_gordan,
    euler_from_quaternions,
    from_cartesian,
    get_table,
    quaternions_from_euler,
    real_basis,
    to_cartesian,
    wigner_D,
    wigner_D_euler,
    wigner_d_small,
)

seeds = st.integers(0, 2**32 - 1)


def rot(seed):
    return Rotation.random(np.random.default_rng(seed))


# -- rotations ---------------------------------------------------------------


@given(seeds)
def test_euler_roundtrip(seed):
    g = rot(seed)
    a, b, c = g.euler
    assert 0 <= a < 2 * np.pi and 0 <= b <= np.pi and 0 <= c < 2 * np.pi
    assert Rotation.from_euler(a, b, c).angle_to(g) < 1e-7
    assert abs(np.linalg.norm(g.quat) - 1) < 1e-12


def test_quaternion_euler_batch():
    q = np.random.default_rng(0).standard_normal((50, 4))
    q /= np.linalg.norm(q, axis=1)[:, None]
    q2 = quaternions_from_euler(*euler_from_quaternions(q))
    assert np.allclose(np.abs(np.sum(q * q2, axis=1)), 1, atol=1e-12)


@given(seeds, seeds)
def test_composition_matches_matrices(s1, s2):
    g, h = rot(s1), rot(s2)
    assert np.allclose((g * h).as_matrix(), g.as_matrix() @ h.as_matrix(), atol=1e-12)
    assert np.allclose((g * g.inverse()).as_matrix(), np.eye(3), atol=1e-12)


# -- Wigner matrices ---------------------------------------------------------


def test_small_d_examples():
    assert np.allclose(wigner_d_small(0, 1.234), [[1.0]])
    assert np.allclose(wigner_d_small(1, 0.0), np.eye(3))
    beta = np.random.default_rng(1).uniform(0, np.pi, 20)
    d = wigner_d_small(1, beta)
    c, s = np.cos(beta), np.sin(beta)
    assert np.allclose(d[:, 1, 1], c, atol=1e-14)
    assert np.allclose(d[:, 2, 2], (1 + c) / 2, atol=1e-14)
    assert np.allclose(d[:, 2, 1], -s / np.sqrt(2), atol=1e-14)
    with pytest.raises(ParameterError):
        wigner_d_small(-1, 0.3)


@pytest.mark.parametrize("l", range(0, 8))
def test_small_d_orthogonal(l):
    d = wigner_d_small(l, np.linspace(0, np.pi, 7))
    eye = np.eye(2 * l + 1)
    for M in d:
        assert np.abs(M @ M.T - eye).max() < 1e-12


def test_identity_and_batching():
    for l in range(5):
        assert np.allclose(wigner_D(l, Rotation.identity()), np.eye(2 * l + 1))
    a, b, c = np.random.default_rng(2).uniform(0, 3, (3, 4))
    batch = wigner_D_euler(3, a, b, c)
    for i in range(4):
        assert np.allclose(batch[i], wigner_D_euler(3, a[i], b[i], c[i]))


def test_homomorphism_fifty_pairs():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        g, h = Rotation.random(rng), Rotation.random(rng)
        for l in (1, 2, 5):
            worst = max(worst, np.abs(wigner_D(l, g) @ wigner_D(l, h) - wigner_D(l, g * h)).max())
    assert worst < 1e-11


@given(seeds, st.integers(0, 6))
def test_unitary(seed, l):
    D = wigner_D(l, rot(seed))
    assert np.abs(D @ D.conj().T - np.eye(2 * l + 1)).max() < 1e-12


@given(seeds)
def test_real_basis_d1_is_rotation(seed):
    g = rot(seed)
    Dr = real_basis(1).conj().T @ wigner_D(1, g) @ real_basis(1)
    assert np.abs(Dr.imag).max() < 1e-13
    assert abs(np.linalg.det(Dr.real) - 1) < 1e-12
    A = np.random.default_rng(seed).standard_normal((3, 2))
    assert np.allclose(to_cartesian(wigner_D(1, g) @ A), g.as_matrix() @ to_cartesian(A), atol=1e-12)
    assert np.allclose(from_cartesian(to_cartesian(A)), A)


@pytest.mark.parametrize("l", range(0, 6))
def test_real_basis_makes_D_real(l):
    W = real_basis(l)
    assert np.allclose(W @ W.conj().T, np.eye(2 * l + 1))
    Dr = W.conj().T @ wigner_D(l, rot(l)) @ W
    assert np.abs(Dr.imag).max() < 1e-12


# -- Clebsch-Gordan ----------------------------------------------------------


def test_cg_closed_forms():
    assert clebsch_gordan(3, 0, 0, 0, 3, 0) == pytest.approx(1.0, abs=1e-15)
    assert clebsch_gordan(1, 0, 1, 0, 2, 0) == pytest.approx(np.sqrt(2 / 3), abs=1e-15)
    assert clebsch_gordan(1, 1, 1, -1, 0, 0) == pytest.approx(1 / np.sqrt(3), abs=1e-15)
    assert clebsch_gordan(1, 1, 1, 1, 1, 1) == 0.0  # m1 + m2 != m3
    assert clebsch_gordan(1, 0, 1, 0, 3, 0) == 0.0  # triangle


def test_cg_against_quadrature(rule_for):
    # |<l1 m1 l2 m2|l3 m3>|^2 = N3 * int D1_{m1 m1} D2_{m2 m2} conj(D3_{m3 m3})
    rule = rule_for(2, 3)
    for (l1, m1, l2, m2, l3) in [(1, 0, 1, 0, 2), (1, 1, 1, -1, 0), (2, 1, 1, 0, 2), (2, -1, 2, 2, 3)]:
        m3 = m1 + m2
        v = rule.integrate(
            rule.D(l1)[:, m1 + l1, m1 + l1] * rule.D(l2)[:, m2 + l2, m2 + l2] * rule.D(l3)[:, m3 + l3, m3 + l3].conj()
        )
        assert abs(v.imag) < 1e-13
        assert clebsch_gordan(l1, m1, l2, m2, l3, m3) ** 2 == pytest.approx((2 * l3 + 1) * v.real, abs=1e-12)


def test_cg_orthogonality(table):
    for l1 in range(4):
        for l2 in range(4):
            C = table.coupling_matrix(l1, l2)
            assert np.abs(C.T @ C - np.eye(C.shape[0])).max() < 1e-12


def test_coupling_examples(table):
    assert np.allclose(table.coupling_matrix(0, 3), np.eye(7))
    C = table.coupling_matrix(1, 1)
    assert C.shape == (9, 9)
    rng = np.random.default_rng(4)
    for _ in range(20):
        g = Rotation.random(rng)
        rhs = C @ block_diag(*[wigner_D(l, g) for l in (0, 1, 2)]) @ C.T
        assert np.abs(np.kron(wigner_D(1, g), wigner_D(1, g)) - rhs).max() < 1e-11


def test_table_range_checked():
    table = CGTable.build(5)
    with pytest.raises(ParameterError):
        table.coupling_matrix(6, 0)
    assert not table.block(1, 1, 3).any()


# -- cache -------------------------------------------------------------------


def test_cache_roundtrip(tmp_path):
    t = CGTable.build(3)
    p = tmp_path / "cg.bin"
    t.save(p)
    t2 = CGTable.load(p)
    assert t2.max_l == 3
    for k in t.coupling:
        assert np.array_equal(t.coupling[k], t2.coupling[k])


def test_cache_version_mismatch(tmp_path):
    p = tmp_path / "cg.bin"
    CGTable.build(1).save(p)
    raw = bytearray(p.read_bytes())
    raw[4] = 99
    p.write_bytes(bytes(raw))
    assert CGTable.load(p) is None
    assert CGTable.load(tmp_path / "missing.bin") is None


def test_get_table_uses_env_cache(tmp_path, monkeypatch):
    from bispec import su2

    p = tmp_path / "env.bin"
    monkeypatch.setenv("BISPEC_CG_CACHE", str(p))
    monkeypatch.setattr(su2, "_TABLES", {})
    t = get_table(2)
    assert p.exists() and t.max_l == 2
    monkeypatch.setattr(su2, "_TABLES", {})
    assert get_table(2).coupling[(2, 2)].tobytes() == t.coupling[(2, 2)].tobytes()
