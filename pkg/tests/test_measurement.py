from itertools import combinations

import numpy as np
import pytest

from dyntomo.algebra import DimensionError
from dyntomo.dynamics import PAULI
from dyntomo.measurement import (
    M0,
    M0_CONJUGATES,
    M1,
    M1_TILDE,
    M2,
    M2_TILDE,
    Effect,
    InvalidProbability,
    MeasurementError,
    NotAnEffect,
    NotAPovm,
    OperatorSet,
    Povm,
    born_probability,
    builtin,
    is_ic,
    is_povm,
    is_sic,
    probabilities,
    qutrit_sic_vectors,
    sic_overlaps,
)
from dyntomo.states import make_density, pure_state, random_density


def conj_set(p):
    return OperatorSet.from_matrices([s @ p @ s for s in PAULI])


def test_is_povm_examples():
    assert is_povm(OperatorSet.from_matrices([M1, M1_TILDE, M2, M2_TILDE])).ok
    assert is_povm(OperatorSet.from_matrices([M0, *M0_CONJUGATES])).ok
    check = is_povm(OperatorSet.from_matrices([M1, M2]))
    assert not check.ok
    # off-diagonal of M1 + M2 is 1/6 + 1/7 + i/10
    assert check.residual == pytest.approx(max(abs(1 / 6 + 1 / 7 + 0.1j), 1 - (1 / 5 + 3 / 10), 1 - (1 / 3 + 1 / 6)))


def test_is_ic_examples():
    sic = builtin("sic_qubit")
    assert is_ic(sic)
    assert not is_ic(conj_set(sic[1].mat))
    assert is_ic(conj_set(sic[2].mat))
    assert is_ic(conj_set(sic[3].mat))


def test_is_sic_examples():
    q2, q3 = builtin("sic_qubit"), builtin("sic_qutrit")
    assert is_sic(q2) and is_sic(q3)
    np.testing.assert_allclose(sic_overlaps(q2), 1 / 3, atol=1e-12)
    np.testing.assert_allclose(sic_overlaps(q3), 1 / 4, atol=1e-12)
    assert not is_sic(OperatorSet.from_matrices([np.eye(2) / 2] * 4))


def test_qutrit_overlap_hand_value():
    v = qutrit_sic_vectors()
    w = np.exp(2j * np.pi / 3)
    hand = abs(w.conjugate() + w) ** 2 / 4
    assert hand == pytest.approx(0.25)
    assert abs(np.vdot(v[(0, 0)], v[(1, 0)])) ** 2 == pytest.approx(hand)


def test_all_qutrit_pairwise_overlaps():
    mats = builtin("sic_qutrit").mats
    for a, b in combinations(mats, 2):
        assert 9 * np.trace(a @ b).real == pytest.approx(0.25, abs=1e-9)


def test_born_probability_examples():
    rho = random_density(3, 1)
    assert born_probability(Effect(np.eye(3) / 3), rho) == pytest.approx(1 / 3)
    assert born_probability(Effect(M1), pure_state([1, 0])) == pytest.approx(1 / 5)
    for s in range(20):
        for name in ("sic_qubit", "sic_qutrit"):
            povm = builtin(name)
            assert probabilities(povm, random_density(povm.dim, s)).sum() == pytest.approx(1, abs=1e-12)


def test_born_probability_rejects_non_effect_values():
    big = Effect(2 * np.eye(2))
    with pytest.raises(InvalidProbability):
        born_probability(big, make_density(np.eye(2) / 2))
    with pytest.raises(DimensionError):
        born_probability(Effect(np.eye(3) / 3), make_density(np.eye(2) / 2))


def test_builtin_values():
    m = builtin("qubit_m1_m2")
    assert [e.min_eigenvalue > 0 for e in m.effects] == [True, True]
    m0 = builtin("qubit_m0")[0].mat
    np.testing.assert_allclose(m0, [[1 / 5, 1 / 6 + 0.1j], [1 / 6 - 0.1j, 3 / 10]], atol=1e-16)
    q3 = builtin("sic_qutrit")
    assert len(q3) == 9
    np.testing.assert_allclose(sum(q3.mats), np.eye(3), atol=1e-15)
    with pytest.raises(MeasurementError):
        builtin("nope")


def test_effect_and_povm_validation():
    with pytest.raises(NotAnEffect):
        Effect(np.diag([1.0, -0.5]))
    with pytest.raises(NotAPovm):
        Povm((Effect(M1), Effect(M2)))
    with pytest.raises(MeasurementError):
        OperatorSet(())
    with pytest.raises(DimensionError):
        OperatorSet((Effect(np.eye(2)), Effect(np.eye(3))))


def test_operator_set_json_round_trip():
    s = builtin("sic_qutrit")
    obj = s.to_json()
    assert obj["dim"] == 3 and len(obj["effects"]) == 9 and obj["labels"][0] == "Pi_0^0"
    back = OperatorSet.from_json(obj)
    np.testing.assert_allclose(np.array(back.mats), np.array(s.mats), atol=1e-16)


def test_builtin_povms_give_valid_probabilities():
    for name in ("sic_qubit", "sic_qutrit"):
        povm = builtin(name)
        for s in range(100):
            p = probabilities(povm, random_density(povm.dim, s))
            assert p.min() >= 0 and p.sum() == pytest.approx(1, abs=1e-8)


def test_sic_implies_ic_and_unitary_conjugation_preserves_povm():
    rng = np.random.default_rng(0)
    for name in ("sic_qubit", "sic_qutrit"):
        povm = builtin(name)
        assert not is_sic(povm) or is_ic(povm)
        d = povm.dim
        q, _ = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        rotated = OperatorSet.from_matrices([q.conj().T @ m @ q for m in povm.mats])
        assert is_povm(rotated).ok
        assert is_sic(rotated)
