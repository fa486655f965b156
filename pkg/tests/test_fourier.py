from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onplus.fourier import (
    FourierElement,
    adjoint,
    character,
    coefficient,
    expectation_E,
    haar_state,
    inner_product,
    multiply,
    zero,
)
from onplus.qcore import catalan, quantum_dim, semicircle_moment
from onplus.weingarten import haar_moment, tensor_word_moment


def _random_vec(rng, d):
    return rng.standard_normal(d) + 1j * rng.standard_normal(d)


def _random_element(params3, coupled3, rng, labels):
    blocks = {n: _random_vec(rng, coupled3.dim(n) ** 2).reshape(coupled3.dim(n), -1)
              for n in labels}
    return FourierElement(params=params3, blocks=blocks)


def _ambient_letters(coupled3, x: FourierElement):
    """Expand the positive-label part into ambient rank-one letters via SVDs."""
    out = []
    for n, a in x.blocks.items():
        if n == 0:
            continue
        chain = coupled3.chain_embedding(n)
        u, s, vh = np.linalg.svd(a)
        for r in range(len(s)):
            if s[r] <= s[0] * a.shape[0] * 1e-15:
                continue
            xi = chain @ (s[r] * vh[r, :])
            eta = chain @ np.conj(u[:, r])
            out.append((xi, eta))
    return out


def _oracle_product_state(params3, coupled3, x, y):
    """h(x y) through the pairing-sum oracle, bilinear over rank-one letters.

    Scalar (label-0) parts factor out of the state since positive-label
    coefficients have vanishing Haar expectation.
    """
    x0 = complex(x.blocks[0][0, 0]) if 0 in x.blocks else 0.0
    y0 = complex(y.blocks[0][0, 0]) if 0 in y.blocks else 0.0
    total = x0 * y0
    for lx in _ambient_letters(coupled3, x):
        for ly in _ambient_letters(coupled3, y):
            total += tensor_word_moment(params3, [lx, ly])
    return total


def test_zero_and_unit(params3):
    one = character(params3, 0)
    assert haar_state(one) == 1.0
    assert zero(params3).labels() == []
    assert one.labels() == [0]


def test_coefficient_shape_validation(params3):
    with pytest.raises(ValueError):
        coefficient(params3, 2, np.ones(3), np.ones(8))


def test_character_norm_and_orthogonality(params3):
    for n in range(5):
        chi = character(params3, n)
        assert abs(inner_product(params3, chi, chi) - 1.0) < 1e-12
        for m in range(5):
            if m != n:
                assert abs(inner_product(params3, chi, character(params3, m))) < 1e-15


def test_coefficient_inner_product_formula(params3, coupled3):
    rng = np.random.default_rng(5)
    for n in (1, 2, 3):
        d = coupled3.dim(n)
        xi, eta = _random_vec(rng, d), _random_vec(rng, d)
        xip, etap = _random_vec(rng, d), _random_vec(rng, d)
        got = inner_product(
            params3,
            coefficient(params3, n, xi, eta),
            coefficient(params3, n, xip, etap),
        )
        want = np.dot(xi, np.conj(xip)) * np.dot(etap, np.conj(eta)) / quantum_dim(params3, n)
        assert abs(got - want) < 1e-12 * max(1.0, abs(want))


def test_character_is_sum_of_diagonal_coefficients(params3, coupled3):
    n = 2
    d = coupled3.dim(n)
    total = zero(params3)
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        total = total + coefficient(params3, n, e, e)
    diff = total - character(params3, n)
    assert all(np.abs(b).max() < 1e-15 for b in diff.blocks.values())


def test_character_fusion(params3, coupled3):
    for n in range(1, 6):
        prod = multiply(params3, character(params3, 1), character(params3, n), backend=coupled3)
        want = character(params3, n + 1) + character(params3, n - 1)
        diff = prod - want
        assert not diff.blocks, f"fusion defect at n = {n}"


def test_multiply_by_unit(params3, coupled3):
    rng = np.random.default_rng(11)
    x = _random_element(params3, coupled3, rng, [0, 1, 2])
    prod = multiply(params3, x, character(params3, 0), backend=coupled3)
    diff = prod - x
    assert all(np.abs(b).max() < 1e-12 for b in diff.blocks.values())


def test_fundamental_moments_match_pairing_oracle(params3, coupled3):
    rng = np.random.default_rng(23)
    for length in (2, 4, 6):
        for _ in range(4):
            word = [(rng.integers(3), rng.integers(3)) for _ in range(length)]
            elem = character(params3, 0)
            for i, j in word:
                ei = np.zeros(3)
                ei[i] = 1.0
                ej = np.zeros(3)
                ej[j] = 1.0
                elem = multiply(params3, elem, coefficient(params3, 1, ej, ei), backend=coupled3)
            want = haar_moment(params3, word)
            assert abs(haar_state(elem) - want) < 1e-10


def test_odd_moments_vanish(params3, coupled3):
    elem = character(params3, 0)
    for i, j in [(0, 1), (1, 2), (2, 2)]:
        ei = np.zeros(3)
        ei[i] = 1.0
        ej = np.zeros(3)
        ej[j] = 1.0
        elem = multiply(params3, elem, coefficient(params3, 1, ej, ei), backend=coupled3)
    assert abs(haar_state(elem)) < 1e-14


@pytest.mark.parametrize("labels", [((1,), (1,)), ((2,), (2,)), ((1, 2), (0, 1, 2)), ((2,), (1,))])
def test_product_state_matches_tensor_word_oracle(params3, coupled3, labels):
    rng = np.random.default_rng(sum(labels[0]) * 17 + sum(labels[1]))
    x = _random_element(params3, coupled3, rng, labels[0])
    y = _random_element(params3, coupled3, rng, labels[1])
    got = haar_state(multiply(params3, x, y, backend=coupled3))
    want = _oracle_product_state(params3, coupled3, x, y)
    assert abs(got - want) < 1e-10 * max(1.0, abs(want))


def test_higher_coefficient_triple_product(params3, coupled3):
    # Degree-three word mixing labels 1 and 2, against the pairing oracle.
    rng = np.random.default_rng(91)
    letters = []
    elem = character(params3, 0)
    for n in (1, 2, 1):
        d = coupled3.dim(n)
        xi, eta = _random_vec(rng, d), _random_vec(rng, d)
        elem = multiply(params3, elem, coefficient(params3, n, xi, eta), backend=coupled3)
        chain = coupled3.chain_embedding(n)
        letters.append((chain @ xi, chain @ eta))
    want = tensor_word_moment(params3, letters)
    assert abs(haar_state(elem) - want) < 1e-10 * max(1.0, abs(want))


def test_catalan_moments_three_routes(params3, coupled3):
    chi = character(params3, 1)
    power = character(params3, 0)
    values = []
    for _ in range(4):
        power = multiply(params3, power, chi, backend=coupled3)
        power = multiply(params3, power, chi, backend=coupled3)
        values.append(haar_state(power).real)
    for m, got in enumerate(values, start=1):
        assert abs(got - catalan(m)) < 1e-12
        assert abs(got - semicircle_moment(lambda s, m=m: s ** (2 * m))) < 1e-9
    # Weingarten route for the smallest two cases.
    for m in (1, 2):
        total = 0.0
        for idx in itertools.product(range(3), repeat=2 * m):
            total += haar_moment(params3, [(i, i) for i in idx])
        assert abs(total - catalan(m)) < 1e-10


def test_associativity_on_random_triples(params3, coupled3):
    rng = np.random.default_rng(37)
    for _ in range(12):
        x = _random_element(params3, coupled3, rng, [rng.integers(3)])
        y = _random_element(params3, coupled3, rng, [rng.integers(3)])
        z = _random_element(params3, coupled3, rng, [rng.integers(3)])
        left = multiply(params3, multiply(params3, x, y, backend=coupled3), z, backend=coupled3)
        right = multiply(params3, x, multiply(params3, y, z, backend=coupled3), backend=coupled3)
        diff = left - right
        scale = max((np.abs(b).max() for b in left.blocks.values()), default=1.0)
        for b in diff.blocks.values():
            assert np.abs(b).max() < 1e-9 * max(1.0, scale)


def test_traciality(params3, coupled3):
    rng = np.random.default_rng(41)
    for _ in range(8):
        x = _random_element(params3, coupled3, rng, [rng.integers(4)])
        y = _random_element(params3, coupled3, rng, [rng.integers(4)])
        hxy = haar_state(multiply(params3, x, y, backend=coupled3))
        hyx = haar_state(multiply(params3, y, x, backend=coupled3))
        assert abs(hxy - hyx) < 1e-10 * max(1.0, abs(hxy))


def test_adjoint_involutive_and_isometric(params3, coupled3):
    rng = np.random.default_rng(43)
    x = _random_element(params3, coupled3, rng, [0, 1, 2, 3])
    y = _random_element(params3, coupled3, rng, [1, 2])
    twice = adjoint(adjoint(x))
    diff = twice - x
    assert all(np.abs(b).max() < 1e-12 for b in diff.blocks.values())
    assert abs(
        inner_product(params3, adjoint(x), adjoint(y))
        - np.conj(inner_product(params3, x, y))
    ) < 1e-10
    chi = character(params3, 3)
    diffc = adjoint(chi) - chi
    assert all(np.abs(b).max() < 1e-12 for b in diffc.blocks.values())


def test_state_pairing_consistency(params3, coupled3):
    # h(y* x) is the inner product; ties multiply, adjoint and the pairing.
    rng = np.random.default_rng(47)
    for _ in range(6):
        x = _random_element(params3, coupled3, rng, [rng.integers(3)])
        y = _random_element(params3, coupled3, rng, [rng.integers(3)])
        got = haar_state(multiply(params3, adjoint(y), x, backend=coupled3))
        want = inner_product(params3, x, y)
        assert abs(got - want) < 1e-10 * max(1.0, abs(want))


def test_norm_definition_consistency(params3, coupled3):
    rng = np.random.default_rng(53)
    x = _random_element(params3, coupled3, rng, [0, 1, 2])
    direct = sum(
        np.vdot(a, a).real / quantum_dim(params3, n) for n, a in x.blocks.items()
    )
    assert abs(inner_product(params3, x, x).real - direct) < 1e-12 * direct
    via_state = haar_state(multiply(params3, adjoint(x), x, backend=coupled3)).real
    assert abs(via_state - direct) < 1e-10 * direct


def test_expectation_is_orthogonal_projection(params3, coupled3):
    rng = np.random.default_rng(59)
    x = _random_element(params3, coupled3, rng, [0, 1, 2, 3])
    y = _random_element(params3, coupled3, rng, [1, 2, 4])
    ex = expectation_E(params3, x)
    exx = expectation_E(params3, ex)
    diff = exx - ex
    assert all(np.abs(b).max() < 1e-14 for b in diff.blocks.values())
    lhs = inner_product(params3, ex, y)
    rhs = inner_product(params3, x, expectation_E(params3, y))
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))
    # Residual orthogonal to every character.
    resid = x - ex
    for n in range(5):
        assert abs(inner_product(params3, resid, character(params3, n))) < 1e-12


def test_expectation_of_coefficient(params3, coupled3):
    rng = np.random.default_rng(61)
    n, d = 2, coupled3.dim(2)
    xi, eta = _random_vec(rng, d), _random_vec(rng, d)
    ex = expectation_E(params3, coefficient(params3, n, xi, eta))
    scale = np.dot(xi, np.conj(eta)) / quantum_dim(params3, n)
    want = scale * character(params3, n)
    diff = ex - want
    assert all(np.abs(b).max() < 1e-13 for b in diff.blocks.values())
    # Orthogonal vectors give expectation zero.
    e0 = np.zeros(d)
    e0[0] = 1.0
    e1 = np.zeros(d)
    e1[1] = 1.0
    assert not expectation_E(params3, coefficient(params3, n, e0, e1)).blocks


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=3), st.integers(min_value=0, max_value=60))
def test_expectation_contracts_hypothesis(params3, n, seed):
    rng = np.random.default_rng(seed)
    d = int(round(quantum_dim(params3, n)))
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    x = FourierElement(params=params3, blocks={n: a})
    ex = expectation_E(params3, x)
    assert (
        inner_product(params3, ex, ex).real
        <= inner_product(params3, x, x).real + 1e-12
    )


def test_multiply_mixed_algebras_rejected(params3, params4):
    with pytest.raises(ValueError):
        multiply(params3, character(params3, 1), character(params4, 1))
