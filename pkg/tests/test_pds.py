import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mprk22.errors import DomainError, ValidationError
from mprk22.experiments import exact_solution
from mprk22.pds import (GeneralPDS, LinearPDS, TwoSpeciesSystem, check_general,
                        linear_as_general, parse_rate_matrix, steady_state_two_species,
                        validate_linear)


def conservative_matrix(rng, n, scale=1.0):
    B = scale * rng.uniform(0, 1, (n, n)) * rng.integers(0, 2, (n, n))
    np.fill_diagonal(B, 0.0)
    return B - np.diag(B.sum(axis=0))


def test_two_species_expansion():
    sys_ = TwoSpeciesSystem(2.0, 3.0)
    np.testing.assert_array_equal(sys_.rate_matrix, [[-2, 3], [2, -3]])
    assert sys_.eigenvalue == -5.0
    assert validate_linear(sys_.as_linear()).ok


def test_linear_as_general_symbolic_entries():
    a, b = 2.0, 7.0
    pds = linear_as_general(LinearPDS([[-a, b], [a, -b]]))
    y = np.array([1.0, 1.0])
    assert pds.produce(0, y, 0, 1) == b
    assert pds.produce(0, y, 1, 0) == a
    assert pds.destroy(0, y, 0, 1) == a
    assert pds.destroy(0, y, 1, 0) == b
    assert pds.conservative


def test_linear_as_general_zero_system():
    pds = linear_as_general(LinearPDS(np.zeros((3, 3))))
    P, D = pds.rates(0.0, np.ones(3))
    assert not P.any() and not D.any()


def test_linear_as_general_entrywise_product():
    pds = linear_as_general(LinearPDS([[-2, 1], [2, -1]]))
    y = np.array([3.0, 5.0])
    assert pds.produce(0, y, 0, 1) == 5.0
    assert pds.produce(0, y, 1, 0) == 6.0
    assert pds.produce(0, y, 0, 0) == 0.0


def test_linear_as_general_rejects_invalid():
    with pytest.raises(ValidationError, match="column 1 sums to -0.5"):
        linear_as_general(LinearPDS([[-1, 1], [0.5, -1]]))


@pytest.mark.parametrize("A, ok, message", [
    ([[-1, 1], [1, -1]], True, "pass"),
    ([[-1, 1], [0.5, -1]], False, "column 1 sums to -0.5"),
    ([[1, -1], [-1, 1]], False, "off-diagonal (1, 2) is -1 < 0"),
])
def test_validate_linear(A, ok, message):
    report = validate_linear(LinearPDS(A))
    assert report.ok is ok
    assert message in report.summary()


def test_validate_reports_index_and_value():
    report = validate_linear(LinearPDS([[1, -1], [-1, 1]]))
    conds = {(v.condition, v.index) for v in report}
    assert ("off-diagonal nonnegative", (0, 1)) in conds
    assert ("diagonal nonpositive", (0, 0)) in conds


def test_column_sum_tolerance_scales_with_entries():
    A = np.array([[-1e6, 1e6], [1e6, -1e6]])
    A[0, 0] -= 1e-8  # 1e-14 relative, inside 1e-13 * max|a_ij|
    assert validate_linear(LinearPDS(A)).ok
    A[0, 0] -= 1e-6
    assert not validate_linear(LinearPDS(A)).ok


def test_rate_matrix_is_read_only():
    sys_ = LinearPDS([[-1, 1], [1, -1]])
    with pytest.raises(ValueError):
        sys_.rate_matrix[0, 0] = 5


@pytest.mark.parametrize("a, b, mass, expected", [
    (20, 20, 1, (0.5, 0.5)),
    (1, 3, 4, (3, 1)),
    (2, 1, 1, (1 / 3, 2 / 3)),
])
def test_steady_state_two_species(a, b, mass, expected):
    y = steady_state_two_species(TwoSpeciesSystem(a, b), mass)
    np.testing.assert_allclose(y, expected, rtol=1e-15)


def test_steady_state_subnormal_rates():
    y = steady_state_two_species(TwoSpeciesSystem(0.0, 5e-324), 2.0)
    np.testing.assert_array_equal(y, [2.0, 0.0])


def test_steady_state_degenerate():
    with pytest.raises(DomainError):
        steady_state_two_species(TwoSpeciesSystem(0, 0))


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(1e-3, 1e3))
def test_steady_state_is_in_kernel(a, b, mass):
    if a + b == 0:
        return
    sys_ = TwoSpeciesSystem(a, b)
    y = steady_state_two_species(sys_, mass)
    assert np.max(np.abs(sys_.rate_matrix @ y)) <= 1e-13 * max(1.0, a + b) * max(1.0, mass)
    assert abs(y.sum() - mass) <= 1e-13 * mass


@settings(max_examples=50)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_linear_as_general_properties(n, seed):
    rng = np.random.default_rng(seed)
    pds = linear_as_general(LinearPDS(conservative_matrix(rng, n, 100.0)))
    y = 10 ** rng.uniform(-3, 3, n)
    P, D = pds.rates(0.0, y)
    assert np.all(P >= 0) and np.all(D >= 0)
    np.testing.assert_array_equal(D, P.T)
    assert check_general(pds).ok


def test_check_general_flags_nonconservative():
    pds = GeneralPDS(2, lambda t, y: np.array([[0, y[1]], [y[0], 0]]),
                     lambda t, y: np.array([[0, 2 * y[0]], [y[1], 0]]), conservative=True)
    report = check_general(pds)
    assert not report.ok
    assert report.violations[0].condition == "d_ij = p_ji"


def test_general_pds_rhs_and_diagonal_ignored():
    pds = GeneralPDS(2, lambda t, y: np.array([[9.0, y[1]], [2 * y[0], 9.0]]))
    assert pds.produce(0, np.ones(2), 0, 0) == 0.0
    np.testing.assert_allclose(pds.rhs(0, np.array([1.0, 3.0])), [3 - 2, 2 - 3])


def test_exact_solution_satisfies_ode():
    a, delta = 3.0, 0.2
    A = TwoSpeciesSystem(a, a).rate_matrix
    h = 1e-5
    for t in np.linspace(0.0, 2.0, 9):
        deriv = (exact_solution(delta, a, t + h) - exact_solution(delta, a, t - h)) / (2 * h)
        np.testing.assert_allclose(deriv, A @ exact_solution(delta, a, t), atol=1e-10)


def test_parse_rate_matrix():
    sys_ = parse_rate_matrix("# comment\n-1, 2\n1, -2\n")
    np.testing.assert_array_equal(sys_.rate_matrix, [[-1, 2], [1, -2]])


@pytest.mark.parametrize("text, match", [
    ("1,2,3\n4,5,6\n", "non-square"),
    ("1,2\n3\n", "ragged"),
    ("1,x\n3,4\n", ":1: column 2"),
    ("", "empty"),
])
def test_parse_rate_matrix_errors(text, match):
    with pytest.raises(ValidationError, match=match):
        parse_rate_matrix(text)
