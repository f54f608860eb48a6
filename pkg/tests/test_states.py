import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fockdiff.fock import DEFICIT, FockSpace, TruncationError, mean_photon
from fockdiff.states import (
    ChaoticParams,
    LwcsParams,
    NbsParams,
    StateSpec,
    chaotic_state,
    gamma_from_occupancy,
    lwcs_distribution,
    lwcs_state,
    nbs_distribution,
    nbs_normal_ordered_diagonal,
    nbs_state,
    nbs_tail,
    nbs_via_subtraction,
    number_state,
    required_dim,
    thermal_occupancy,
)

SPACE = FockSpace(128)


# --- parameter types ---------------------------------------------------------------


def test_nbs_params_validation_message():
    with pytest.raises(ValueError, match="0 < gamma < 1"):
        NbsParams(1, 1.5)
    with pytest.raises(ValueError, match="s >= 0"):
        NbsParams(-1, 0.5)


def test_lwcs_params_validation():
    with pytest.raises(ValueError, match="lambda"):
        LwcsParams(1, 0.0)
    assert LwcsParams.from_kappa_t(2, 1.0).lam == 0.5
    assert LwcsParams(2, 0.5).mean == 3.0


def test_chaotic_occupancy():
    assert ChaoticParams(0.5).n_c == 1.0
    assert ChaoticParams(0.2).mean == pytest.approx(4.0)


# --- number ------------------------------------------------------------------------


def test_number_state_vacuum():
    rho = number_state(FockSpace(4), 0)
    np.testing.assert_array_equal(rho.entries, np.diag([1.0, 0, 0, 0]))


def test_number_state_mean():
    assert mean_photon(number_state(FockSpace(4), 2)) == 2.0


def test_number_state_out_of_range():
    with pytest.raises(TruncationError) as err:
        number_state(FockSpace(4), 5)
    assert err.value.required_dim == 6
    assert "recommended dim" in str(err.value)


# --- chaotic -----------------------------------------------------------------------


def test_chaotic_half():
    rho = chaotic_state(SPACE, ChaoticParams(0.5))
    assert rho.entries[0, 0] == 0.5
    assert rho.entries[1, 1] == 0.25
    assert abs(mean_photon(rho) - 1.0) <= 1e-9


def test_chaotic_cold():
    rho = chaotic_state(SPACE, ChaoticParams(0.9))
    assert mean_photon(rho) == pytest.approx(1 / 0.9 - 1, rel=1e-12)


def test_chaotic_deficit_recorded_not_renormalized():
    rho = chaotic_state(SPACE, ChaoticParams(0.5))
    assert rho.trace_deficit < 1e-38
    assert rho.trace_deficit == pytest.approx(0.5**128, rel=1e-10)


def test_chaotic_renormalize_is_opt_in():
    space = FockSpace(40)
    rho = chaotic_state(space, ChaoticParams(0.5), policy=DEFICIT, renormalize=True)
    assert rho.trace_deficit == 0.0
    assert rho.trace == pytest.approx(1.0, abs=1e-15)


def test_heavy_tail_names_required_dim():
    space = FockSpace(32)
    with pytest.raises(TruncationError) as err:
        chaotic_state(space, ChaoticParams(0.05))
    need = err.value.required_dim
    assert need > 32
    chaotic_state(FockSpace(need), ChaoticParams(0.05))
    with pytest.raises(TruncationError):
        chaotic_state(FockSpace(need - 1), ChaoticParams(0.05))


# --- negative binomial -------------------------------------------------------------


def test_nbs_s0_equals_chaotic():
    for g in (0.3, 0.5, 0.7):
        a = nbs_state(SPACE, NbsParams(0, g)).entries
        b = chaotic_state(SPACE, ChaoticParams(g)).entries
        assert np.abs(a - b).max() <= 1e-15


def test_nbs_s1_entries():
    rho = nbs_state(SPACE, NbsParams(1, 0.5))
    assert rho.entries[0, 0] == pytest.approx(0.25, abs=1e-16)
    assert rho.entries[1, 1] == pytest.approx(0.25, abs=1e-16)
    assert rho.entries[2, 2] == pytest.approx(0.1875, abs=1e-16)


def test_nbs_mean():
    assert abs(mean_photon(nbs_state(SPACE, NbsParams(2, 0.4))) - 4.5) <= 1e-8


def test_nbs_matches_scipy_negative_binomial():
    for s, g in [(0, 0.3), (2, 0.5), (4, 0.7)]:
        ref = stats.nbinom.pmf(np.arange(128), s + 1, g)
        np.testing.assert_allclose(nbs_distribution(NbsParams(s, g), 127), ref, rtol=1e-12, atol=1e-300)
        assert nbs_tail(NbsParams(s, g), 128) == pytest.approx(stats.nbinom.sf(127, s + 1, g), rel=1e-12)


def test_nbs_exact_rational_coefficients():
    g = Fraction(3, 10)
    p = nbs_distribution(NbsParams(3, 0.3), 20)
    for n in range(21):
        exact = math.comb(n + 3, n) * g**4 * (1 - g) ** n
        assert p[n] == pytest.approx(float(exact), rel=1e-13)


def test_nbs_large_s_no_overflow():
    p = nbs_distribution(NbsParams(300, 0.7), 400)
    assert np.all(np.isfinite(p))
    assert p.max() > 0


@pytest.mark.parametrize("s,g", [(0, 0.5), (1, 0.5), (3, 0.6)])
def test_subtraction_matches_direct(s, g):
    a = nbs_via_subtraction(SPACE, NbsParams(s, g))
    b = nbs_state(SPACE, NbsParams(s, g))
    assert np.abs(a.entries - b.entries).max() <= 1e-12
    assert abs(a.trace - 1.0) <= 1e-10


def test_subtraction_s0_is_chaotic_exactly():
    a = nbs_via_subtraction(SPACE, NbsParams(0, 0.5)).entries
    np.testing.assert_array_equal(a, chaotic_state(SPACE, ChaoticParams(0.5)).entries)


def test_subtraction_oracle_dense_dim():
    # explicit a^s rho a^dag^s with python floats on a small enlarged space
    s, g, dim = 2, 0.6, 60
    big = dim + s
    rho_c = [g * (1 - g) ** n for n in range(big)]
    n_c = (1 - g) / g
    # a^s |n><n| a^dag^s = n!/(n-s)! |n-s><n-s|
    diag = [rho_c[n + s] * math.factorial(n + s) / math.factorial(n) / (2 * n_c**2) for n in range(dim)]
    got = nbs_via_subtraction(FockSpace(dim), NbsParams(s, g)).diagonal
    np.testing.assert_allclose(got, diag, rtol=1e-12)


def test_normal_ordered_diagonal_matches():
    for s, g in [(0, 0.3), (1, 0.5), (4, 0.7)]:
        p = NbsParams(s, g)
        diff = nbs_normal_ordered_diagonal(p, 127) - nbs_state(SPACE, p).diagonal
        assert np.abs(diff).max() <= 1e-12


def test_states_are_diagonal():
    for rho in (
        nbs_state(SPACE, NbsParams(2, 0.5)),
        chaotic_state(SPACE, ChaoticParams(0.4)),
        lwcs_state(FockSpace(192), LwcsParams(2, 0.5)),
    ):
        assert rho.is_diagonal()
        assert rho.max_offdiagonal() == 0.0


@settings(max_examples=40, deadline=None)
@given(s=st.integers(0, 6), g=st.floats(0.25, 0.95))
def test_nbs_mean_property(s, g):
    p = NbsParams(s, g)
    dim = required_dim(lambda d: nbs_tail(p, d), 1e-14, 16)
    rho = nbs_state(FockSpace(dim), p)
    assert rho.trace_deficit < 1e-12
    assert abs(mean_photon(rho) - p.mean) <= 1e-8


# --- Laguerre-weighted chaotic -----------------------------------------------------


def test_lwcs_l0_is_thermal():
    rho = lwcs_state(SPACE, LwcsParams(0, 0.5))
    np.testing.assert_allclose(rho.diagonal, 0.5 * 0.5 ** np.arange(128), rtol=1e-13)
    assert abs(mean_photon(rho) - 1.0) <= 1e-9


def test_lwcs_mean():
    rho = lwcs_state(FockSpace(192), LwcsParams(2, 0.5))
    assert abs(mean_photon(rho) - 3.0) <= 1e-8


def test_lwcs_lambda_one_is_number_state():
    a = lwcs_state(SPACE, LwcsParams(1, 1.0)).entries
    np.testing.assert_array_equal(a, number_state(SPACE, 1).entries)


def _lwcs_oracle(l, lam, n):
    """<n| lam (1-lam)^l :L_l(-lam^2 N/(1-lam)) e^{-lam N}: |n> by exact binomial sums.

    :N^k e^{-lam N}: has diagonal n!/(n-k)! (1-lam)^(n-k), and L_l(y) = sum_k C(l,k) (-y)^k / k!.
    """
    lam = Fraction(lam)
    total = Fraction(0)
    for k in range(min(l, n) + 1):
        coeff = Fraction(math.comb(l, k), math.factorial(k)) * (lam**2 / (1 - lam)) ** k
        total += coeff * Fraction(math.factorial(n), math.factorial(n - k)) * (1 - lam) ** (n - k)
    return float(lam * (1 - lam) ** l * total)


@pytest.mark.parametrize("l,lam", [(1, 0.5), (2, 0.25), (4, 0.75)])
def test_lwcs_exact_oracle(l, lam):
    p = lwcs_distribution(LwcsParams(l, lam), 40)
    for n in range(41):
        assert p[n] == pytest.approx(_lwcs_oracle(l, lam, n), rel=1e-12, abs=1e-300)


# --- occupancy ---------------------------------------------------------------------


def test_thermal_occupancy_examples():
    assert thermal_occupancy(math.log(2.0), 1.0) == pytest.approx(1.0, abs=1e-15)
    assert thermal_occupancy(50.0, 1.0) == pytest.approx(math.exp(-50.0), rel=1e-12)
    assert gamma_from_occupancy(3.0) == 0.25
    assert gamma_from_occupancy(thermal_occupancy(math.log(2.0), 1.0)) == pytest.approx(0.5)


def test_thermal_occupancy_rejects_nonpositive():
    with pytest.raises(ValueError):
        thermal_occupancy(0.0, 1.0)
    with pytest.raises(ValueError):
        thermal_occupancy(1.0, -1.0)


# --- named state families--------------------------------------------------------------


def test_state_spec_requires_parameters():
    with pytest.raises(ValueError, match="requires parameter 'gamma'"):
        StateSpec("nbs", s=1)
    with pytest.raises(ValueError):
        StateSpec("squeezed")


def test_state_spec_build_and_dict():
    spec = StateSpec("nbs", s=1, gamma=0.5)
    assert spec.mean == 2.0
    assert spec.as_dict() == {"state": "nbs", "s": 1, "gamma": 0.5}
    rho = spec.build(SPACE)
    np.testing.assert_array_equal(rho.entries, nbs_state(SPACE, NbsParams(1, 0.5)).entries)
