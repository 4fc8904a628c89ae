"""Merging protocol tests: measurement isometry contracts, Uhlmann decoder
equalities, end-to-end runs, and the entanglement-cost bounds."""

import math

import numpy as np
import pytest

from qdecouple import entropy as ent
from qdecouple import haar
from qdecouple import merging as mg
from qdecouple.linalg import (
    PureState,
    apply_matrix_pure,
    dims_of,
    fidelity,
    inner,
    maximally_entangled,
    pure_marginal,
    purify,
    random_density,
    random_pure,
    tensor_pure,
)


def cc_state(k):
    """Classically correlated k-qubit state with purifying reference."""
    d = 2 ** k
    amps = np.zeros((d, d, d), dtype=complex)
    for i in range(d):
        amps[i, i, i] = 1.0 / math.sqrt(d)
    return PureState(dims_of(("A", d), ("B", d), ("E", d)), amps.reshape(-1))


# ---------------------------------------------------------------------------
# measurement isometry
# ---------------------------------------------------------------------------

def test_measurement_isometry_contracts():
    rng = haar.generator(0)
    u = haar.haar_unitary(4, rng)
    w = mg.measurement_isometry(4, 2, u)
    assert w.shape == (2 * 2 * 2, 4)
    np.testing.assert_allclose(w.conj().T @ w, np.eye(4), atol=1e-12)
    # two blocks of rank two
    t = w.reshape(2, 2, 2, 4)
    for x in range(2):
        block = t[:, x, x, :]
        assert np.linalg.matrix_rank(block) == 2


def test_measurement_isometry_single_outcome():
    u = haar.haar_unitary(4, haar.generator(1))
    w = mg.measurement_isometry(4, 4, u)
    np.testing.assert_allclose(w.reshape(4, 1, 1, 4)[:, 0, 0, :], u, atol=1e-14)


def test_measurement_isometry_rank_one_blocks():
    u = haar.haar_unitary(4, haar.generator(2))
    w = mg.measurement_isometry(4, 1, u)
    assert w.shape == (16, 4)
    np.testing.assert_allclose(w.conj().T @ w, np.eye(4), atol=1e-12)


def test_measurement_isometry_divisibility():
    u = haar.haar_unitary(4, haar.generator(3))
    with pytest.raises(mg.MergingError):
        mg.measurement_isometry(4, 3, u)


# ---------------------------------------------------------------------------
# Uhlmann decoder
# ---------------------------------------------------------------------------

def test_uhlmann_identity_case():
    psi = random_pure(np.random.default_rng(4), (("R", 2), ("Q", 3)))
    v, out = mg.uhlmann_isometry(psi, psi, ("Q",))
    eta = apply_matrix_pure(psi, v, ("Q",), out)
    assert abs(inner(psi, eta)) == pytest.approx(1.0, abs=1e-12)


def test_uhlmann_recovers_local_unitary():
    phi = maximally_entangled("R", "Q", 2)
    u = haar.haar_unitary(2, haar.generator(5))
    rotated = apply_matrix_pure(phi, u, ("Q",))
    v, out = mg.uhlmann_isometry(phi, rotated, ("Q",))
    eta = apply_matrix_pure(phi, v, ("Q",), out)
    assert abs(inner(rotated, eta)) == pytest.approx(1.0, abs=1e-10)


def test_uhlmann_between_random_purifications():
    rng = np.random.default_rng(6)
    for _ in range(10):
        rho = random_density(rng, (("R", 3),), rank=int(rng.integers(1, 4)))
        psi1 = purify(rho, "Q")
        psi2 = purify(rho, "Q2")
        u = haar.haar_unitary(psi2.dims.dim_of("Q2"), haar.generator(int(rng.integers(100))))
        psi2 = apply_matrix_pure(psi2, u, ("Q2",))
        v, out = mg.uhlmann_isometry(psi1, psi2, ("Q",))
        eta = apply_matrix_pure(psi1, v, ("Q",), out)
        assert abs(inner(psi2, eta)) == pytest.approx(1.0, abs=1e-9)


def test_uhlmann_equality_for_unequal_marginals():
    # SVD-matching oracle: output fidelity equals the marginal fidelity even
    # far from the equal-marginal regime
    rng = np.random.default_rng(7)
    for _ in range(10):
        s1 = random_pure(rng, (("R", 3), ("Q", 4)))
        s2 = random_pure(rng, (("R", 3), ("Q2", 5)))
        v, out = mg.uhlmann_isometry(s1, s2, ("Q",), delta=2.0)
        eta = apply_matrix_pure(s1, v, ("Q",), out)
        got = abs(inner(s2, eta))
        want = fidelity(pure_marginal(s1, ["R"]), pure_marginal(s2, ["R"]))
        assert got == pytest.approx(want, abs=1e-10)
        # the decoder is an isometry on the support it acts on
        np.testing.assert_allclose(v @ v.conj().T @ v, v, atol=1e-10)


def test_uhlmann_enforces_marginal_delta():
    rng = np.random.default_rng(8)
    s1 = random_pure(rng, (("R", 2), ("Q", 2)))
    s2 = random_pure(rng, (("R", 2), ("Q2", 2)))
    with pytest.raises(mg.MergingError):
        mg.uhlmann_isometry(s1, s2, ("Q",), delta=1e-9)


# ---------------------------------------------------------------------------
# end-to-end protocol
# ---------------------------------------------------------------------------

def test_merging_trivial_sender_is_free():
    psi = random_pure(np.random.default_rng(9), (("A", 1), ("B", 2), ("E", 2)))
    res = mg.run_merging(mg.MergingInstance(psi, 1, 1, 0.3))
    assert res.fidelity == pytest.approx(1.0, abs=1e-9)
    assert res.cost_bits == 0.0


def test_merging_probabilities_and_outcomes():
    res = mg.run_merging(mg.MergingInstance(cc_state(1), 8, 1, 0.3,
                                            seed=haar.RngSeed(3), cap=4096))
    total = sum(p for _, p, _ in res.per_outcome)
    assert total == pytest.approx(1.0, abs=1e-9)
    assert len(res.per_outcome) == 16
    assert all(0.0 <= f <= 1.0 + 1e-9 for _, _, f in res.per_outcome)


def test_merging_fidelity_grows_with_cost():
    fids = []
    for k_dim in (4, 16, 64):
        res = mg.run_merging(mg.MergingInstance(cc_state(2), k_dim, 1, 0.3,
                                                seed=haar.RngSeed(0), cap=1 << 19))
        fids.append(res.fidelity)
    assert fids[0] < fids[1] < fids[2]


def test_merging_entanglement_gain_on_shared_pair():
    # sender and receiver already share a maximally entangled pair: merging
    # at negative cost (returning entanglement) still succeeds exactly,
    # because the decoupling condition is trivial for |A1| = 1 ... here L=2
    phi = maximally_entangled("A", "B", 2)
    psi = PureState(dims_of(("A", 2), ("B", 2), ("E", 1)),
                    np.kron(phi.amplitudes, [1.0]))
    res = mg.run_merging(mg.MergingInstance(psi, 1, 2, 0.4, seed=haar.RngSeed(2),
                                            cap=256))
    assert res.cost_bits == -1.0
    assert res.fidelity == pytest.approx(1.0, abs=1e-9)
    assert ent.h_max(phi.to_operator(), ("A",), ("B",)).value == pytest.approx(
        -1.0, abs=1e-5)


def test_merging_divisibility_enforced():
    with pytest.raises(mg.MergingError):
        mg.MergingInstance(cc_state(1), 3, 4, 0.3)


def test_merging_deterministic_per_seed():
    r1 = mg.run_merging(mg.MergingInstance(cc_state(1), 8, 1, 0.3,
                                           seed=haar.RngSeed(7), cap=4096))
    r2 = mg.run_merging(mg.MergingInstance(cc_state(1), 8, 1, 0.3,
                                           seed=haar.RngSeed(7), cap=4096))
    assert r1.fidelity == r2.fidelity
    assert r1.per_outcome == r2.per_outcome


# ---------------------------------------------------------------------------
# cost bounds
# ---------------------------------------------------------------------------

def test_realize_cost_power_of_two():
    assert mg.realize_cost(2.3, 4) == (8, 1)
    assert mg.realize_cost(3.0, 4) == (8, 1)
    assert mg.realize_cost(-0.4, 4) == (1, 1)
    assert mg.realize_cost(-3.5, 4) == (1, 4)   # gain capped by v2(|A|)
    assert mg.realize_cost(-0.5, 3) == (1, 1)   # odd |A| cannot gain


def test_cost_achievable_formula_arithmetic():
    # maximally entangled pair: smoothed conditional max-entropy near -1
    phi = maximally_entangled("A", "B", 2)
    psi = PureState(dims_of(("A", 2), ("B", 2), ("E", 1)),
                    np.kron(phi.amplitudes, [1.0]))
    eps = 0.2
    raw = mg.cost_achievable(psi, ("A",), ("B",), eps, realize=False)
    h = ent.h_max_smooth(psi.to_operator(), ("A",), ("B",), eps * eps / 13).value
    want = h - 4 * math.log2(eps) + 2 * math.log2(13)
    assert raw == pytest.approx(want, abs=1e-9)
    assert raw == pytest.approx(-1 + 4 * math.log2(5) + 2 * math.log2(13), abs=0.1)
    rounded = mg.cost_achievable(psi, ("A",), ("B",), eps)
    assert rounded >= raw - 1e-9
    assert rounded == math.ceil(raw - 1e-9)


def test_cost_achievable_monotone_in_epsilon():
    psi = cc_state(1)
    values = [mg.cost_achievable(psi, ("A",), ("B",), e, realize=False)
              for e in (0.1, 0.2, 0.3)]
    assert values[0] > values[1] > values[2]


def test_cost_bounds_product_state_reduces_to_unconditional():
    rng = np.random.default_rng(10)
    rho_a = random_density(rng, (("A", 2),))
    psi_a = purify(rho_a, "E")
    psi = tensor_pure(psi_a, random_pure(rng, (("B", 2),)))
    radius = 0.05
    h_cond = ent.h_max_smooth(psi.to_operator(), ("A",), ("B",), radius).value
    h_marg = ent.h_max_smooth(pure_marginal(psi, ["A", "E"]), ("A",), (),
                              radius).value
    assert h_cond == pytest.approx(h_marg, abs=1e-4)


def test_cost_converse_validity_range():
    psi = cc_state(1)
    with pytest.raises(mg.MergingError):
        mg.cost_converse(psi, ("A",), ("B",), 0.3)   # 4 sqrt(eps) >= 1
    with pytest.raises(mg.MergingError):
        mg.cost_converse(psi, ("A",), ("B",), 0.0)
    val = mg.cost_converse(psi, ("A",), ("B",), 0.05)
    assert np.isfinite(val)


def test_cost_sandwich():
    eps = 0.05
    # diagonal family certifies at any smoothing radius
    for k in (1, 2):
        con = mg.cost_converse(cc_state(k), ("A",), ("B",), eps)
        ach = mg.cost_achievable(cc_state(k), ("A",), ("B",), eps, realize=False)
        assert con <= ach + 1e-9
    for seed in (0, 1, 2, 3):
        psi = random_pure(np.random.default_rng(seed), (("A", 2), ("B", 2), ("E", 2)))
        con = mg.cost_converse(psi, ("A",), ("B",), eps)
        ach = mg.cost_achievable(psi, ("A",), ("B",), eps, realize=False)
        assert con <= ach + 1e-9


def test_merging_cost_trend_toward_conditional_entropy():
    beta = cc_state(1)
    h_vn = ent.von_neumann(beta.to_operator(), ("A",), ("B",))
    state = None
    rates = []
    for n in range(1, 4):
        piece = beta.relabel({"A": f"A{n}", "B": f"B{n}", "E": f"E{n}"})
        state = piece if state is None else tensor_pure(state, piece, cap=1 << 12)
        a = tuple(f"A{i}" for i in range(1, n + 1))
        b = tuple(f"B{i}" for i in range(1, n + 1))
        rates.append(mg.cost_achievable(state, a, b, 0.3, realize=False) / n)
    assert rates[0] > rates[1] > rates[2]
    assert all(r >= h_vn - 1e-6 for r in rates)


def test_protocol_matches_explicit_isometry():
    # the in-protocol block slicing equals applying the explicit W, and the
    # classical flags are perfectly correlated (no cross-outcome amplitude)
    psi = cc_state(1)
    k_dim, l_dim = 2, 2
    n_out = (k_dim * 2) // l_dim
    phi = maximally_entangled("A0", "B0", k_dim)
    theta = tensor_pure(phi, psi)
    u = haar.haar_unitary_indexed(9, 0, k_dim * 2)
    rotated = apply_matrix_pure(theta, u, on=("A0", "A"),
                                out=(("R", k_dim * 2),))
    perm = rotated.permute(["R"] + [l for l in rotated.labels if l != "R"])
    amps = perm.amplitudes.reshape(k_dim * 2, -1)

    w = mg.measurement_isometry(k_dim * 2, l_dim, u)
    theta_perm = theta.permute(["A0", "A"] + [l for l in theta.labels
                                              if l not in ("A0", "A")])
    full = (w @ theta_perm.amplitudes.reshape(k_dim * 2, -1)).reshape(
        l_dim, n_out, n_out, -1)
    for x in range(n_out):
        for x2 in range(n_out):
            block = full[:, x, x2, :]
            if x != x2:
                assert np.abs(block).max() <= 1e-14
            else:
                np.testing.assert_allclose(block, amps[x * l_dim:(x + 1) * l_dim],
                                           atol=1e-12)
