"""Channel representation tests: Choi/Kraus round trips, application routes,
Stinespring dilations, complementary channels, and the builder family."""

import numpy as np
import pytest

from qdecouple import channel as chan
from qdecouple import entropy as ent
from qdecouple.linalg import (
    StateOperator,
    maximally_entangled,
    maximally_mixed,
    partial_trace,
    random_density,
    trace_distance,
)


def test_identity_channel_choi_is_maximally_entangled():
    ch = chan.identity_channel(3)
    want = maximally_entangled(chan.IN_LABEL, "B", 3).to_operator()
    assert trace_distance(ch.choi, want) <= 1e-12
    assert ch.choi.trace == pytest.approx(1.0)
    assert ch.trace_class is chan.TraceClass.TRACE_PRESERVING


def test_subnormalized_single_kraus():
    ch = chan.choi_of([np.eye(2) / np.sqrt(2)])
    want = maximally_entangled(chan.IN_LABEL, "B", 2).to_operator()
    assert np.abs(ch.choi.matrix - 0.5 * want.matrix).max() <= 1e-12
    assert ch.choi.trace == pytest.approx(0.5)
    assert ch.trace_class is chan.TraceClass.TRACE_NON_INCREASING


def test_choi_kraus_round_trip_random():
    rng = np.random.default_rng(50)
    for _ in range(10):
        ch = chan.random_tp_channel(rng, 3, 2, env=int(rng.integers(2, 5)))
        back = chan.choi_of(chan.kraus_of(ch))
        assert np.abs(back.choi.matrix - ch.choi.matrix).max() <= 1e-9
        assert back.trace_class is ch.trace_class


def test_choi_bijection_on_random_psd():
    rng = np.random.default_rng(51)
    for _ in range(100):
        ch = chan.random_cpm(rng, 2, 3, trace=float(rng.uniform(0.2, 1.0)))
        back = chan.choi_of(chan.kraus_of(ch))
        assert np.abs(back.choi.matrix - ch.choi.matrix).max() <= 1e-9


def test_apply_identity_channel():
    rng = np.random.default_rng(52)
    st = random_density(rng, (("A", 2), ("E", 3)))
    out = chan.apply(chan.identity_channel(2), st, ("A",))
    assert np.abs(out.matrix - st.matrix).max() <= 1e-12


def test_apply_erasure_channel():
    rng = np.random.default_rng(53)
    sigma = random_density(rng, (("A", 4),))
    out = chan.apply(chan.reference_channel("erase", 2), sigma, ("A",))
    assert out.dims.pairs == (("B", 1),)
    assert out.matrix[0, 0] == pytest.approx(sigma.trace)


def test_apply_choi_and_kraus_routes_agree():
    rng = np.random.default_rng(54)
    for _ in range(10):
        ch = chan.random_cpm(rng, 2, 3, trace=float(rng.uniform(0.3, 1.0)))
        st = random_density(rng, (("A", 2), ("E", 2)))
        out1 = chan.apply(ch, st, ("A",))
        out2 = chan.apply_via_kraus(ch, st, ("A",))
        assert np.abs(out1.matrix - out2.permute(out1.labels).matrix).max() <= 1e-10


def test_apply_is_linear():
    rng = np.random.default_rng(55)
    ch = chan.random_tp_channel(rng, 2, 2)
    a = random_density(rng, (("A", 2), ("E", 2)))
    b = random_density(rng, (("A", 2), ("E", 2)))
    mix = StateOperator(a.dims, 0.3 * a.matrix + 0.7 * b.matrix)
    lhs = chan.apply(ch, mix, ("A",)).matrix
    rhs = (0.3 * chan.apply(ch, a, ("A",)).matrix
           + 0.7 * chan.apply(ch, b, ("A",)).matrix)
    assert np.abs(lhs - rhs).max() <= 1e-10


def test_apply_dimension_mismatch():
    ch = chan.identity_channel(2)
    st = maximally_mixed((("A", 3),))
    with pytest.raises(chan.ChannelError):
        chan.apply(ch, st, ("A",))


def test_stinespring_postconditions():
    rng = np.random.default_rng(56)
    for _ in range(8):
        env = int(rng.integers(2, 5))
        ch = chan.random_tp_channel(rng, 3, 2, env=env)
        v = chan.stinespring(ch)
        assert np.abs(v.conj().T @ v - np.eye(3)).max() <= 1e-9
        rho = random_density(rng, (("A", 3),))
        big = v @ rho.matrix @ v.conj().T
        kr = len(chan.kraus_of(ch).operators)
        # rows are ordered (out, env); trace out the env factor
        tr_env = np.einsum("iaja->ij", big.reshape(2, kr, 2, kr))
        want = chan.apply(ch, rho, ("A",)).matrix
        assert np.abs(tr_env - want).max() <= 1e-9


def test_stinespring_identity_channel():
    v = chan.stinespring(chan.identity_channel(2))
    assert v.shape == (2, 2)
    np.testing.assert_allclose(np.abs(v.conj().T @ v), np.eye(2), atol=1e-12)


def test_stinespring_measurement_structure():
    # V|i> = |i> (x) |f_i> with orthonormal environment flags
    m = 2
    ch = chan.reference_channel("meas", m)
    v = chan.stinespring(ch)
    d = 2 ** m
    env = v.shape[0] // d
    assert env == d
    flags = []
    for i in range(d):
        w = (v @ np.eye(d)[:, i]).reshape(d, env)
        # output factor must be |i>: all other rows vanish
        mask = np.ones(d, dtype=bool)
        mask[i] = False
        assert np.abs(w[mask]).max() <= 1e-9
        flags.append(w[i])
    gram = np.array([[np.vdot(f1, f2) for f2 in flags] for f1 in flags])
    np.testing.assert_allclose(gram, np.eye(d), atol=1e-9)


def test_stinespring_requires_trace_preserving():
    rng = np.random.default_rng(57)
    ch = chan.random_cpm(rng, 2, 2, trace=0.7)
    with pytest.raises(chan.ChannelError):
        chan.stinespring(ch)


def test_complementary_matches_dilation():
    rng = np.random.default_rng(58)
    for _ in range(6):
        ch = chan.random_tp_channel(rng, 3, 2, env=2)
        comp = chan.complementary(ch)
        v = chan.stinespring(ch)
        env = v.shape[0] // 2
        rho = random_density(rng, (("A", 3),))
        big = v @ rho.matrix @ v.conj().T
        tr_b = np.einsum("aiaj->ij", big.reshape(2, env, 2, env))
        got = chan.apply(comp, rho, ("A",)).matrix
        assert np.abs(got - tr_b).max() <= 1e-9


def test_complementary_of_identity_erases():
    comp = chan.complementary(chan.identity_channel(2))
    assert comp.dim_out == 1
    rng = np.random.default_rng(59)
    rho = random_density(rng, (("A", 2),))
    out = chan.apply(comp, rho, ("A",))
    assert out.matrix[0, 0] == pytest.approx(1.0, abs=1e-10)


def test_complementary_of_erasure_is_unitary_conjugation():
    # the environment carries the input: complementary = W rho W^H
    comp = chan.complementary(chan.reference_channel("erase", 1))
    kraus = chan.kraus_of(comp).operators
    assert len(kraus) == 1
    w = kraus[0]
    np.testing.assert_allclose(w.conj().T @ w, np.eye(2), atol=1e-9)


def test_complementary_of_measurement_via_dilation():
    ch = chan.reference_channel("meas", 1)
    comp = chan.complementary(ch)
    v = chan.stinespring(ch)
    env = v.shape[0] // 2
    rng = np.random.default_rng(60)
    rho = random_density(rng, (("A", 2),))
    big = v @ rho.matrix @ v.conj().T
    tr_b = np.einsum("aiaj->ij", big.reshape(2, env, 2, env))
    got = chan.apply(comp, rho, ("A",)).matrix
    assert np.abs(got - tr_b).max() <= 1e-9


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

TABLE_CASES = [
    ("id", 1, None, -1), ("id", 2, None, -2),
    ("meas", 1, None, 0), ("meas", 2, None, 0),
    ("erase", 1, None, 1), ("erase", 2, None, 2),
    ("id+meas", 2, 1, -1), ("id+meas", 3, 2, -2),
    ("id+trace", 2, 1, 0), ("id+trace", 3, 1, 1),
]


@pytest.mark.parametrize("kind,m,mp,want", TABLE_CASES)
def test_builder_choi_min_entropy(kind, m, mp, want):
    ch = chan.reference_channel(kind, m, mp)
    assert ch.trace_class is chan.TraceClass.TRACE_PRESERVING
    got = ent.h_min(ch.choi, (chan.IN_LABEL,), (ch.out_label,)).value
    assert got == pytest.approx(want, abs=1e-6)


def test_builders_trace_preserving_marginal():
    for kind, m, mp, _ in TABLE_CASES:
        ch = chan.reference_channel(kind, m, mp)
        marg = partial_trace(ch.choi, [chan.IN_LABEL]).matrix
        assert np.abs(marg - np.eye(ch.dim_in) / ch.dim_in).max() <= 1e-10


def test_builder_validation():
    with pytest.raises(chan.ChannelError):
        chan.reference_channel("id+trace", 2, 3)
    with pytest.raises(chan.ChannelError):
        chan.reference_channel("id+trace", 2)
    with pytest.raises(chan.ChannelError):
        chan.reference_channel("warp", 2)


def test_parse_spec():
    ch = chan.parse_spec("id+trace:3,1")
    assert (ch.dim_in, ch.dim_out) == (8, 2)
    with pytest.raises(chan.ChannelError):
        chan.parse_spec("id:x")


def test_channel_json_round_trip():
    rng = np.random.default_rng(61)
    ch = chan.random_tp_channel(rng, 2, 3)
    back = chan.channel_from_json(chan.channel_to_json(ch))
    assert (back.dim_in, back.dim_out) == (2, 3)
    assert np.abs(back.choi.matrix - ch.choi.matrix).max() <= 1e-15
    assert back.trace_class is ch.trace_class
