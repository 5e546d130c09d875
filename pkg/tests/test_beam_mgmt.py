import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmwbm.beam_mgmt import (
    BeamProbe,
    BmState,
    LinkBudget,
    achieved_snr,
    dl_assisted,
    dl_sequence,
    exhaustive_search,
    flat_sequence,
    initialize,
    measure_snr,
    mrc_init_snr,
    mrt_precoder,
    only_ul,
    order_members,
    run_scheme,
    run_tti,
    sweep_sequence,
)
from mmwbm.channel import ClusterParams, draw_channel, evolve_channel


def budget(th_db, tx_db=0.0):
    return LinkBudget.from_db(tx_db, th_db)


def warm_state(codebook, channel, th_db=15.0):
    return initialize(codebook, channel, budget(th_db)).state


# --- sweep ordering ---------------------------------------------------------


def test_sweep_trace_hand_derived():
    assert sweep_sequence(17, 5) == (6, 4, 7, 3, 8, 2, 9, 1, 10, 11, 12, 13, 14, 15, 16, 17)


def test_sweep_edges():
    assert sweep_sequence(17, 17) == tuple(range(16, 0, -1))
    assert sweep_sequence(5, 1) == (2, 3, 4, 5)
    assert sweep_sequence(2, 1) == (2,)
    assert sweep_sequence(2, 2) == (1,)
    assert sweep_sequence(6, 3) == (4, 2, 5, 1, 6)


@pytest.mark.parametrize("card,nu", [(1, 1), (5, 0), (5, 6)])
def test_sweep_rejects_bad_input(card, nu):
    with pytest.raises(ValueError):
        sweep_sequence(card, nu)


@given(st.integers(2, 64).flatmap(lambda c: st.tuples(st.just(c), st.integers(1, c))))
def test_sweep_is_permutation_without_nu(args):
    card, nu = args
    seq = sweep_sequence(card, nu)
    assert sorted(seq) == [k for k in range(1, card + 1) if k != nu]


@given(st.integers(3, 40).flatmap(lambda c: st.tuples(st.just(c), st.integers(1, c - 1))))
def test_sweep_distance_never_shrinks(args):
    card, nu = args
    d = [abs(k - nu) for k in sweep_sequence(card, nu)]
    assert d == sorted(d)


def test_order_members():
    angles = np.arange(10.0)
    assert order_members([3, 4, 5], 4, angles) == [4, 5, 3]
    # anchor outside the set seeds at the nearest member
    assert order_members([6, 7, 8], 9, angles) == [8, 7, 6]
    assert order_members([], 1, angles) == []
    assert order_members([2], 9, angles) == [2]


def test_dl_sequence_hierarchical_order(codebook):
    # previous beam 7 sweeps 8, 6, 9, 5; best is 9 under level-2 beam 2,
    # whose level-3 parent 1 also holds level-2 beam 1 (angles 1..6)
    swept = sweep_sequence(17, 7)[:4]
    assert swept == (8, 6, 9, 5)
    seq = dl_sequence(codebook, 9, swept)
    assert seq == (10, 7, 4, 3, 2, 1, 11, 12, 13, 14, 15, 16, 17)
    assert len(seq) == 17 - 4


def test_flat_sequence():
    swept = sweep_sequence(17, 7)[:4]
    assert flat_sequence(17, 7, swept) == (7, 10, 4, 11, 3, 12, 2, 13, 1, 14, 15, 16, 17)


@given(st.integers(1, 17), st.integers(1, 17))
@settings(max_examples=60, deadline=None)
def test_dl_sequence_covers_remaining(codebook, prev, best):
    swept = sweep_sequence(17, prev)[:4]
    seq = dl_sequence(codebook, best, swept)
    assert len(seq) == len(set(seq))
    assert set(seq) == set(range(1, 18)) - set(swept)


# --- measurements -------------------------------------------------------------


def test_link_budget():
    b = LinkBudget.from_db(-1.0, 20.0)
    assert b.snr == pytest.approx(10 ** -0.1)
    assert b.snr_threshold == pytest.approx(100.0)
    with pytest.raises(ValueError):
        LinkBudget(0.0)


def test_measure_snr_phase_invariant(channel, codebook):
    u = codebook.beam(1, 4).vector
    H = channel.block(0)
    v = np.array([1, 1j, -1, 0.5]) / np.sqrt(3.25)
    b = budget(0)
    g = measure_snr(u, H, v, b)
    for phase in (0.3, 2.0, -1.1):
        assert measure_snr(u * np.exp(1j * phase), H, v, b) == pytest.approx(g)
    e = H.conj().T @ u
    assert g == pytest.approx(abs(np.vdot(v, e)) ** 2 / 256)


def test_mrc_is_upper_bound_on_any_precoder(channel, codebook):
    u = codebook.beam(1, 10).vector
    H = channel.block(1)
    b = budget(0)
    rng = np.random.default_rng(0)
    mrc = mrc_init_snr(u, H, b)
    for _ in range(20):
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        v /= np.linalg.norm(v)
        assert measure_snr(u, H, v, b) <= mrc + 1e-9


def test_mrt_precoder_attains_top_eigenvalue():
    rng = np.random.default_rng(4)
    E = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    v = mrt_precoder(E)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    lam = np.linalg.eigvalsh(E @ E.conj().T)[-1]
    assert np.linalg.norm(E.conj().T @ v) ** 2 == pytest.approx(lam)
    first = v[np.argmax(np.abs(v) > 1e-12)]
    assert first.imag == pytest.approx(0.0, abs=1e-12) and first.real > 0
    with pytest.raises(ValueError):
        mrt_precoder(np.zeros((4, 2)))


def test_achieved_snr_uses_active_counts():
    E = np.array([[1.0], [0.0]])
    assert achieved_snr(E, [4], LinkBudget(2.0)) == pytest.approx(0.5)


# --- schemes ------------------------------------------------------------------


def test_initialize_stops_early_when_easy(codebook, channel):
    res = initialize(codebook, channel, budget(-50))
    assert res.aligned and res.searches == 1
    assert res.beams == (1, 1)


def test_initialize_unattainable_sweeps_all(codebook, channel):
    res = initialize(codebook, channel, budget(80))
    assert not res.aligned and res.searches == 17
    table = BeamProbe(codebook, channel).mrc_table(1, budget(80))
    assert res.beams == tuple(int(k) + 1 for k in table.argmax(axis=1))
    assert initialize(codebook, channel, budget(80), max_cts=5).searches == 5


def test_zero_threshold_is_only_ul(codebook, channel):
    state = warm_state(codebook, channel)
    b = LinkBudget(1.0, 1.0, 0.0)
    p = run_tti(state, codebook, channel, b)
    u = only_ul(state, codebook, channel, b)
    assert p.aligned and u.aligned
    assert (p.beams, p.searches, p.achieved_snr) == (u.beams, u.searches, u.achieved_snr)


def test_unattainable_threshold_costs_k1(codebook, channel):
    state = warm_state(codebook, channel)
    b = budget(80)
    for fn in (run_tti, dl_assisted, exhaustive_search):
        res = fn(state, codebook, channel, b)
        assert res.searches == 17
        assert not res.aligned
    assert only_ul(state, codebook, channel, b).searches == 4


def test_fallback_keeps_best_measured(codebook, channel):
    state = warm_state(codebook, channel)
    res = run_tti(state, codebook, channel, budget(80))
    table = BeamProbe(codebook, channel).snr_table(1, state.precoder, budget(80))
    assert res.beams == tuple(int(k) + 1 for k in table.argmax(axis=1))
    assert res.state.beams == res.beams
    assert len(res.state.snr_cache) == 2 * 17


def test_run_scheme_dispatch(codebook, channel):
    state = warm_state(codebook, channel)
    assert run_scheme("only_ul", state, codebook, channel, budget(20)).scheme == "only_ul"
    with pytest.raises(ValueError, match="unknown scheme"):
        run_scheme("greedy", state, codebook, channel, budget(20))


def test_ul_phase_needs_two_beams(channel):
    from mmwbm.codebook import LevelSpec, build_codebook

    cb = build_codebook(channel.aip, (LevelSpec(1, (0, 0)),))
    with pytest.raises(ValueError, match="two level-1"):
        only_ul(BmState((1, 1)), cb, channel, budget(0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(5.0, 30.0), st.booleans())
def test_scheme_invariants(codebook, geom, ue, seed, th_db, prune):
    rng = np.random.default_rng(seed)
    ch0 = draw_channel(ClusterParams(), geom, ue, rng, 2)
    ch1 = evolve_channel(ch0, 3.0, rng)
    b = budget(th_db, -1.0)
    state = initialize(codebook, ch0, b).state
    probe = BeamProbe(codebook, ch1)
    results = {
        "proposed": run_tti(state, codebook, ch1, b, probe=probe, wide_beam_pruning=prune),
        "dl_assisted": dl_assisted(state, codebook, ch1, b, probe=probe),
        "only_ul": only_ul(state, codebook, ch1, b, probe=probe),
        "exhaustive": exhaustive_search(state, codebook, ch1, b, probe=probe),
    }
    for res in results.values():
        if res.aligned:
            assert res.achieved_snr >= b.snr_threshold * (1 - 1e-12)
        assert res.state.beams == res.beams
    ex = results["exhaustive"].achieved_snr
    for name in ("proposed", "dl_assisted", "only_ul"):
        assert ex >= results[name].achieved_snr * (1 - 1e-12)
    assert results["only_ul"].searches == 4
    assert results["exhaustive"].searches == 17
    assert 4 <= results["proposed"].searches
    assert 4 <= results["dl_assisted"].searches <= 17
    if not prune:
        assert results["proposed"].searches <= 17
    if results["only_ul"].aligned:
        assert results["proposed"].searches == 4


def test_probe_matches_direct_measurement(codebook, channel):
    probe = BeamProbe(codebook, channel)
    b = budget(0)
    v = np.array([1, 0, 0, 0], dtype=complex)
    t = probe.snr_table(1, v, b)
    assert t[1, 6] == pytest.approx(measure_snr(codebook.beam(1, 7).vector, channel.block(1), v, b))
    m = probe.mrc_table(2, b)
    assert m[0, 1] == pytest.approx(mrc_init_snr(codebook.beam(2, 2).vector, channel.block(0), b))
