from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aircomp_ia.alignment import assemble_lambda, blocklength
from aircomp_ia.channel import ScalarMode, apply_channel, draw_channels
from aircomp_ia.errors import InvalidParams, RankDeficient
from aircomp_ia.precoding import build_precoders
from aircomp_ia.topology import build_topology
from aircomp_ia.transceiver import (MessageSet, TrialSpec, demodulate_sum, draw_messages, encode_all, modulate,
                                    noise_variance, run_campaign, run_trial, true_sums, zero_messages,
                                    zf_decode)


def _pre(topo, mode="float", n=1, seed=0):
    T = blocklength(topo, n)
    return build_precoders(topo, draw_channels(topo, T, mode, seed=seed), n, seed)


def test_modulate_examples():
    assert modulate(0, 5) == -2 and modulate(4, 5) == 2
    assert list(modulate(np.array([0, 1]), 2)) == [-0.5, 0.5]
    assert modulate(3, 5, exact_values=True) == Fraction(1)
    with pytest.raises(InvalidParams):
        modulate(0, 1)


def test_demodulate_examples():
    assert demodulate_sum(2.0, 2, 5) == 1
    assert demodulate_sum(-4.0, 2, 5) == 0
    assert demodulate_sum(0.5, 3, 2) == 0
    assert demodulate_sum(np.array([Fraction(2)], dtype=object), 2, 5).tolist() == [1]


@given(st.sampled_from([2, 3, 5, 7, 11]), st.lists(st.integers(0, 100), min_size=1, max_size=6),
       st.floats(-0.49, 0.49))
def test_demodulate_recovers_sum(p, raw, noise):
    w = [x % p for x in raw]
    y = sum(modulate(x, p) for x in w) + noise
    assert demodulate_sum(y, len(w), p) == sum(w) % p


def test_message_validation(example_topology):
    pre = _pre(example_topology)
    with pytest.raises(InvalidParams):
        draw_messages(pre, 4, 0)
    with pytest.raises(InvalidParams):
        MessageSet(p=5, reps=1, symbols={(1, None): np.array([[5]])})
    m = draw_messages(pre, 7, 3, reps=4)
    assert all(v.shape == (1, 4) and v.min() >= 0 and v.max() < 7 for v in m.symbols.values())


def test_zero_messages_nonzero_signal(example_topology):
    pre = _pre(example_topology)
    X, s = encode_all(zero_messages(pre, 2), pre, 1.0)
    for q, x in X.items():
        assert np.all(np.abs(x) > 0)
        assert np.sum(np.abs(x) ** 2) / pre.T <= 1.0 + 1e-12


def test_power_scaling_law(example_topology):
    pre = _pre(example_topology)
    m = draw_messages(pre, 5, 1)
    X1, _ = encode_all(m, pre, 1.0)
    X2, _ = encode_all(m, pre, 2.0)
    for q in X1:
        assert np.allclose(X2[q], np.sqrt(2) * X1[q], rtol=1e-12, atol=0)


def test_loopback_single_tx():
    t = build_topology(1, 1, [])
    spec = TrialSpec(t, p=7)
    for seed in range(5):
        res = run_trial(spec, seed)
        assert res.symbol_error_count == 0
        assert res.decoded[1].tolist() == res.truth[1].tolist()


@pytest.mark.parametrize("topo_args", [(3, 2, [1, 1]), (2, 3, [2])])
def test_noise_free_exact_amplitudes(topo_args):
    # Oracle: the solved useful coordinates must equal the exact sums of the
    # modulated symbols of each cluster, computed directly from the inputs.
    t = build_topology(*topo_args)
    pre = _pre(t, "exact", seed=2)
    m = draw_messages(pre, 5, 2)
    X, s = encode_all(m, pre, 1)
    Y = apply_channel(pre.channels, X)
    for l in t.clusters:
        dest = None if pre.scheme.value == "single_v" else l
        dec = zf_decode(Y[l], assemble_lambda(l, pre), pre.streams(l), t.r, 5, s)
        expect = [sum(Fraction(int(m.payload(q, dest)[k, 0])) - 2 for q in t.group(l)) for k in range(pre.streams(l))]
        assert [a for a in dec.amplitudes[:, 0]] == expect
        assert dec.sums[:, 0].tolist() == true_sums(m, pre)[l][:, 0].tolist()


def test_zero_messages_decode_zero(example_topology):
    pre = _pre(example_topology)
    m = zero_messages(pre, 5)
    X, s = encode_all(m, pre, 1.0)
    Y = apply_channel(pre.channels, X)
    for l in example_topology.clusters:
        assert not zf_decode(Y[l], assemble_lambda(l, pre), 1, 2, 5, s).sums.any()


def test_linearity_exact(example_topology):
    pre = _pre(example_topology, "exact", seed=9)
    m = draw_messages(pre, 5, 9)
    X, s = encode_all(m, pre, 1)
    Y = apply_channel(pre.channels, X)
    zero = {q: np.zeros_like(x) for q, x in X.items()}
    for l in example_topology.clusters:
        lam = assemble_lambda(l, pre)
        full = zf_decode(Y[l], lam, 1, 2, 5, s).amplitudes
        parts = 0
        for q in example_topology.transmitters:
            single = dict(zero)
            single[q] = X[q]
            parts = parts + zf_decode(apply_channel(pre.channels, single)[l], lam, 1, 2, 5, s).amplitudes
        assert list(full.ravel()) == list(parts.ravel())


def test_rank_deficient_signalled(example_topology):
    pre = _pre(example_topology)
    lam = assemble_lambda(1, pre)
    lam[:, 1] = lam[:, 2]
    with pytest.raises(RankDeficient):
        zf_decode(np.ones((65, 1)), lam, 1, 2, 5)


@pytest.mark.parametrize("mode", list(ScalarMode))
def test_trials_noise_free(mode, two_v_topology):
    spec = TrialSpec(two_v_topology, mode=mode, independent=True, reps=3)
    for seed in range(3):
        res = run_trial(spec, seed)
        assert res.symbol_error_count == 0 and res.max_deviation < 0.5


def test_trial_determinism(example_topology):
    spec = TrialSpec(example_topology)
    assert run_trial(spec, 42, 20.0).to_json() == run_trial(spec, 42, 20.0).to_json()


def test_noise_variance():
    assert noise_variance(2.0, None) == 0 and noise_variance(2.0, float("inf")) == 0
    assert noise_variance(2.0, 10.0) == pytest.approx(0.2)


def test_campaign_shape_and_failures(example_topology):
    c = run_campaign(TrialSpec(example_topology), 4, [0.0, 10.0, float("inf")], master_seed=1)
    assert len(c.points) == 3 and len(c.results) == 12
    assert c.points[-1].error_events == 0
    bad = run_campaign(TrialSpec(example_topology, mode=ScalarMode.EXACT), 2, [10.0], master_seed=1)
    assert len(bad.failures) == 2 and bad.points[0].sum_error_rate == 1.0


def test_campaign_worker_invariance(example_topology):
    spec = TrialSpec(example_topology)
    a = run_campaign(spec, 6, [20.0, 40.0], master_seed=3, workers=1)
    b = run_campaign(spec, 6, [20.0, 40.0], master_seed=3, workers=2)
    assert [r.to_json() for r in a.results] == [r.to_json() for r in b.results]


def test_error_rate_falls_with_snr(example_topology):
    c = run_campaign(TrialSpec(example_topology), 60, [0.0, 30.0, 60.0], master_seed=0)
    rates = [p.sum_error_rate for p in c.points]
    assert rates[0] > 0.9 and rates[2] == 0.0 and rates[0] > rates[1] > rates[2]
