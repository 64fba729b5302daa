import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambc_rtse.mathkit import DomainError
from ambc_rtse.model import (
    SourceKind,
    SystemParams,
    case_coefficients,
    channel_for_variances,
    derive_channel_state,
    eta_from_db,
    psk,
    random_stream,
    read_stream_samples,
    synthesize_stream,
    window,
    windows,
    write_stream,
)


def params(**kw):
    base = dict(samples_per_symbol=100, symbols_per_block=100, source_power=100.0, noise_power=1.0,
                bt_attenuation=1.0)
    base.update(kw)
    return SystemParams(**base)


def test_derive_channel_state_hand_values():
    ch = derive_channel_state(1, 1, 1, params())
    assert ch.mu == 2
    assert (ch.sigma0_sq, ch.sigma1_sq, ch.xi0, ch.xi1) == (101, 401, 201, 801)
    assert ch.order_flag and ch.sigma_min_sq == 101 and ch.sigma_max_sq == 401


def test_zero_direct_link_and_no_backscatter():
    assert derive_channel_state(0, 0.3, 2j, params()).sigma0_sq == 1
    ch = derive_channel_state(0.7 + 0.2j, 1, 1, params(bt_attenuation=0))
    assert ch.mu == ch.h and ch.sigma1_sq == ch.sigma0_sq


def test_non_finite_channel_rejected():
    with pytest.raises(DomainError):
        derive_channel_state(math.nan, 1, 1, params())


@pytest.mark.parametrize("kw", [
    dict(symbols_per_block=6), dict(symbols_per_block=0), dict(samples_per_symbol=1),
    dict(rtse_magnitude=50, rtse_sign=-1), dict(rtse_magnitude=3, rtse_sign=0),
    dict(rtse_magnitude=0, rtse_sign=1), dict(noise_power=0.0),
])
def test_params_invariants(kw):
    with pytest.raises(DomainError):
        params(**kw)


def test_eta_db_is_amplitude():
    assert abs(eta_from_db(20.0)) == pytest.approx(0.1)
    assert abs(eta_from_db(1.1)) ** 2 == pytest.approx(10 ** -0.11)


def test_source_kind_parse():
    assert SourceKind.parse("psk4") == psk(4)
    assert SourceKind.parse("gaussian").kind == "complex_gaussian"
    with pytest.raises(DomainError):
        psk(1)


def test_channel_for_variances_roundtrip():
    p = params()
    ch = channel_for_variances(101, 401, p)
    assert ch.sigma0_sq == pytest.approx(101) and ch.sigma1_sq == pytest.approx(401)
    ch = channel_for_variances(300, 50, p)
    assert not ch.order_flag


def test_stream_shape_and_guards():
    p = params(symbols_per_block=8)
    s = random_stream(p, derive_channel_state(1, 1, 1, p), seed=3)
    assert s.bits.shape == (10,) and s.samples.shape == (1000,)
    assert not s.samples.flags.writeable
    with pytest.raises(ValueError):
        s.samples[0] = 0


def test_bad_bits_rejected():
    p = params(symbols_per_block=4)
    ch = derive_channel_state(1, 1, 1, p)
    with pytest.raises(DomainError):
        synthesize_stream(p, ch, [0, 1, 2, 0, 1, 0], 1)
    with pytest.raises(DomainError):
        synthesize_stream(p, ch, [0, 1, 0], 1)


def test_noise_only_power():
    p = params(source_power=0.0, symbols_per_block=100, samples_per_symbol=10)
    ch = derive_channel_state(1, 1, 1, p)
    s = synthesize_stream(p, ch, np.zeros(102, int), seed=5)
    e = np.abs(s.samples) ** 2
    assert abs(e.mean() - 1.0) < 3 * e.std() / math.sqrt(e.size)


def test_all_zero_bits_second_moment():
    p = params(samples_per_symbol=100, symbols_per_block=1000)
    ch = derive_channel_state(1, 1, 1, p)
    e = np.abs(synthesize_stream(p, ch, np.zeros(1002, int), seed=9).samples) ** 2
    assert abs(e.mean() - 101.0) < 3 * e.std() / math.sqrt(e.size)


def test_psk_constant_modulus_without_noise():
    p = params(source=psk(4), noise_power=1e-30, symbols_per_block=4)
    ch = derive_channel_state(0.8, 1, 1, p)
    y = synthesize_stream(p, ch, np.zeros(6, int), seed=2).samples
    np.testing.assert_allclose(np.abs(y) ** 2, 0.64 * 100, rtol=1e-12)


def test_determinism():
    p = params(symbols_per_block=8, rtse_magnitude=3, rtse_sign=1)
    ch = derive_channel_state(1, 0.5j, 1, p)
    a, b = random_stream(p, ch, 11), random_stream(p, ch, 11)
    assert np.array_equal(a.samples, b.samples) and np.array_equal(a.bits, b.bits)
    assert not np.array_equal(a.samples, random_stream(p, ch, 12).samples)


def test_window_aligned_when_no_error():
    p = params(samples_per_symbol=10, symbols_per_block=4)
    s = random_stream(p, derive_channel_state(1, 1, 1, p), 0)
    assert np.array_equal(window(s, 1), s.samples[10:20])
    assert np.array_equal(windows(s)[3], s.samples[40:50])
    with pytest.raises(IndexError):
        window(s, 0)
    with pytest.raises(IndexError):
        window(s, 5)


@pytest.mark.parametrize("sign", [-1, 1])
def test_window_mixed_structure(sign):
    # noiseless PSK: sample energies reveal which symbol each sample came from
    N, na = 20, 4
    p = params(samples_per_symbol=N, symbols_per_block=4, source=psk(8), noise_power=1e-30,
               rtse_magnitude=na, rtse_sign=sign)
    ch = derive_channel_state(1, 1, 1, p)  # |h|^2 P = 100, |mu|^2 P = 400
    bits = [1, 0, 1, 0, 1, 0]
    s = synthesize_stream(p, ch, bits, 0)
    for k in range(1, 5):
        e = np.abs(window(s, k)) ** 2
        cur = bits[k]
        adj = bits[k - 1] if sign < 0 else bits[k + 1]
        expect = np.full(N, 400.0 if cur else 100.0)
        if sign < 0:
            expect[:na] = 400.0 if adj else 100.0
        else:
            expect[N - na:] = 400.0 if adj else 100.0
        np.testing.assert_allclose(e, expect, rtol=1e-9)
        np.testing.assert_allclose(np.abs(case_coefficients((adj, cur), ch, p)) ** 2 * 100, expect)


def test_adjacent_bits_follow_shift_direction():
    p = params(samples_per_symbol=10, symbols_per_block=4, rtse_magnitude=2, rtse_sign=1)
    s = synthesize_stream(p, derive_channel_state(1, 1, 1, p), [0, 1, 1, 0, 0, 1], 0)
    assert list(s.adjacent_bits()) == [1, 0, 0, 1]
    p = p.with_rtse(2, -1)
    s = synthesize_stream(p, derive_channel_state(1, 1, 1, p), [0, 1, 1, 0, 0, 1], 0)
    assert list(s.adjacent_bits()) == [0, 1, 1, 0]


@pytest.mark.parametrize("sign", [-1, 1])
def test_case_means_and_ordering(sign):
    # window-energy means per case, estimated from many short blocks
    N, na = 20, 5
    p = params(samples_per_symbol=N, symbols_per_block=400, rtse_magnitude=na, rtse_sign=sign)
    ch = channel_for_variances(2.0, 5.0, p)
    s0, s1 = ch.sigma0_sq, ch.sigma1_sq
    expect = {(0, 0): N * s0, (1, 0): na * s1 + (N - na) * s0, (0, 1): na * s0 + (N - na) * s1, (1, 1): N * s1}
    assert expect[(0, 0)] < expect[(1, 0)] < expect[(0, 1)] < expect[(1, 1)]
    acc = {c: [] for c in expect}
    for seed in range(15):
        st_ = random_stream(p, ch, seed)
        e = (np.abs(windows(st_)) ** 2).sum(axis=1)
        for a, b, v in zip(st_.adjacent_bits(), st_.payload_bits, e):
            acc[(int(a), int(b))].append(v)
    for c, vals in acc.items():
        v = np.asarray(vals)
        assert abs(v.mean() - expect[c]) < 3 * v.std(ddof=1) / math.sqrt(v.size), c


def test_stream_dump_roundtrip(tmp_path):
    p = params(samples_per_symbol=4, symbols_per_block=4)
    s = random_stream(p, derive_channel_state(1, 1, 1j, p), 1)
    for name in ("s.bin", "s.csv"):
        path = write_stream(s, tmp_path / name)
        np.testing.assert_array_equal(read_stream_samples(path), s.samples)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 200), st.data())
def test_params_accepts_all_valid_offsets(N, data):
    na = data.draw(st.integers(0, (N - 1) // 2))
    sign = 0 if na == 0 else data.draw(st.sampled_from([-1, 1]))
    p = SystemParams(samples_per_symbol=N, symbols_per_block=4, rtse_magnitude=na, rtse_sign=sign)
    assert 2 * p.n_a < p.N and abs(p.shift) == na
