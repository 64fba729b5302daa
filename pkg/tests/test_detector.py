import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambc_rtse import _kernels
from ambc_rtse.detector import Threshold, decide, detect_block
from ambc_rtse.detector import test_statistic as energy
from ambc_rtse.mathkit import DomainError
from ambc_rtse.model import SystemParams, derive_channel_state, psk, random_stream, synthesize_stream, windows


def test_energy_trivial_cases():
    assert energy(np.zeros(8, complex)) == 0.0
    assert energy(np.exp(1j * np.linspace(0, 6, 50))) == pytest.approx(50.0)
    with pytest.raises(DomainError):
        energy([])


def test_energy_matches_loop():
    y = np.random.default_rng(0).standard_normal(37) + 1j * np.random.default_rng(1).standard_normal(37)
    total = 0.0
    for v in y:
        total += v.real * v.real + v.imag * v.imag
    assert energy(y) == pytest.approx(total, rel=1e-14)


def test_decide_rule():
    assert decide(5.0, Threshold(5.0), True) == 1
    assert decide(0.0, Threshold(5.0), True) == 0
    assert decide(5.0, Threshold(5.0), False) == 0
    assert decide(0.0, Threshold(5.0), False) == 1


def test_threshold_validation():
    assert Threshold(0.0).value == 0.0
    with pytest.raises(DomainError):
        Threshold(0.0, "near_opt")
    with pytest.raises(DomainError):
        Threshold(-1.0)
    with pytest.raises(DomainError):
        Threshold(1.0, "guess")


def _params(**kw):
    base = dict(samples_per_symbol=50, symbols_per_block=40, source_power=100.0, noise_power=1.0, bt_attenuation=1.0)
    base.update(kw)
    return SystemParams(**base)


def test_separable_energies_no_errors():
    p = _params(source=psk(4), noise_power=1e-12)
    ch = derive_channel_state(1, 1, 1, p)
    gamma = 0.5 * (p.N * 100 + p.N * 400)
    res = detect_block(random_stream(p, ch, 4), Threshold(gamma))
    assert res.errors == 0


def test_zero_threshold_decides_all_ones():
    p = _params()
    ch = derive_channel_state(1, 1, 1, p)
    s = random_stream(p, ch, 8)
    res = detect_block(s, Threshold(0.0))
    assert np.all(res.decoded == 1)
    assert res.errors == int((s.payload_bits == 0).sum())


def test_case_counters_partition():
    p = _params(rtse_magnitude=10, rtse_sign=-1)
    ch = derive_channel_state(1, 1, 1, p)
    s = random_stream(p, ch, 2)
    res = detect_block(s, Threshold(p.N * 200.0))
    assert sum(res.case_totals.values()) == p.K
    assert sum(res.case_errors.values()) == res.errors
    for c, tot in res.case_totals.items():
        mask = (s.adjacent_bits() == c[0]) & (s.payload_bits == c[1])
        assert tot == int(mask.sum())


def test_scale_invariance():
    p = _params(rtse_magnitude=7, rtse_sign=1)
    ch = derive_channel_state(1, 1, 1, p)
    s = random_stream(p, ch, 21)
    c = 3.7
    scaled = synthesize_stream(p, ch, s.bits, 21)
    object.__setattr__(scaled, "samples", s.samples * c)
    a = detect_block(s, Threshold(9000.0))
    b = detect_block(scaled, Threshold(9000.0 * c * c))
    assert np.array_equal(a.decoded, b.decoded)


def test_perfect_timing_matches_direct_rule():
    p = _params()
    ch = derive_channel_state(0.4, 1, 1, p)
    s = random_stream(p, ch, 5)
    gamma = 7000.0
    direct = []
    for k in range(1, p.K + 1):
        seg = s.samples[k * p.N:(k + 1) * p.N]
        direct.append(1 if np.sum(np.abs(seg) ** 2) >= gamma else 0)
    assert np.array_equal(detect_block(s, Threshold(gamma)).decoded, direct)


@pytest.mark.parametrize("sign,na", [(-1, 6), (1, 6), (0, 0)])
def test_kernel_energies_match_windows(sign, na):
    p = _params(rtse_magnitude=na, rtse_sign=sign)
    ch = derive_channel_state(1, 0.3 + 0.2j, 1, p)
    s = random_stream(p, ch, 13)
    via_kernel = _kernels.window_energies(s.bits[None], s.samples[None], np.zeros((1, s.samples.size)), 1, 1,
                                          p.N, p.shift)[0]
    np.testing.assert_allclose(via_kernel, np.sum(np.abs(windows(s)) ** 2, axis=1), rtol=1e-12)


@pytest.mark.parametrize("order_flag", [True, False])
def test_grid_counting_matches_detect_block(order_flag):
    p = _params(rtse_magnitude=10, rtse_sign=-1)
    ch = derive_channel_state(1, 1, 1, p) if order_flag else derive_channel_state(2, 1, -1, p)
    assert ch.order_flag == order_flag
    s = random_stream(p, ch, 17)
    e = np.sum(np.abs(windows(s)) ** 2, axis=1)
    grid = np.array([6000.0, e[3], 12000.0])
    errs, tots = _kernels.count_errors(e, s.payload_bits, s.adjacent_bits(), grid, order_flag)
    for g, row in zip(grid, errs):
        res = detect_block(s, Threshold(float(g)))
        assert [res.case_errors[c] for c in ((0, 0), (0, 1), (1, 0), (1, 1))] == list(row)
    assert list(tots) == [res.case_totals[c] for c in ((0, 0), (0, 1), (1, 0), (1, 1))]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.booleans())
def test_numpy_and_compiled_counting_agree(seed, flag):
    rng = np.random.default_rng(seed)
    e = rng.exponential(5.0, 300)
    truth = rng.integers(0, 2, 300)
    adj = rng.integers(0, 2, 300)
    grid = np.sort(rng.uniform(0, 20, 9))
    grid[2] = e[0]
    a = _kernels._count_errors_np(e, truth, adj, grid, flag)
    b = _kernels.count_errors(e, truth, adj, grid, flag)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_numpy_and_compiled_energies_agree():
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, (3, 6)).astype(np.int8)
    s = rng.standard_normal((3, 60)) + 1j * rng.standard_normal((3, 60))
    w = rng.standard_normal((3, 60)) + 1j * rng.standard_normal((3, 60))
    for shift in (-4, 0, 4):
        a = _kernels._window_energies_np(bits, s, w, 0.5 + 0j, 1.5 - 1j, 10, shift)
        b = _kernels.window_energies(bits, s, w, 0.5, 1.5 - 1j, 10, shift)
        np.testing.assert_allclose(a, b, rtol=1e-12)
    coef = rng.standard_normal(10) + 0j
    np.testing.assert_allclose(_kernels._case_energies_np(coef, s[:, :10], w[:, :10]),
                               _kernels.case_energies(coef, s[:, :10], w[:, :10]), rtol=1e-12)
