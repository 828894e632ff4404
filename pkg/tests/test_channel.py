import math

import numpy as np
import pytest

from widecap.channel import (
    DiscreteChannel,
    FilterBankCodeword,
    PilotCirculant,
    analytic_tap_correlation,
    block_idft_matrix,
    channel_from_json,
    channel_to_json,
    circulant_eigenvalues,
    filterbank_equivalence_check,
    frequency_response,
    integer_coherence_length,
    sample_taps,
    unit_fading_samples,
)
from widecap.scenario import ChannelScenario, FadingFamily


def scenario(nt=1, nr=1, lc=8.0, fading=None):
    return ChannelScenario(
        snr_density=100.0,
        coherence_time=1.0,
        coherence_bandwidth=lc,
        nt=nt,
        nr=nr,
        fading=fading or FadingFamily.rayleigh(),
    )


def naive_dft(taps, k):
    out = np.zeros(k, dtype=complex)
    for idx in range(k):
        for n, tap in enumerate(taps):
            out[idx] += tap * np.exp(-2j * np.pi * idx * n / k)
    return out


def make_channel(taps, k_samples):
    taps = np.asarray(taps, dtype=complex).reshape(1, 1, -1)
    m = taps.shape[-1]
    return DiscreteChannel(
        k_samples=k_samples, m_taps=m, taps=taps, gains=np.full(m, 1.0 / m)
    )


class TestSampleTaps:
    def test_tap_count(self):
        channel = sample_taps(scenario(), 32, rng_seed=1)
        assert channel.m_taps == 4
        assert channel.taps.shape == (1, 1, 4)
        assert channel.coherence_length == 8

    def test_non_divisible_k_rejected(self):
        with pytest.raises(ValueError):
            sample_taps(scenario(), 30, rng_seed=1)

    def test_deterministic_for_seed(self):
        a = sample_taps(scenario(nt=2, nr=2), 32, rng_seed=7)
        b = sample_taps(scenario(nt=2, nr=2), 32, rng_seed=7)
        assert np.array_equal(a.taps, b.taps)
        assert not np.array_equal(a.taps, sample_taps(scenario(nt=2, nr=2), 32, 8).taps)

    def test_unit_total_power(self):
        # The per-tap scaling makes E[sum_n |h[n]|^2] = 1; check the sampler
        # core over 1e5 realizations of a 4-tap profile.
        rng = np.random.default_rng(0)
        draws = unit_fading_samples(rng, FadingFamily.rayleigh(), (100_000, 4))
        total = np.mean(np.sum(np.abs(draws) ** 2 / 4.0, axis=1))
        assert abs(total - 1.0) < 0.01

    def test_rayleigh_tap_kurtosis(self):
        rng = np.random.default_rng(1)
        draws = unit_fading_samples(rng, FadingFamily.rayleigh(), 1_000_000)
        power = np.abs(draws) ** 2
        kurt = np.mean(power**2) / np.mean(power) ** 2
        assert abs(kurt - 2.0) < 0.02

    def test_custom_gain_profile_renormalized(self):
        profile = np.array([4.0, 2.0, 1.0, 1.0])
        channel = sample_taps(scenario(), 32, rng_seed=3, gains=profile)
        assert channel.gains.sum() == pytest.approx(1.0, abs=1e-15)
        assert channel.gains[0] == pytest.approx(0.5)

    def test_integer_coherence_length_rounding(self):
        assert integer_coherence_length(8.0) == 8
        assert integer_coherence_length(7.9999999999) == 8
        assert integer_coherence_length(8.3) == 9


class TestFrequencyResponse:
    def test_flat_for_single_tap(self):
        channel = frequency_response(make_channel([1.0], 8))
        assert channel.freq_blocks.shape == (8, 1, 1)
        assert np.allclose(channel.freq_blocks[:, 0, 0], 1.0, atol=1e-14)

    def test_delay_theorem(self):
        channel = frequency_response(make_channel([0.0, math.sqrt(2)], 16))
        response = channel.freq_blocks[:, 0, 0] / math.sqrt(2)
        expected = np.exp(-2j * np.pi * np.arange(16) / 16)
        assert np.allclose(response, expected, atol=1e-14)
        assert np.allclose(np.abs(response), 1.0, atol=1e-14)

    def test_matches_naive_dft(self):
        channel = sample_taps(scenario(), 64, rng_seed=5)
        channel = frequency_response(channel)
        expected = naive_dft(channel.taps[0, 0], 64)
        assert np.max(np.abs(channel.freq_blocks[:, 0, 0] - expected)) < 1e-12

    def test_parseval(self):
        channel = frequency_response(sample_taps(scenario(nt=2, nr=2), 64, rng_seed=9))
        power_freq = np.sum(np.abs(channel.freq_blocks) ** 2, axis=0)
        power_time = 64 * np.sum(np.abs(channel.taps) ** 2, axis=-1)
        assert np.allclose(power_freq, power_time, rtol=1e-9)

    def test_correlation_structure(self):
        # Sample correlation across subcarriers tracks the DFT of the gain
        # profile; it is zero (to MC noise) at multiples of the coherence
        # length.
        k, m, n = 32, 4, 20_000
        rng = np.random.default_rng(11)
        taps = unit_fading_samples(rng, FadingFamily.rayleigh(), (n, m)) / math.sqrt(m)
        spectra = np.fft.fft(taps, n=k, axis=1)
        gains = np.full(m, 1.0 / m)
        lags = [1, 2, 5, 8, 12, 16, 24]
        analytic = analytic_tap_correlation(gains, k, lags)
        for lag, expected in zip(lags, analytic):
            pairs = spectra[:, :-lag].reshape(-1) * np.conj(spectra[:, lag:]).reshape(-1)
            corr = np.mean(pairs)  # E|H[k]|^2 = 1
            assert abs(corr - np.conj(expected)) < 0.05
            if lag % 8 == 0:
                assert abs(corr) < 15.0 / math.sqrt(n)


class TestPilotCirculant:
    def make_pilot(self, k=64, cols=8, seed=2):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        x *= math.sqrt(k / np.sum(np.abs(x) ** 2))
        return PilotCirculant(k_rows=k, cols=cols, base_signal=x)

    def test_unit_power_enforced(self):
        with pytest.raises(ValueError):
            PilotCirculant(k_rows=4, cols=2, base_signal=np.ones(4) * 2.0)

    def test_entry_layout(self):
        pilot = self.make_pilot(k=8, cols=3)
        xi = pilot.materialize()
        for i in range(8):
            for j in range(3):
                assert xi[i, j] == pilot.base_signal[(i - j) % 8]

    def test_impulse_pilot_flat_spectrum(self):
        k = 32
        x = np.zeros(k, dtype=complex)
        x[0] = math.sqrt(k)
        pilot = PilotCirculant(k_rows=k, cols=8, base_signal=x)
        eigs, psi = circulant_eigenvalues(pilot)
        assert np.allclose(eigs, k, rtol=1e-12)
        assert psi == pytest.approx(1.0, rel=1e-12)

    def test_constant_pilot_degenerate_spectrum(self):
        k = 64
        pilot = PilotCirculant(k_rows=k, cols=8, base_signal=np.ones(k, dtype=complex))
        eigs, psi = circulant_eigenvalues(pilot)
        assert eigs[0] == pytest.approx(k**2, rel=1e-12)
        assert np.all(np.abs(eigs[1:]) < 1e-9 * k**2)
        assert psi == pytest.approx(0.0, abs=1e-12)

    def test_formula_matches_dense_eigensolver(self):
        pilot = self.make_pilot(k=64, cols=8)
        formula, _ = circulant_eigenvalues(pilot)
        dense = np.linalg.eigvalsh(pilot.folded_gram()).real
        gap = np.max(np.abs(np.sort(formula) - np.sort(dense)))
        assert gap < 1e-9 * np.max(dense)

    def test_gram_trace_identity(self):
        # Unit pilot power pins the mean normalized Gram eigenvalue at one.
        for seed in range(5):
            pilot = self.make_pilot(seed=seed)
            trace = float(np.trace(pilot.gram()).real)
            assert abs(trace / (pilot.cols * pilot.k_rows) - 1.0) < 1e-12


class TestBlockIdft:
    def test_single_symbol_identity(self):
        assert np.allclose(block_idft_matrix(1, 3), np.eye(3))

    def test_two_point_transform(self):
        expected = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
        assert np.allclose(block_idft_matrix(2, 1), expected, atol=1e-15)

    @pytest.mark.parametrize("l_symbols,m_bins", [(2, 2), (8, 4), (16, 8)])
    def test_unitarity(self, l_symbols, m_bins):
        phi = block_idft_matrix(l_symbols, m_bins)
        k = l_symbols * m_bins
        assert np.max(np.abs(phi @ phi.conj().T - np.eye(k))) < 1e-12


class TestFilterBankEquivalence:
    def random_codeword(self, m_bins, l_symbols, seed):
        rng = np.random.default_rng(seed)
        symbols = (
            rng.standard_normal((m_bins, l_symbols))
            + 1j * rng.standard_normal((m_bins, l_symbols))
        ) / math.sqrt(2)
        return FilterBankCodeword(m_bins=m_bins, l_symbols=l_symbols, symbols=symbols)

    def test_degenerate_single_bin_flat(self):
        codeword = self.random_codeword(1, 4, seed=0)
        channel = make_channel([1.0], 4)
        assert filterbank_equivalence_check(codeword, channel) < 1e-12

    def test_random_channel_and_codeword(self):
        codeword = self.random_codeword(4, 8, seed=1)
        channel = sample_taps(scenario(lc=8.0), 32, rng_seed=13)
        assert filterbank_equivalence_check(codeword, channel) < 1e-9

    def test_precoding_identity(self):
        # H * Phi * Phi^H * x equals H * x.
        rng = np.random.default_rng(3)
        m_bins, l_symbols = 4, 8
        k = m_bins * l_symbols
        phi = block_idft_matrix(l_symbols, m_bins)
        h = np.repeat(rng.standard_normal(m_bins) + 1j * rng.standard_normal(m_bins), l_symbols)
        x = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        assert np.max(np.abs(h * (phi @ (phi.conj().T @ x)) - h * x)) < 1e-12

    def test_rejects_mimo(self):
        codeword = self.random_codeword(4, 8, seed=2)
        channel = sample_taps(scenario(nt=2, nr=2, lc=8.0), 32, rng_seed=1)
        with pytest.raises(ValueError):
            filterbank_equivalence_check(codeword, channel)

    def test_rejects_grid_mismatch(self):
        codeword = self.random_codeword(4, 8, seed=2)
        channel = sample_taps(scenario(lc=8.0), 64, rng_seed=1)
        with pytest.raises(ValueError):
            filterbank_equivalence_check(codeword, channel)


class TestChannelJson:
    def test_round_trip(self):
        channel = sample_taps(scenario(nt=2, nr=2, lc=8.0), 32, rng_seed=21)
        restored = channel_from_json(channel_to_json(channel))
        assert restored.k_samples == channel.k_samples
        assert restored.m_taps == channel.m_taps
        assert np.array_equal(restored.taps, channel.taps)
        assert np.array_equal(restored.gains, channel.gains)


class TestDiscreteChannelInvariants:
    def test_k_multiple_of_m(self):
        with pytest.raises(ValueError):
            DiscreteChannel(
                k_samples=10, m_taps=4,
                taps=np.ones((1, 1, 4), dtype=complex), gains=np.full(4, 0.25),
            )

    def test_gains_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DiscreteChannel(
                k_samples=8, m_taps=4,
                taps=np.ones((1, 1, 4), dtype=complex), gains=np.full(4, 0.3),
            )
