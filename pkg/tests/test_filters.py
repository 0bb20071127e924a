import numpy as np
import pytest
from scipy import signal as sps

from swnemg.errors import DesignError
from swnemg.filters import (MultiChannelSignal, analytic_magnitude, decimate,
                            design_butterworth, filter_causal, filter_zero_phase)

from oracles import PIPELINE_FILTERS, poly_response, db, tone, fitted_amplitude

class TestDesign:
    @pytest.mark.parametrize("order", range(1, 7))
    @pytest.mark.parametrize("kind", ["lowpass", "highpass"])
    @pytest.mark.parametrize("frac", [0.01, 0.1, 0.3, 0.49])
    def test_stable_and_section_count(self, order, kind, frac):
        f = design_butterworth(order, frac * 1000.0, 1000.0, kind)
        assert len(f.sections) == -(-order // 2)
        assert np.all(np.abs(f.poles()) < 1)

    @pytest.mark.parametrize("order", range(1, 7))
    def test_passband_gain(self, order):
        lp = design_butterworth(order, 40.0, 500.0, "lowpass")
        hp = design_butterworth(order, 40.0, 500.0, "highpass")
        assert abs(abs(lp.response([0.0])[0]) - 1.0) < 1e-9
        assert abs(abs(hp.response([250.0])[0]) - 1.0) < 1e-9

    def test_minus_3db_at_cutoff(self):
        f = design_butterworth(3, 500.0, 2000.0, "lowpass")
        assert db(poly_response(f, [500.0]))[0] == pytest.approx(-3.0103, abs=0.05)

    @pytest.mark.parametrize("order,cutoff,fs,kind", PIPELINE_FILTERS)
    def test_matches_analytic_magnitude(self, order, cutoff, fs, kind):
        f = design_butterworth(order, cutoff, fs, kind)
        freqs = np.logspace(np.log10(fs / 1000), np.log10(0.49 * fs), 100)
        err = np.abs(db(poly_response(f, freqs)) - db(analytic_magnitude(f, freqs)))
        assert err.max() < 0.05

    @pytest.mark.parametrize("order,cutoff,fs,kind", PIPELINE_FILTERS)
    def test_agrees_with_scipy_butter(self, order, cutoff, fs, kind):
        f = design_butterworth(order, cutoff, fs, kind)
        freqs = np.linspace(1.0, fs / 2 - 1.0, 64)
        _, h = sps.sosfreqz(sps.butter(order, cutoff, kind, fs=fs, output="sos"),
                            worN=freqs, fs=fs)
        np.testing.assert_allclose(np.abs(f.response(freqs)), np.abs(h), atol=1e-12)

    def test_rejects_cutoff_at_nyquist(self):
        with pytest.raises(DesignError):
            design_butterworth(2, 250.0, 500.0)

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError):
            design_butterworth(0, 10.0, 500.0)


class TestCausal:
    def test_lowpass_converges_to_one(self):
        f = design_butterworth(2, 20.0, 500.0)
        out = filter_causal(f, MultiChannelSignal(np.ones(2000), 500.0))
        assert abs(out.data[-1, 0] - 1.0) < 1e-6

    def test_highpass_kills_dc(self):
        f = design_butterworth(3, 30.0, 500.0, "highpass")
        out = filter_causal(f, MultiChannelSignal(np.ones(2000), 500.0))
        assert abs(out.data[-1, 0]) < 1e-9

    def test_zeros_stay_zero(self):
        f = design_butterworth(3, 30.0, 500.0, "highpass")
        out = filter_causal(f, MultiChannelSignal(np.zeros((100, 3)), 500.0))
        assert not out.data.any()

    def test_impulse_energy_matches_long_division(self):
        f = design_butterworth(3, 30.0, 500.0, "highpass")
        num = np.array([1.0])
        den = np.array([1.0])
        for row in f.sections:
            num = np.polymul(num, row[:3])
            den = np.polymul(den, row[3:])
        n = 4000
        # power-series long division h = num / den
        h = np.zeros(n)
        num = np.concatenate([num, np.zeros(n)])
        for k in range(n):
            h[k] = num[k] - sum(den[j] * h[k - j] for j in range(1, min(k, len(den) - 1) + 1))
        imp = np.zeros(n)
        imp[0] = 1.0
        out = filter_causal(f, MultiChannelSignal(imp, 500.0)).data[:, 0]
        assert abs(np.sum(out**2) - np.sum(h**2)) < 1e-6

    def test_linearity(self):
        rng = np.random.default_rng(1)
        f = design_butterworth(3, 30.0, 500.0, "highpass")
        x, y = rng.normal(size=(2, 500, 2))
        fx = filter_causal(f, MultiChannelSignal(x, 500.0)).data
        fy = filter_causal(f, MultiChannelSignal(y, 500.0)).data
        fxy = filter_causal(f, MultiChannelSignal(2.5 * x - 0.7 * y, 500.0)).data
        np.testing.assert_allclose(fxy, 2.5 * fx - 0.7 * fy, rtol=1e-9, atol=1e-12)

    def test_rate_mismatch(self):
        f = design_butterworth(2, 20.0, 500.0)
        with pytest.raises(ValueError):
            filter_causal(f, MultiChannelSignal(np.ones(10), 1000.0))

    def test_streaming_blocks_equal_one_shot(self):
        rng = np.random.default_rng(2)
        f = design_butterworth(3, 500.0, 2000.0)
        x = rng.normal(size=(400, 3))
        whole = filter_causal(f, MultiChannelSignal(x, 2000.0)).data
        parts = np.vstack([f.process(x[i:i + 40]) for i in range(0, 400, 40)])
        np.testing.assert_allclose(parts, whole, atol=1e-12)


class TestZeroPhase:
    def test_no_lag_for_in_band_tone(self):
        f = design_butterworth(2, 20.0, 500.0)
        x = tone(5.0, 500.0, 2000)
        y = filter_zero_phase(f, MultiChannelSignal(x, 500.0)).data[:, 0]
        lags = np.arange(-50, 51)
        xc = [np.dot(x[200:1800], np.roll(y, -lag)[200:1800]) for lag in lags]
        assert lags[int(np.argmax(xc))] == 0

    def test_constant_unchanged(self):
        f = design_butterworth(2, 20.0, 500.0)
        y = filter_zero_phase(f, MultiChannelSignal(np.full(100, 3.5), 500.0)).data
        np.testing.assert_allclose(y, 3.5, atol=1e-12)

    def test_cutoff_attenuated_twice(self):
        f = design_butterworth(2, 20.0, 500.0)
        x = tone(20.0, 500.0, 5000)
        y = filter_zero_phase(f, MultiChannelSignal(x, 500.0)).data[:, 0]
        amp = fitted_amplitude(y[1000:4000], 20.0, 500.0)
        assert amp == pytest.approx(10 ** (-6.0206 / 20), rel=0.01)

    def test_symmetric_input_symmetric_output(self):
        n = 801
        t = np.arange(n) - n // 2
        x = np.exp(-(t / 60.0) ** 2) * np.cos(2 * np.pi * t / 80.0)
        f = design_butterworth(2, 20.0, 500.0)
        y = filter_zero_phase(f, MultiChannelSignal(x, 500.0)).data[:, 0]
        np.testing.assert_allclose(y, y[::-1], atol=1e-9)

    def test_too_short(self):
        f = design_butterworth(2, 20.0, 500.0)
        with pytest.raises(ValueError):
            filter_zero_phase(f, MultiChannelSignal(np.ones(12), 500.0))


class TestDecimate:
    def test_keep_first(self):
        out = decimate(MultiChannelSignal(np.arange(1, 11), 500.0), 2)
        assert out.data[:, 0].tolist() == [1, 3, 5, 7, 9]
        assert out.sample_rate_hz == 250.0

    def test_length(self):
        out = decimate(MultiChannelSignal(np.zeros((500, 12)), 500.0), 25)
        assert out.data.shape == (20, 12) and out.sample_rate_hz == 20.0

    def test_identity(self):
        x = np.random.default_rng(0).normal(size=(30, 2))
        np.testing.assert_array_equal(decimate(MultiChannelSignal(x, 500.0), 1).data, x)

    def test_bad_factor(self):
        with pytest.raises(ValueError):
            decimate(MultiChannelSignal(np.zeros(4), 500.0), 0)
