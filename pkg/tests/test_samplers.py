import numpy as np
import pytest
from scipy import stats

from bosonsim import CutoffPolicy, InputSpec, NoiseParams, fourier, haar_random
from bosonsim.errors import DegenerateDistributionError, InvalidArgumentError, SizeLimitError
from bosonsim.probability import configurations, exact_probabilities, truncated_probabilities
from bosonsim.samplers import (
    SampleSet,
    Verdict,
    distinguish,
    estimate_subset_probability,
    k_interfering_probabilities,
    sample_exact,
    sample_k_interfering,
    sample_truncated,
    truncated_law,
)


def _freqs(data, configs):
    index = {tuple(c): i for i, c in enumerate(configs.tolist())}
    counts = np.zeros(len(configs))
    for row in data.records.tolist():
        counts[index[tuple(row)]] += 1
    return counts


def test_single_boson_law():
    u = haar_random(2, 4)
    data = sample_exact(u, InputSpec(1, 2), NoiseParams(), 100_000, 1)
    p = abs(u.matrix[0, 0]) ** 2
    freq = data.records[:, 0].mean()
    assert abs(freq - p) < 3 * np.sqrt(p * (1 - p) / 100_000)


def test_dark_counts_only():
    u = haar_random(4, 1)
    nu = 2.0
    data = sample_exact(u, InputSpec(2, 4), NoiseParams(1.0, 1e-6, nu), 50_000, 3)
    totals = data.records.sum(axis=1)
    assert abs(totals.mean() - 4 * nu) < 4 * np.sqrt(4 * nu / 50_000)
    assert abs(totals.var() - 4 * nu) < 0.2


def test_exact_sampler_frequencies():
    u = fourier(3)
    inp = InputSpec(3, 3)
    configs = configurations(3, 3)
    p = exact_probabilities(u, inp, 0.5, configs)
    t = 200_000
    counts = _freqs(sample_exact(u, inp, NoiseParams(0.5), t, 5), configs)
    se = np.sqrt(p * (1 - p) / t)
    assert np.all(np.abs(counts / t - p) <= 4 * se + 1e-12)


def test_lossy_sampler_mean_counts():
    u = haar_random(3, 2)
    noise = NoiseParams(0.8, 0.9, 0.1)
    data = sample_exact(u, InputSpec(2, 3), noise, 100_000, 8)
    expected = 2 * 0.81 + 3 * 0.1
    assert abs(data.records.sum(axis=1).mean() - expected) < 0.01


def test_determinism():
    u = haar_random(4, 1)
    inp = InputSpec(3, 4)
    a = sample_exact(u, inp, NoiseParams(0.7), 1000, 9)
    b = sample_exact(u, inp, NoiseParams(0.7), 1000, 9)
    c = sample_exact(u, inp, NoiseParams(0.7), 1000, 10)
    assert np.array_equal(a.records, b.records)
    assert not np.array_equal(a.records, c.records)
    k1 = sample_k_interfering(u, inp, 2, 0.7, 500, 4)
    k2 = sample_k_interfering(u, inp, 2, 0.7, 500, 4)
    assert np.array_equal(k1.records, k2.records)


def test_prefix_stability():
    # each record uses its own block of uniforms, so shorter runs are prefixes of longer ones
    u = haar_random(4, 1)
    inp = InputSpec(3, 4)
    short = sample_exact(u, inp, NoiseParams(0.7), 100, 2)
    long = sample_exact(u, inp, NoiseParams(0.7), 1000, 2)
    assert np.array_equal(short.records, long.records[:100])


def test_truncated_full_cutoff_equals_exact():
    u = haar_random(4, 3)
    inp = InputSpec(3, 4)
    configs, probs, clamped, _ = truncated_law(u, inp, CutoffPolicy(3, 0.6))
    assert clamped == 0.0
    assert np.allclose(probs, exact_probabilities(u, inp, 0.6, configs), atol=1e-14)


def test_truncated_k1_is_classical():
    u = haar_random(4, 3)
    inp = InputSpec(3, 4)
    configs, probs, clamped, events = truncated_law(u, inp, CutoffPolicy(1, 1.0))
    assert clamped == 0.0 and events == 0
    assert np.allclose(probs, exact_probabilities(u, inp, 0.0, configs), atol=1e-14)


def test_truncated_p1_matches_renormalized_law():
    u = haar_random(4, 3)
    inp = InputSpec(4, 4)
    pol = CutoffPolicy(2, 1.0)
    configs, probs, _, _ = truncated_law(u, inp, pol)
    raw = truncated_probabilities(u, inp, pol, configs)
    clamped = np.clip(raw, 0, None)
    p1 = (clamped / clamped.sum())[configs[:, 0] == 0].sum()
    t = 100_000
    est, se = estimate_subset_probability(sample_truncated(u, inp, pol, t, 6), [1, 2, 3])
    assert abs(est - p1) < 4 * np.sqrt(p1 * (1 - p1) / t)


def test_truncated_metadata_and_degenerate(monkeypatch):
    u = haar_random(4, 3)
    inp = InputSpec(4, 4)
    data = sample_truncated(u, inp, CutoffPolicy(2, 1.0), 10, 1)
    assert set(data.metadata) == {"clamped_mass", "clamp_events"}
    assert data.metadata["clamped_mass"] >= 0.0
    import bosonsim.samplers as s

    monkeypatch.setattr(s, "truncated_probabilities", lambda *a, **k: -np.ones(35))
    with pytest.raises(DegenerateDistributionError):
        s.sample_truncated(u, inp, CutoffPolicy(3, 1.0), 10, 1)


def test_k_interfering_limits():
    u = haar_random(3, 7)
    inp = InputSpec(3, 3)
    a = sample_k_interfering(u, inp, 3, 0.5, 1000, 2)
    configs, probs = k_interfering_probabilities(u, inp, 3, 0.5)
    assert np.allclose(probs, exact_probabilities(u, inp, 0.5, configs))
    configs, probs = k_interfering_probabilities(u, inp, 0, 0.5)
    assert np.allclose(probs, exact_probabilities(u, inp, 0.0, configs))
    assert len(a) == 1000
    with pytest.raises(InvalidArgumentError):
        sample_k_interfering(u, inp, 4, 0.5, 10, 1)


def test_k_interfering_marginals():
    u = fourier(4)
    inp = InputSpec(4, 4)
    configs, probs = k_interfering_probabilities(u, inp, 2, 1.0)
    t = 100_000
    data = sample_k_interfering(u, inp, 2, 1.0, t, 3)
    counts = _freqs(data, configs)
    # chi-square over the full law, plus single-port mean occupations
    assert counts[probs == 0].sum() == 0
    mask = probs * t >= 5
    rest = ~mask & (probs > 0)
    obs = np.append(counts[mask], counts[rest].sum())
    exp = np.append(probs[mask], probs[rest].sum()) * t
    if exp[-1] == 0:
        obs, exp = obs[:-1], exp[:-1]
    assert stats.chisquare(obs, exp).pvalue > 0.001
    mean = probs @ configs
    var = probs @ configs**2 - mean**2
    assert np.all(np.abs(data.records.mean(axis=0) - mean) < 4 * np.sqrt(var / t))


def test_estimate_subset():
    u = haar_random(3, 1)
    data = sample_exact(u, InputSpec(2, 3), NoiseParams(), 500, 1)
    assert estimate_subset_probability(data, [0, 1, 2]) == (1.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        estimate_subset_probability(SampleSet({"name": "x"}, np.zeros((0, 3)), 1), [0])
    rng = np.random.default_rng(0)
    hits = rng.random(10_000) < 0.3
    records = np.where(hits[:, None], [[0, 1]], [[1, 0]])
    p, se = estimate_subset_probability(SampleSet({"name": "bern"}, records, 0), [1])
    assert abs(p - 0.3) < 4 * se


def test_distinguish():
    u = haar_random(3, 1)
    data = sample_exact(u, InputSpec(2, 3), NoiseParams(), 2000, 1)
    res = distinguish(data, data, [1, 2])
    assert res.z_score == 0.0 and res.verdict is Verdict.INCONCLUSIVE
    rng = np.random.default_rng(1)

    def stream(p, seed):
        hits = np.random.default_rng(seed).random(10_000) < p
        return SampleSet({"name": "bern"}, np.where(hits[:, None], [[0, 1]], [[1, 0]]), seed)

    res = distinguish(stream(0.5, 1), stream(0.6, 2), [1], 5.0)
    assert res.verdict is Verdict.SEPARATED and abs(res.z_score) > 10
    assert res.p_value < 1e-10


def test_jsonl_round_trip(tmp_path):
    u = haar_random(3, 1)
    data = sample_truncated(u, InputSpec(2, 3), CutoffPolicy(1, 0.5), 50, 4)
    path = tmp_path / "d.jsonl"
    data.write_jsonl(path)
    back = SampleSet.read_jsonl(path)
    assert np.array_equal(back.records, data.records)
    assert back.model == data.model and back.seed == 4
    assert back.input_ports == data.input_ports and back.instance_hash == u.instance_hash
    lines = path.read_text().splitlines()
    assert len(lines) == 51 and '"type": "header"' in lines[0]


def test_sampler_size_cap():
    with pytest.raises(SizeLimitError):
        sample_exact(haar_random(30, 1), InputSpec(12, 30), NoiseParams(), 10, 1)


def test_count_validation():
    u = haar_random(3, 1)
    with pytest.raises(InvalidArgumentError):
        sample_exact(u, InputSpec(2, 3), NoiseParams(), 0, 1)


def test_channel_consistency():
    u = haar_random(4, 2)
    inp = InputSpec(3, 4)
    lossless = sample_exact(u, inp, NoiseParams(0.9), 5000, 1)
    assert np.all(lossless.records.sum(axis=1) == 3)
    eta = 0.8
    t = 100_000
    data = sample_exact(u, inp, NoiseParams(0.9, eta, 0.0), t, 2)
    survivors = np.bincount(data.records.sum(axis=1), minlength=4)
    expected = stats.binom.pmf(np.arange(4), 3, eta**2) * t
    assert stats.chisquare(survivors, expected).pvalue > 1e-4
    assert np.all(np.abs(survivors - expected) < 4 * np.sqrt(expected))


def test_estimator_rate():
    from bosonsim.probability import subset_probability

    u = haar_random(4, 4)
    inp = InputSpec(3, 4)
    omega = [1, 2, 3]
    p = subset_probability(u, inp, omega, 0.8).value
    rms = []
    for t in (1_000, 10_000, 100_000):
        errs = [estimate_subset_probability(sample_exact(u, inp, NoiseParams(0.8), t, 100 * t + r), omega)[0] - p for r in range(20)]
        rms.append(np.sqrt(np.mean(np.square(errs))))
    for a, b in zip(rms, rms[1:]):
        assert np.sqrt(10) / 2 <= a / b <= np.sqrt(10) * 2


def test_clamp_events_reported():
    u = haar_random(5, 1)
    inp = InputSpec(5, 5)
    for k in (2, 3):
        pol = CutoffPolicy(k, 1.0)
        raw = truncated_probabilities(u, inp, pol)
        data = sample_truncated(u, inp, pol, 10, 1)
        neg = raw < 0
        assert data.metadata["clamp_events"] == int(neg.sum())
        assert data.metadata["clamped_mass"] == pytest.approx(float(-raw[neg].sum()))
        if not neg.any():
            configs, probs, _, _ = truncated_law(u, inp, pol)
            assert np.allclose(probs, raw / raw.sum())
