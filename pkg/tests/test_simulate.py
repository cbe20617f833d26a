import math

import numpy as np
import pytest
from scipy.stats import chi2

from bjscc.bounds import (
    JsccInstance,
    WzInstance,
    baseline_scheme,
    disjoint_bound,
    disjoint_scheme,
    hybrid_scheme,
    near_lossless_bsc_instance,
    side_info_bound,
)
from bjscc.probability import (
    DistortionMatrix,
    Kernel,
    Pmf,
    bsc,
    hamming_distortion,
    uniform,
)
from bjscc.simulate import (
    StreamCodebook,
    encoder_pair_counts,
    simulate_conditional_list_matching,
    simulate_list_matching,
    simulate_scheme,
    simulate_side_info_scheme,
    stream_select,
    two_sample_z,
)
from conftest import rand_distortion, rand_kernel, rand_pmf


def chi_square_pvalue(observed, expected):
    mask = expected > 0
    stat = ((observed[mask] - expected[mask]) ** 2 / expected[mask]).sum()
    assert observed[~mask].sum() == 0
    return chi2.sf(stat, df=int(mask.sum()) - 1)


def lossy_test_instance(K=2):
    # 3-symbol lossy source over a positive BSC, every ball non-trivial
    return JsccInstance(
        p_w=Pmf([0.5, 0.3, 0.2]),
        p_x=uniform(2),
        p_z=Pmf([0.4, 0.4, 0.2]),
        ch=bsc(0.1),
        dmat=DistortionMatrix([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]]),
        D=0.5,
        K=K,
    )


class TestSimulateScheme:
    def test_lone_codeword_always_acceptable(self):
        inst = JsccInstance(Pmf([0.6, 0.4]), uniform(2), Pmf([1.0]), bsc(0.2),
                            DistortionMatrix([[0.0], [0.0]]), 0.0, 2)
        res = simulate_scheme(inst, disjoint_scheme(2), trials=2000, seed=0)
        assert res.errors == 0 and res.p_hat == 0.0

    def test_below_bound_each_K(self):
        for K in (1, 2, 4):
            inst = near_lossless_bsc_instance(4, 4, 0.05, K)
            res = simulate_scheme(inst, disjoint_scheme(K), trials=20_000, seed=101 + K)
            assert res.p_hat <= disjoint_bound(inst) + 3 * res.stderr

    def test_trial_counts_consistent(self):
        inst = lossy_test_instance()
        res = simulate_scheme(inst, disjoint_scheme(2), trials=5000, seed=3)
        assert res.trials == 5000
        assert 0 <= res.errors <= res.trials
        # the ensemble errs only when every decoder errs
        assert res.errors <= min(res.per_decoder_errors)
        assert res.stderr == pytest.approx(
            math.sqrt(res.p_hat * (1 - res.p_hat) / res.trials))

    def test_no_observed_ties(self):
        inst = lossy_test_instance()
        res = simulate_scheme(inst, hybrid_scheme(2, 1), trials=20_000, seed=4)
        assert res.ties == 0

    def test_replay_identical(self):
        inst = lossy_test_instance()
        a = simulate_scheme(inst, disjoint_scheme(2), trials=4000, seed=9)
        b = simulate_scheme(inst, disjoint_scheme(2), trials=4000, seed=9)
        assert (a.errors, a.ties, a.p_hat) == (b.errors, b.ties, b.p_hat)
        assert np.array_equal(a.per_decoder_errors, b.per_decoder_errors)

    def test_worker_invariance(self):
        inst = lossy_test_instance()
        a = simulate_scheme(inst, disjoint_scheme(2), trials=12_000, seed=5, workers=1)
        b = simulate_scheme(inst, disjoint_scheme(2), trials=12_000, seed=5, workers=4)
        assert a.errors == b.errors and a.ties == b.ties
        assert np.array_equal(a.per_decoder_errors, b.per_decoder_errors)

    def test_zero_mass_ball_counts_as_error(self):
        # symbol 1's ball only holds a zero-probability reconstruction
        inst = JsccInstance(Pmf([0.5, 0.5]), uniform(2), Pmf([1.0, 0.0]), bsc(0.1),
                            DistortionMatrix([[0.0, 5.0], [5.0, 0.0]]), 1.0, 1)
        res = simulate_scheme(inst, disjoint_scheme(1), trials=4000, seed=6)
        # w=1 occurs about half the time and always errs
        assert res.p_hat > 0.4

    def test_paired_monotonicity_in_K(self):
        # common random numbers: larger K decodes a superset of the cells
        vals = []
        for K in (1, 2, 4):
            inst = near_lossless_bsc_instance(4, 4, 0.1, K)
            res = simulate_scheme(inst, disjoint_scheme(K), trials=30_000, seed=77)
            vals.append(res.p_hat)
        assert vals[0] >= vals[1] >= vals[2]

    def test_trials_validation(self):
        with pytest.raises(ValueError):
            simulate_scheme(lossy_test_instance(), disjoint_scheme(2), trials=0, seed=0)

    def test_scheme_mismatch(self):
        with pytest.raises(ValueError):
            simulate_scheme(lossy_test_instance(2), disjoint_scheme(3), trials=10, seed=0)

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            simulate_scheme(lossy_test_instance(), disjoint_scheme(2), trials=10,
                            seed=0, backend="quantum")


class TestEncoderMarginal:
    def test_matches_restricted_distribution(self):
        # (W, selected reconstruction) should follow P_W times the
        # ball-restricted reconstruction law
        inst = lossy_test_instance()
        trials = 40_000
        counts = encoder_pair_counts(inst, disjoint_scheme(2), trials, seed=12)
        ball = inst.dmat.ball(inst.D)
        cond = np.where(ball, inst.p_z.probs[None, :], 0.0)
        cond /= cond.sum(axis=1, keepdims=True)
        expected = trials * inst.p_w.probs[:, None] * cond
        assert chi_square_pvalue(counts.ravel(), expected.ravel()) > 1e-3

    def test_stream_backend_same_distribution(self):
        inst = lossy_test_instance()
        trials = 40_000
        counts = encoder_pair_counts(inst, disjoint_scheme(2), trials, seed=13,
                                     backend="stream")
        ball = inst.dmat.ball(inst.D)
        cond = np.where(ball, inst.p_z.probs[None, :], 0.0)
        cond /= cond.sum(axis=1, keepdims=True)
        expected = trials * inst.p_w.probs[:, None] * cond
        assert chi_square_pvalue(counts.ravel(), expected.ravel()) > 1e-3


class TestStreamBackend:
    def test_agrees_with_cell_table(self):
        inst = near_lossless_bsc_instance(4, 3, 0.1, 2)
        n = 30_000
        a = simulate_scheme(inst, disjoint_scheme(2), trials=n, seed=21)
        b = simulate_scheme(inst, disjoint_scheme(2), trials=n, seed=22, backend="stream")
        assert abs(two_sample_z(a.p_hat, n, b.p_hat, n)) < 4.0

    def test_refuses_zero_channel_cells(self):
        inst = near_lossless_bsc_instance(2, 1, 0.0, 2)  # noiseless: p(y|x) has zeros
        with pytest.raises(ValueError, match="stream backend requires"):
            simulate_scheme(inst, disjoint_scheme(2), trials=10, seed=0, backend="stream")


class TestListMatching:
    def test_same_scoring_never_mismatches(self):
        p = Pmf([0.4, 0.35, 0.25])
        res = simulate_list_matching(p, p, K=1, trials=5000, seed=1)
        assert res.mismatches.sum() == 0

    def test_point_mass_decoder(self):
        p = Pmf([0.5, 0.3, 0.2])
        q = Pmf([1.0, 0.0, 0.0])
        res = simulate_list_matching(p, q, K=2, trials=8000, seed=2)
        rate = res.mismatch_rate()
        assert rate[0] == 0.0
        assert rate[1] == 1.0 and rate[2] == 1.0
        assert res.bound[1] == 1.0 and res.bound[2] == 1.0
        assert 0.0 < res.bound[0] < 1.0

    def test_respects_bound_per_symbol(self):
        rng = np.random.default_rng(3)
        p, q = rand_pmf(rng, 4), rand_pmf(rng, 4)
        res = simulate_list_matching(p, q, K=3, trials=50_000, seed=4)
        rate, se = res.mismatch_rate(), res.stderr()
        for u in range(4):
            if res.selected[u]:
                assert rate[u] <= res.bound[u] + 3 * se[u] + 1e-12

    def test_selection_marginal(self):
        from scipy.stats import chi2
        p = Pmf([0.5, 0.2, 0.2, 0.1])
        q = uniform(4)
        res = simulate_list_matching(p, q, K=2, trials=40_000, seed=5)
        expected = res.trials * p.probs
        stat = ((res.selected - expected) ** 2 / expected).sum()
        assert chi2.sf(stat, df=3) > 1e-3


class TestConditionalListMatching:
    @staticmethod
    def _random_system(rng, nx=3, nu=3, ny=3):
        obs = np.stack([np.stack([rng.dirichlet(np.ones(ny)) for _ in range(nu)])
                        for _ in range(nx)])
        return (rand_pmf(rng, nx), rand_kernel(rng, nx, nu), obs,
                rand_kernel(rng, ny, nu))

    def test_identical_scoring_no_mismatch(self):
        # degenerate observation reveals the selected symbol; decoder scores
        # with the encoder's own conditional
        p_x = Pmf([1.0])
        p_ugx = Kernel([[0.5, 0.3, 0.2]])
        obs = np.eye(3)[None, :, :]  # y = u
        q_ugy = Kernel(np.eye(3) * 0.994 + 0.002)
        res = simulate_conditional_list_matching(p_x, p_ugx, obs, q_ugy, J=1, L=1,
                                                 trials=3000, seed=6)
        assert res.mismatch_count == 0

    def test_single_group_respects_bound(self):
        rng = np.random.default_rng(7)
        sysa = self._random_system(rng)
        res = simulate_conditional_list_matching(*sysa, J=1, L=3, trials=50_000, seed=8)
        assert res.mismatch_rate <= res.bound_mean + 3 * res.paired_stderr()

    def test_grouped_respects_bound(self):
        rng = np.random.default_rng(9)
        sysa = self._random_system(rng)
        res = simulate_conditional_list_matching(*sysa, J=2, L=2, trials=50_000, seed=10)
        assert res.mismatch_rate <= res.bound_mean + 3 * res.paired_stderr()

    def test_shape_validation(self):
        rng = np.random.default_rng(11)
        p_x, p_ugx, obs, q_ugy = self._random_system(rng)
        from bjscc.probability import DimensionMismatchError
        with pytest.raises(DimensionMismatchError):
            simulate_conditional_list_matching(p_x, p_ugx, obs[:, :2], q_ugy, 1, 1,
                                               trials=10, seed=0)


class TestSideInfoScheme:
    def test_matches_bound(self):
        rng = np.random.default_rng(12)
        inst = WzInstance(rand_pmf(rng, 3), rand_kernel(rng, 3, 3),
                          rand_kernel(rng, 3, 3), rng.integers(0, 3, (3, 3)),
                          rand_pmf(rng, 3), rand_kernel(rng, 3, 3),
                          rand_distortion(rng, 3, 3), 0.7, 2)
        res = simulate_side_info_scheme(inst, trials=40_000, seed=13)
        assert res.p_hat <= side_info_bound(inst) + 3 * res.stderr

    def test_max_distortion_never_errs(self):
        rng = np.random.default_rng(14)
        inst = WzInstance(rand_pmf(rng, 3), rand_kernel(rng, 3, 2),
                          rand_kernel(rng, 3, 2), rng.integers(0, 3, (2, 2)),
                          rand_pmf(rng, 2), rand_kernel(rng, 2, 2),
                          rand_distortion(rng, 3, 3), 1.0 + 1e-9, 2)
        res = simulate_side_info_scheme(inst, trials=3000, seed=15)
        assert res.errors == 0

    def test_reduces_to_near_lossless_scheme(self):
        # U = W, constant side information, identity reconstruction
        M, n, K = 4, 3, 2
        base = near_lossless_bsc_instance(M, n, 0.1, K)
        wz = WzInstance(base.p_w, Kernel(np.eye(M)), Kernel(np.ones((M, 1))),
                        np.arange(M)[:, None], base.p_x, base.ch,
                        hamming_distortion(M), 0.0, K)
        trials = 40_000
        a = simulate_side_info_scheme(wz, trials=trials, seed=16)
        b = simulate_scheme(base, disjoint_scheme(K), trials=trials, seed=17)
        assert abs(two_sample_z(a.p_hat, trials, b.p_hat, trials)) < 3.0


class TestStreamSelect:
    def test_single_admissible_cell_takes_first_arrival(self):
        cb = StreamCodebook([0.25, 0.25, 0.5], J=1, seed=3, trial=0)
        r = np.array([np.inf, 1.0, np.inf])
        sel = stream_select(cb, r)
        # the selected point is the first whose cell is the admissible one
        i = 0
        while cb.point(i)[1] != 1:
            i += 1
        assert sel.index == i and sel.cell == 1

    def test_unit_weights_select_first_point(self):
        cb = StreamCodebook([0.2, 0.3, 0.5], J=1, seed=4, trial=1)
        sel = stream_select(cb, np.ones(3))
        assert sel.index == 0

    def test_label_filter(self):
        cb = StreamCodebook([0.5, 0.5], J=3, seed=5, trial=0)
        sel = stream_select(cb, np.ones(2), label=2)
        assert sel.label == 2
        i = 0
        while cb.point(i)[2] != 2:
            i += 1
        assert sel.index == i

    def test_selection_distribution_matches_exponential_race(self):
        # argmin of r_c * Exp(intensity_c) picks c w.p. (intensity_c / r_c) / Z
        from scipy.stats import chi2
        intensity = np.array([0.1, 0.3, 0.15, 0.2, 0.05, 0.2])
        r = np.array([2.0, 0.7, 1.3, 1.0, 3.0, 0.5])
        trials = 20_000
        counts = np.zeros(6)
        for t in range(trials):
            cb = StreamCodebook(intensity, J=1, seed=6, trial=t)
            counts[stream_select(cb, r).cell] += 1
        rates = intensity / r
        expected = trials * rates / rates.sum()
        stat = ((counts - expected) ** 2 / expected).sum()
        assert chi2.sf(stat, df=5) > 1e-3

    def test_rejects_degenerate_weights(self):
        cb = StreamCodebook([0.5, 0.5], J=1, seed=7, trial=0)
        with pytest.raises(ValueError):
            stream_select(cb, np.array([np.inf, np.inf]))
        with pytest.raises(ValueError):
            stream_select(cb, np.array([0.0, 1.0]))
