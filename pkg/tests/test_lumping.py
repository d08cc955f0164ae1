import numpy as np
import pytest

import qrwt
from qrwt import (
    LumpabilityError,
    Partition,
    SchemeTree,
    build_deterministic,
    build_fixed_scheme,
    compound_doubling_stats,
    deterministic_lumped,
    doubling_lumped,
    doubling_state_count,
    doubling_stats,
    doubling_stats_matrix_free,
    lump,
    mean_absorption,
    second_moment,
    validate_chain,
    waiting_pdf,
)
from qrwt import closedforms as cf


def popcount_partition(chain, n):
    groups = [[] for _ in range(n + 1)]
    for idx, label in enumerate(chain.labels):
        groups[label.count("1")].append(idx)
    return Partition(groups)


class TestPartition:
    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            Partition([(0, 1), (1, 2)])

    def test_rejects_empty_group(self):
        with pytest.raises(ValueError):
            Partition([(0,), ()])

    def test_validate_requires_cover(self):
        chain = build_deterministic(2, 0.5)
        with pytest.raises(ValueError):
            Partition([(0,), (1, 2)]).validate_for(chain)

    def test_validate_requires_initial_alone(self):
        chain = build_deterministic(2, 0.5)
        with pytest.raises(ValueError):
            Partition([(0, 1), (2,), (3,)]).validate_for(chain)

    def test_validate_requires_absorbing_singleton_last(self):
        chain = build_deterministic(2, 0.5)
        with pytest.raises(ValueError):
            Partition([(0,), (1, 3), (2,)]).validate_for(chain)


class TestLump:
    def test_singleton_partition_is_identity(self):
        chain = build_fixed_scheme(SchemeTree.complete(1), 0.4, 0.7)
        same = lump(chain, Partition.singletons(chain.n_states))
        np.testing.assert_allclose(same.full_matrix(), chain.full_matrix(), atol=0)
        assert same.labels == chain.labels

    def test_popcount_lump_of_deterministic(self):
        chain = build_deterministic(3, 0.45)
        small = lump(chain, popcount_partition(chain, 3))
        assert small.n_states == 4
        np.testing.assert_allclose(
            small.full_matrix(), deterministic_lumped(3, 0.45).full_matrix(), atol=1e-15
        )

    def test_two_segment_symmetry_lump(self):
        chain = build_fixed_scheme(SchemeTree.complete(1), 0.3, 0.8)
        small = lump(chain, Partition([(0,), (1, 2), (3,)]))
        assert small.n_states == 3
        assert mean_absorption(small)[0] == pytest.approx(
            mean_absorption(chain)[0], rel=1e-13
        )

    def test_preserves_moments_and_pdf(self):
        # deterministic n=5 under the ready-count partition
        chain = build_deterministic(5, 0.4)
        small = lump(chain, popcount_partition(chain, 5))
        k_big = mean_absorption(chain)
        k_small = mean_absorption(small)
        assert k_small[0] == pytest.approx(k_big[0], rel=1e-10)
        k2_big = second_moment(chain, k_big)
        k2_small = second_moment(small, k_small)
        assert k2_small[0] == pytest.approx(k2_big[0], rel=1e-10)
        ks_b, ps_b = waiting_pdf(chain, eps=1e-8)
        ks_s, ps_s = waiting_pdf(small, eps=1e-8)
        m = min(len(ps_b), len(ps_s))
        np.testing.assert_allclose(ps_s[:m], ps_b[:m], atol=1e-12)

    def test_invalid_grouping_reported(self):
        # grouping 001 with 010 in the three-segment fixed scheme: 001 can
        # reach 0(11) but 010 cannot, so the condition fails
        chain = build_fixed_scheme(
            SchemeTree(SchemeTree.leaf(), SchemeTree.complete(1)), 0.3, 0.8
        )
        assert chain.labels[1] == "001" and chain.labels[2] == "010"
        bad = Partition([(0,), (1, 2)] + [(i,) for i in range(3, 8)])
        with pytest.raises(LumpabilityError) as err:
            lump(chain, bad)
        assert "states" in str(err.value)


class TestDeterministicLumped:
    def test_two_segments(self):
        assert mean_absorption(deterministic_lumped(2, 0.5))[0] == pytest.approx(
            8 / 3, rel=1e-13
        )

    def test_last_stage_is_single_segment(self):
        chain = deterministic_lumped(5, 0.3)
        k = mean_absorption(chain)
        assert k[-1] == pytest.approx(1 / 0.3, rel=1e-12)

    def test_matches_full_chain(self):
        for n in (2, 4, 7, 12):
            got = mean_absorption(deterministic_lumped(n, 0.35))[0]
            assert got == pytest.approx(cf.kn_det(0.35, n), rel=1e-10)

    def test_large_repeater_stable(self):
        got = mean_absorption(deterministic_lumped(64, 0.01))[0]
        assert got == pytest.approx(cf.kn_det(0.01, 64), rel=1e-8)

    def test_validates(self):
        assert validate_chain(deterministic_lumped(16, 0.2)) == []


class TestDoublingLumped:
    def test_state_counts(self):
        for d, count in zip(range(1, 5), (3, 6, 21, 231)):
            assert doubling_lumped(d, 0.5, 0.5).n_states == count
        assert [doubling_state_count(d) for d in range(1, 6)] == [3, 6, 21, 231, 26796]

    def test_level_one_matrix(self):
        p, a = 0.4, 0.6
        q = 1 - p
        chain = doubling_lumped(1, p, a)
        expected = np.array(
            [
                [q * q + (1 - a) * p * p, 2 * p * q, a * p * p],
                [(1 - a) * p, q, a * p],
                [0.0, 0.0, 1.0],
            ]
        )
        np.testing.assert_allclose(chain.full_matrix(), expected, atol=1e-16)

    def test_matches_unlumped(self, rng):
        for _ in range(5):
            p, a = rng.uniform(0.1, 0.9, size=2)
            for d in (2, 3):
                big = build_fixed_scheme(SchemeTree.complete(d), p, a)
                small = doubling_lumped(d, p, a)
                assert mean_absorption(small)[0] == pytest.approx(
                    mean_absorption(big)[0], rel=1e-10
                )

    def test_validates(self):
        for d in (1, 2, 3, 4):
            assert validate_chain(doubling_lumped(d, 0.37, 0.62)) == []

    def test_level_range(self):
        with pytest.raises(ValueError):
            doubling_lumped(0, 0.5, 0.5)
        with pytest.raises(ValueError):
            doubling_lumped(6, 0.5, 0.5)


class TestDoublingStats:
    def test_matches_direct_solve(self):
        for d in (1, 2, 3, 4):
            chain = doubling_lumped(d, 0.45, 0.55)
            k = mean_absorption(chain)
            k2 = second_moment(chain, k)
            stats = doubling_stats(d, 0.45, 0.55)
            assert stats.mean == pytest.approx(k[0], rel=1e-12)
            assert stats.variance == pytest.approx(k2[0] - k[0] ** 2, rel=1e-11)

    def test_compound_composition_matches_direct(self):
        for d in (2, 3, 4):
            for (p, a) in [(0.3, 0.5), (0.7, 0.8)]:
                half = doubling_lumped(d - 1, p, a)
                comp = compound_doubling_stats(half, a)
                direct = doubling_stats(d, p, a)
                assert comp.mean == pytest.approx(direct.mean, rel=1e-11)
                assert comp.variance == pytest.approx(direct.variance, rel=1e-9)

    def test_matrix_free_matches_direct(self):
        for d in (2, 3, 4):
            mf = doubling_stats_matrix_free(d, 0.4, 0.6)
            direct = doubling_stats(d, 0.4, 0.6)
            assert mf.mean == pytest.approx(direct.mean, rel=1e-10)
            assert mf.variance == pytest.approx(direct.variance, rel=1e-8)

    def test_level_five_routes_agree(self):
        implicit = doubling_stats(5, 0.5, 0.5)
        krylov = doubling_stats_matrix_free(5, 0.5, 0.5)
        assert implicit.mean == pytest.approx(krylov.mean, rel=1e-9)
        assert implicit.mean > doubling_stats(4, 0.5, 0.5).mean

    def test_deterministic_case(self):
        # a = 1 doubling equals the deterministic-swap mean
        for d in (1, 2, 3):
            assert doubling_stats(d, 0.3, 1.0).mean == pytest.approx(
                cf.kn_det(0.3, 2 ** d), rel=1e-10
            )
