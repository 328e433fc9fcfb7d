import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from otfsmu.channel import draw_channel, effective_channel_sparse
from otfsmu.detection import (
    Constellation,
    DetectionError,
    DetectionProblem,
    assemble_detection_problem,
    lmmse_detect,
    slice_and_ber,
)
from otfsmu.frame import Allocation, GridDims, build_embedded_layout, build_impulse_layout

from conftest import crandn


def embedded_system(seed, dims, U, l_max=2, k_max=2, L=3, allocation=Allocation.PARTITIONED):
    rng = np.random.default_rng(seed)
    layout = build_embedded_layout(dims, U, l_max, k_max, allocation=allocation)
    ch = draw_channel(rng, U, L, l_max + 1, k_max + 1)  # guards cover delays 0..l_max
    H = [effective_channel_sparse(t, dims, layout.data_indices(u)) for u, t in enumerate(ch.per_user)]
    return rng, layout, ch, H


class TestConstellation:
    @pytest.mark.parametrize("kind", ["bpsk", "qpsk"])
    def test_unit_energy(self, kind):
        c = Constellation.from_kind(kind)
        assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1)

    def test_qpsk_gray_adjacency(self):
        c = Constellation.from_kind("qpsk")
        for i in range(4):
            for j in range(4):
                d = abs(c.points[i] - c.points[j])
                if np.isclose(d, np.sqrt(2)):  # nearest neighbours
                    assert bin(i ^ j).count("1") == 1

    @pytest.mark.parametrize("kind", ["bpsk", "qpsk"])
    def test_modulate_demodulate(self, kind, rng):
        c = Constellation.from_kind(kind)
        bits = rng.integers(0, 2, 64)
        np.testing.assert_array_equal(c.demodulate(c.modulate(bits)), bits)

    def test_unknown(self):
        with pytest.raises(ValueError):
            Constellation.from_kind("16qam")


class TestSliceAndBer:
    def test_exact_symbols(self, rng):
        c = Constellation.from_kind("qpsk")
        bits = [rng.integers(0, 2, 20), rng.integers(0, 2, 10)]
        assert slice_and_ber([c.modulate(b) for b in bits], bits, c).ber == 0

    def test_negated_bpsk(self, rng):
        c = Constellation.from_kind("bpsk")
        bits = rng.integers(0, 2, 50)
        assert slice_and_ber([-c.modulate(bits)], [bits], c).ber == 1

    def test_one_gray_boundary(self):
        c = Constellation.from_kind("qpsk")
        bits = np.array([0, 0])
        soft = c.modulate(bits) * np.exp(1j * np.pi / 2)  # rotate into a neighbour
        report = slice_and_ber([soft], [bits], c)
        assert report.total_errors == 1 and report.total_bits == 2

    def test_length_mismatch(self):
        c = Constellation.from_kind("qpsk")
        with pytest.raises(ValueError):
            slice_and_ber([np.ones(3)], [np.zeros(4)], c)
        with pytest.raises(ValueError):
            slice_and_ber([np.ones(3)], [np.zeros(6), np.zeros(6)], c)


class TestAssemble:
    def test_single_user_zero_spread_keeps_everything(self, rng):
        dims = GridDims(8, 8)
        layout = build_embedded_layout(dims, 1, 0, 0)
        H = effective_channel_sparse(draw_channel(rng, 1, 1, 1, 1).per_user[0], dims)
        prob = assemble_detection_problem(np.zeros(64), [H], layout, 10.0)
        assert prob.H_cols.shape == (64, 63)

    def test_four_users_column_count(self):
        dims = GridDims(32, 32)
        _, layout, _, H = embedded_system(0, dims, 4, 1, 1, 2)
        prob = assemble_detection_problem(np.zeros(1024), H, layout, 10.0)
        assert prob.H_cols.shape[1] == 1024 - 25 == 999

    def test_col_map_bijection(self):
        dims = GridDims(16, 16)
        _, layout, _, H = embedded_system(1, dims, 3)
        prob = assemble_detection_problem(np.zeros(256), H, layout, 10.0)
        seen = {(int(u), int(m), int(n)) for u, m, n in prob.col_map}
        expected = {(u, m, n) for u, cells in enumerate(layout.data_cells) for m, n in cells}
        assert seen == expected and len(prob.col_map) == len(expected)

    def test_full_matrices_accepted(self):
        dims = GridDims(16, 16)
        rng, layout, ch, H = embedded_system(2, dims, 2)
        full = [effective_channel_sparse(t, dims) for t in ch.per_user]
        a = assemble_detection_problem(np.zeros(256), full, layout, 1.0).H_cols
        b = assemble_detection_problem(np.zeros(256), H, layout, 1.0).H_cols
        assert abs(a - b).max() == 0

    def test_missing_estimate(self):
        dims = GridDims(16, 16)
        _, layout, _, H = embedded_system(3, dims, 2)
        with pytest.raises(ValueError):
            assemble_detection_problem(np.zeros(256), [H[0], None], layout, 1.0)
        with pytest.raises(ValueError):
            assemble_detection_problem(np.zeros(256), H[:1], layout, 1.0)

    def test_needs_embedded_layout(self):
        layout = build_impulse_layout(GridDims(8, 8), 1, 1, 1)
        with pytest.raises(ValueError):
            assemble_detection_problem(np.zeros(64), [np.eye(64)], layout, 1.0)


class TestLmmse:
    def test_identity_shrinkage(self, rng):
        y = crandn(rng, 6)
        prob = DetectionProblem(y, np.eye(6), np.zeros((6, 3)), 1.0, [np.arange(6)])
        np.testing.assert_allclose(lmmse_detect(prob)[0], y / 2, atol=1e-14)

    def test_matches_normal_equations(self):
        dims = GridDims(8, 8)
        rng, layout, _, H = embedded_system(4, dims, 2, 1, 1, 2)
        y = crandn(rng, 64)
        prob = assemble_detection_problem(y, H, layout, 3.7)
        x = np.concatenate(lmmse_detect(prob))
        A = prob.H_cols.toarray()
        ref = np.linalg.solve(A.conj().T @ A + np.eye(A.shape[1]) / 3.7, A.conj().T @ y)
        np.testing.assert_allclose(x, ref, atol=1e-8)

    def test_dense_and_sparse_paths_agree(self):
        dims = GridDims(8, 8)
        rng, layout, _, H = embedded_system(5, dims, 2, 1, 1, 2)
        y = crandn(rng, 64)
        a = lmmse_detect(assemble_detection_problem(y, H, layout, 5.0))
        b = lmmse_detect(assemble_detection_problem(y, [h.toarray() for h in H], layout, 5.0))
        for u, v in zip(a, b):
            np.testing.assert_allclose(u, v, atol=1e-10)

    @settings(max_examples=200)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_ls_limit(self, seed, U):
        dims = GridDims(16, 16)
        rng, layout, _, H = embedded_system(seed, dims, U, 1, 1, 2)
        y = crandn(rng, 256)
        prob = assemble_detection_problem(y, H, layout, 1e12)
        A = prob.H_cols.toarray()
        # full column rank with margin: the regularizer's bias is ~ (1/snr) / s_min^2
        assume(np.linalg.svd(A, compute_uv=False)[-1] > 1e-2)
        x = np.concatenate(lmmse_detect(prob))
        ls = np.linalg.lstsq(A, y, rcond=None)[0]
        assert np.linalg.norm(x - ls) <= 1e-6 * np.linalg.norm(ls)

    @pytest.mark.parametrize("U", [1, 2, 3, 4])
    def test_perfect_csi_noise_free_zero_ber(self, U):
        dims = GridDims(16, 16)
        rng, layout, ch, H = embedded_system(10 + U, dims, U)
        c = Constellation.from_kind("qpsk")
        bits, y = [], np.zeros(256, complex)
        for u in range(U):
            b = rng.integers(0, 2, 2 * layout.data_indices(u).size)
            bits.append(b)
            y += H[u] @ c.modulate(b)
        soft = lmmse_detect(assemble_detection_problem(y, H, layout, 1e12))
        assert slice_and_ber(soft, bits, c).ber == 0

    def test_shared_allocation_is_solvable(self):
        dims = GridDims(16, 16)
        rng, layout, _, H = embedded_system(6, dims, 2, allocation=Allocation.SHARED)
        soft = lmmse_detect(assemble_detection_problem(crandn(rng, 256), H, layout, 10.0))
        assert all(np.all(np.isfinite(s)) for s in soft)

    def test_rejects_bad_snr(self):
        prob = DetectionProblem(np.ones(2), np.eye(2), np.zeros((2, 3)), 0.0, [np.arange(2)])
        with pytest.raises(ValueError):
            lmmse_detect(prob)

    def test_singular_gram_reported(self):
        H = sp.csc_matrix(np.zeros((4, 2), complex))
        prob = DetectionProblem(np.ones(4), H, np.zeros((2, 3)), np.inf, [np.arange(2)])
        with pytest.raises(DetectionError):
            lmmse_detect(prob)
