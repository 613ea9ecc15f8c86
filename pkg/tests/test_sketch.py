import numpy as np
import pytest
import scipy.linalg as sla

from rilqr.errors import DimensionError, NonFiniteError
from rilqr.hankel import UpdateColumnBuilder, assemble_stack
from rilqr.linalg import qr_decompose
from rilqr.plant import actual_plant, generate_similar_record, similar_plant
from rilqr.sketch import SketchConfig, compress_initial, draw_sketch, streaming_update
from rilqr.streams import as_generator
from rilqr.subspace import extract_rblocks, oblique_projection


def row_sign_rel(r1, r2):
    s = r1.shape[1]
    sg = np.sign(np.diag(r1[:s])) * np.sign(np.diag(r2[:s]))
    sg[sg == 0] = 1.0
    return np.linalg.norm(sg[:, None] * r1[:s] - r2[:s]) / np.linalg.norm(r2[:s])


class TestDrawSketch:
    def test_moments(self):
        nc = 40
        c = draw_sketch(25_000, nc, 3)  # 10^6 entries
        assert abs(c.mean()) < 3e-3 / np.sqrt(nc)
        assert c.var() == pytest.approx(1 / nc, rel=0.01)

    def test_determinism(self):
        np.testing.assert_array_equal(draw_sketch(50, 7, 11), draw_sketch(50, 7, 11))
        assert not np.array_equal(draw_sketch(50, 7, 11), draw_sketch(50, 7, 12))

    def test_isotropy(self):
        # the diagonal of C C^T averages to one
        diag = np.mean([np.sum(draw_sketch(30, 40, s) ** 2, axis=1).mean() for s in range(100)])
        assert diag == pytest.approx(1.0, rel=0.02)

    def test_rejects_empty(self):
        with pytest.raises(DimensionError):
            draw_sketch(0, 3)


class TestSketchConfig:
    def test_width(self):
        assert SketchConfig(oversampling=10).width(30) == 40

    def test_invalid(self):
        with pytest.raises(ValueError):
            SketchConfig(gamma=0.0)
        with pytest.raises(ValueError):
            SketchConfig(oversampling=0)


@pytest.fixture
def small_stack(rng):
    rec, _ = generate_similar_record(actual_plant(1e-2), 300, 1.0, rng)
    return rec, assemble_stack(rec, 5)


class TestCompressInitial:
    def test_structured_sketch_scales_columns(self, small_stack):
        _, stk = small_stack
        nc = stk.s + 10
        sketch = np.zeros((stk.N, nc))
        sketch[np.arange(nc), np.arange(nc)] = 1 / np.sqrt(nc)
        cs = compress_initial(stk, SketchConfig(), sketch=sketch)
        np.testing.assert_allclose(cs.matrix, stk.matrix[:, :nc] / np.sqrt(nc), atol=1e-12)

    def test_shape_default_configuration(self):
        rec, _ = generate_similar_record(similar_plant(0.01), 100_000, 1.0, np.random.default_rng(0))
        cs = compress_initial(assemble_stack(rec, 5), SketchConfig(10, seed=1))
        assert cs.matrix.shape == (30, 40)
        assert cs.factorization.q.shape == (40, 40)

    def test_matches_dense_product(self, small_stack):
        _, stk = small_stack
        cs = compress_initial(stk, SketchConfig(seed=5))
        c = draw_sketch(stk.N, 40, SketchConfig(seed=5).seed)
        np.testing.assert_allclose(cs.matrix, stk.matrix @ c, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(cs.wp_bar, (stk.wp @ c), rtol=1e-10, atol=1e-10)

    def test_bad_sketch_shape(self, small_stack):
        _, stk = small_stack
        with pytest.raises(DimensionError):
            compress_initial(stk, sketch=np.ones((stk.N + 1, 40)))


class TestStreamingUpdate:
    def test_gamma_zero_leaves_factorization(self, small_stack):
        rec, stk = small_stack
        cs = compress_initial(stk, SketchConfig(seed=1))
        h = UpdateColumnBuilder.from_record(rec, 5).next_column([0.3], [0.1, -0.2])
        out = streaming_update(cs, h, 0.0)
        assert np.array_equal(out.factorization.r, cs.factorization.r)
        assert out.step == cs.step + 1

    def test_one_update_matches_requr(self, small_stack):
        rec, stk = small_stack
        cs = compress_initial(stk, SketchConfig(seed=1))
        dense = cs.matrix.copy()
        h = UpdateColumnBuilder.from_record(rec, 5).next_column([0.3], [0.1, -0.2])
        c = np.random.default_rng(9).standard_normal(40) / np.sqrt(40)
        out = streaming_update(cs, h, 1.0, c=c)
        oracle = qr_decompose((dense + np.outer(h, c)).T)
        assert row_sign_rel(out.factorization.r, oracle.r) < 1e-9

    def test_200_updates_track_dense_product(self, small_stack, rng):
        rec, stk = small_stack
        cs = compress_initial(stk, SketchConfig(seed=1, gamma=0.7), online_rng=77)
        gen = as_generator(77)
        builder = UpdateColumnBuilder.from_record(rec, 5)
        hs, cols = [], []
        for _ in range(200):
            h = builder.next_column(rng.standard_normal(1), rng.standard_normal(2))
            hs.append(h)
            cols.append(gen.standard_normal(40) / np.sqrt(40))
            cs = streaming_update(cs, h, 0.7)
        # dense oracle: [H, h_0..h_t] @ [C; gamma c_0^T; ...]
        h_all = np.hstack([stk.matrix, np.array(hs).T])
        c_all = np.vstack([draw_sketch(stk.N, 40, 1), 0.7 * np.array(cols)])
        dense = h_all @ c_all
        assert np.linalg.norm(cs.matrix - dense) / np.linalg.norm(dense) < 1e-8
        assert cs.nc == 40 and cs.step == 199

    def test_rejects_bad_column(self, small_stack):
        _, stk = small_stack
        cs = compress_initial(stk)
        with pytest.raises(DimensionError):
            streaming_update(cs, np.ones(29))
        h = np.ones(30)
        h[3] = np.nan
        with pytest.raises(NonFiniteError):
            streaming_update(cs, h)

    def test_copy_is_independent(self, small_stack):
        _, stk = small_stack
        cs = compress_initial(stk)
        cp = cs.copy()
        a = streaming_update(cs, np.ones(30))
        b = streaming_update(cp, np.ones(30))
        np.testing.assert_array_equal(a.factorization.r, b.factorization.r)


def _top_subspace(mat, n):
    u, _, _ = np.linalg.svd(mat, full_matrices=False)
    return u[:, :n]


@pytest.mark.parametrize("seed", range(5))
def test_range_preservation_noiseless(seed):
    rec, _ = generate_similar_record(actual_plant(0.0), 509, 1.0, np.random.default_rng(100 + seed))
    stk = assemble_stack(rec, 5)  # N = 500
    full = qr_decompose(stk.matrix.T)
    zeta, _ = oblique_projection(extract_rblocks(full, 5, 1, 2), stk.wp)
    cs = compress_initial(stk, SketchConfig(10, seed=seed))
    zbar, _ = oblique_projection(extract_rblocks(cs.factorization, 5, 1, 2), cs.wp_bar)
    sv = np.linalg.svd(zbar, compute_uv=False)
    assert sv[2] / sv[0] < 1e-8
    angles = sla.subspace_angles(_top_subspace(zeta, 2), _top_subspace(zbar, 2))
    assert angles.max() < 1e-6
