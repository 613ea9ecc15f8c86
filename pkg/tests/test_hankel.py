import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rilqr.errors import DimensionError, NonFiniteError, RilqrError
from rilqr.hankel import (SignalRecord, UpdateColumnBuilder, assemble_stack, build_hankel,
                          stack_width)
from rilqr.plant import ACTUAL_A, ACTUAL_B
from rilqr.subspace import batch_predictors


class TestBuildHankel:
    def test_scalar_examples(self):
        x = [1, 2, 3, 4, 5]
        np.testing.assert_array_equal(build_hankel(x, 0, 2, 3), [[1, 2, 3], [2, 3, 4]])
        np.testing.assert_array_equal(build_hankel(x, 2, 2, 2), [[3, 4], [4, 5]])

    def test_out_of_range_reports_bound(self):
        with pytest.raises(DimensionError, match="sample 5"):
            build_hankel([1, 2, 3, 4, 5], 2, 3, 2)

    def test_vector_blocks(self):
        x = np.arange(12.0).reshape(6, 2)
        h = build_hankel(x, 1, 2, 3)
        np.testing.assert_array_equal(h[:, 0], np.concatenate([x[1], x[2]]))
        np.testing.assert_array_equal(h[2:4, 2], x[4])

    @settings(max_examples=50, deadline=None)
    @given(nt=st.integers(3, 40), d=st.integers(1, 3), data=st.data())
    def test_random_probe(self, nt, d, data):
        x = np.arange(nt * d, dtype=float).reshape(nt, d)
        start = data.draw(st.integers(0, nt - 2))
        depth = data.draw(st.integers(1, nt - start))
        width = nt - start - depth + 1
        h = build_hankel(x, start, depth, width)
        j = data.draw(st.integers(0, depth - 1))
        c = data.draw(st.integers(0, width - 1))
        np.testing.assert_array_equal(h[j * d:(j + 1) * d, c], x[start + j + c])


class TestAssembleStack:
    def test_dimensions(self):
        rec = SignalRecord(np.zeros((11, 1)), np.zeros((11, 2)))
        st_ = assemble_stack(rec, 3)
        assert st_.N == 6 and st_.s == 2 * 3 * 3
        assert st_.matrix.shape == (18, 6)

    def test_full_record_width(self):
        assert stack_width(100_000, 5) == 99_991

    def test_too_short(self):
        rec = SignalRecord(np.zeros((6, 1)), np.zeros((6, 2)))
        with pytest.raises(DimensionError):
            assemble_stack(rec, 3)

    def test_block_order_and_shift(self, rng):
        rec = SignalRecord(rng.standard_normal((20, 1)), rng.standard_normal((20, 2)))
        k = 3
        stk = assemble_stack(rec, k)
        c = 4
        np.testing.assert_array_equal(stk.uf[:, c], rec.inputs[k + c:2 * k + c].ravel())
        np.testing.assert_array_equal(stk.up[:, c], rec.inputs[c:k + c].ravel())
        np.testing.assert_array_equal(stk.yp[:, c], rec.outputs[c:k + c].ravel())
        np.testing.assert_array_equal(stk.yf[:, c], rec.outputs[k + c:2 * k + c].ravel())
        np.testing.assert_array_equal(stk.matrix[:, c], stk.column(c))
        # the last column ends on the final sample
        assert stk.yf[-2:, -1].tolist() == rec.outputs[-1].tolist()

    def test_noiseless_predictor_identity(self, clean_record):
        # every future-output column is S^x x + [S^u 0] u for the true model
        k = 5
        stk = assemble_stack(clean_record, k)
        sx, su = batch_predictors(ACTUAL_A, ACTUAL_B, k - 1)
        x = clean_record.outputs[k:k + stk.N].T
        pred = sx @ x + su @ stk.uf[:(k - 1)]
        assert np.abs(pred - stk.yf).max() < 1e-10


class TestRecordCsv:
    def test_roundtrip(self, tmp_path, rng):
        rec = SignalRecord(rng.standard_normal((7, 2)), rng.standard_normal((7, 3)))
        path = tmp_path / "r.csv"
        rec.to_csv(path)
        assert path.read_text().splitlines()[0] == "u1,u2,y1,y2,y3"
        back = SignalRecord.from_csv(path)
        np.testing.assert_array_equal(back.inputs, rec.inputs)
        np.testing.assert_array_equal(back.outputs, rec.outputs)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("y1,u1\n1,2\n")
        with pytest.raises(RilqrError):
            SignalRecord.from_csv(path)

    def test_invariants(self):
        with pytest.raises(DimensionError):
            SignalRecord(np.zeros(4), np.zeros((5, 2)))
        with pytest.raises(NonFiniteError):
            SignalRecord([0.0, np.inf], [[0.0, 0], [0, 0]])


class TestUpdateColumnBuilder:
    @pytest.fixture
    def rec(self, rng):
        return SignalRecord(rng.standard_normal((30, 1)), rng.standard_normal((30, 2)))

    def test_initial_column_is_last_stack_column(self, rec):
        b = UpdateColumnBuilder.from_record(rec, 4)
        np.testing.assert_array_equal(b.column, assemble_stack(rec, 4).column(-1))

    def test_first_online_sample_lands_at_bottom_of_uf(self, rec):
        k = 4
        b = UpdateColumnBuilder.from_record(rec, k)
        h = b.next_column([99.0], [7.0, 8.0])
        uf, up = h[:k], h[k:2 * k]
        assert uf[-1] == 99.0
        np.testing.assert_array_equal(uf[:-1], rec.inputs[-(k - 1):].ravel())
        np.testing.assert_array_equal(up, rec.inputs[-(2 * k - 1):-(k - 1)].ravel())
        assert h[-2:].tolist() == [7.0, 8.0]
        assert b.online_count == 1

    def test_after_k_calls_uf_is_online(self, rec, rng):
        k = 3
        b = UpdateColumnBuilder.from_record(rec, k)
        online = rng.standard_normal((k, 1))
        for u in online:
            h = b.next_column(u, [0.0, 0.0])
        np.testing.assert_array_equal(h[:k], online.ravel())

    def test_matches_stack_of_concatenated_stream(self, rec, rng):
        k = 3
        new_u, new_y = rng.standard_normal((6, 1)), rng.standard_normal((6, 2))
        b = UpdateColumnBuilder.from_record(rec, k)
        cols = [b.next_column(u, y) for u, y in zip(new_u, new_y)]
        joined = SignalRecord(np.vstack([rec.inputs, new_u]), np.vstack([rec.outputs, new_y]))
        stk = assemble_stack(joined, k)
        for i, c in enumerate(cols):
            np.testing.assert_array_equal(c, stk.column(stk.N - 6 + i))

    def test_shift_property(self, rec, rng):
        k, m, n = 3, 1, 2
        b = UpdateColumnBuilder.from_record(rec, k)
        h0 = b.next_column([1.0], [2.0, 3.0])
        h1 = b.next_column([4.0], [5.0, 6.0])
        # within each block, h1 is h0 shifted by one sample
        np.testing.assert_array_equal(h1[:(k - 1) * m], h0[m:k * m])
        yf0, yf1 = h0[-k * n:], h1[-k * n:]
        np.testing.assert_array_equal(yf1[:-n], yf0[n:])

    def test_uninitialized(self):
        b = UpdateColumnBuilder(3, 1, 2)
        with pytest.raises(RilqrError):
            b.next_column([0.0], [0.0, 0.0])

    def test_nonfinite_sample(self, rec):
        b = UpdateColumnBuilder.from_record(rec, 3)
        with pytest.raises(NonFiniteError):
            b.next_column([np.nan], [0.0, 0.0])
