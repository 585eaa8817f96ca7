from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sketchreg import DesignMatrix, Spectrum, center, load_csv, pc_rotate, save_csv, synthetic_design
from sketchreg.design import as_spectrum, design_from_spectrum
from sketchreg.errors import EmptyInput, InvalidParameter, ParseError


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_three_by_three(self, tmp_path):
        x, y = load_csv(write(tmp_path, "1,2,5\n2,0,1\n0,1,2\n"))
        np.testing.assert_array_equal(x.values, [[1, 2], [2, 0], [0, 1]])
        np.testing.assert_array_equal(y, [5, 1, 2])
        assert (x.n, x.p) == (3, 2)
        np.testing.assert_array_equal(x.column_means, 0)

    def test_header_ignored(self, tmp_path):
        x, y = load_csv(write(tmp_path, "a,b,resp\n1,2,5\n2,0,1\n0,1,2\n"), has_header=True)
        np.testing.assert_array_equal(y, [5, 1, 2])
        assert x.values.shape == (3, 2)

    def test_non_numeric_cell(self, tmp_path):
        with pytest.raises(ParseError) as info:
            load_csv(write(tmp_path, "1,2,5\n2,abc,1\n"))
        assert (info.value.row, info.value.col) == (2, 2)

    def test_ragged_rows(self, tmp_path):
        with pytest.raises(ParseError) as info:
            load_csv(write(tmp_path, "1,2,5\n2,1\n"))
        assert info.value.row == 2

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyInput):
            load_csv(write(tmp_path, ""))

    def test_single_column_rejected(self, tmp_path):
        with pytest.raises(ParseError):
            load_csv(write(tmp_path, "1\n2\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "absent.csv")

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 4)),
                  elements=st.floats(-1e300, 1e300, allow_nan=False)))
    def test_roundtrip_17_digits(self, tmp_path_factory, table):
        path = tmp_path_factory.mktemp("rt") / "rt.csv"
        save_csv(path, table[:, :-1], table[:, -1])
        x, y = load_csv(path)
        np.testing.assert_array_equal(x.values, table[:, :-1])
        np.testing.assert_array_equal(y, table[:, -1])


class TestTypes:
    def test_design_rejects_nonfinite(self):
        with pytest.raises(InvalidParameter):
            DesignMatrix([[1.0, np.nan]])

    def test_design_is_read_only(self):
        x = DesignMatrix([[1.0, 2.0]])
        with pytest.raises(ValueError):
            x.values[0, 0] = 3.0

    def test_spectrum_alphas_sum_to_one(self, rng):
        lam = np.sort(rng.exponential(size=25))[::-1]
        sp = Spectrum(lam)
        assert abs(sp.alphas.sum() - 1) < 1e-12
        assert sp.trace_sigma == pytest.approx(lam.sum())

    def test_spectrum_must_be_sorted(self):
        with pytest.raises(InvalidParameter):
            Spectrum([1.0, 2.0])

    def test_spectrum_rank_threshold(self):
        assert Spectrum([1.0, 1e-6, 1e-13, 0.0]).rank == 2

    def test_center_records_means(self):
        x = center([[1.0, 10.0], [3.0, 14.0]])
        np.testing.assert_allclose(x.values.mean(axis=0), 0)
        np.testing.assert_allclose(x.column_means, [2.0, 12.0])


class TestPcRotate:
    def test_already_diagonal(self):
        x = np.zeros((4, 3))
        x[0, 0], x[1, 1], x[2, 2] = 1.0, 3.0, 2.0
        xr, sp = pc_rotate(x)
        np.testing.assert_allclose(sp.eigenvalues, [9.0, 4.0, 1.0])
        perm = np.abs(xr.rotation)
        np.testing.assert_allclose(np.sort(perm, axis=0)[-1], 1.0)
        np.testing.assert_allclose(perm.sum(axis=0), 1.0)

    def test_two_by_two_hand_computed(self):
        xr, sp = pc_rotate([[1.0, 1.0], [1.0, -1.0]])
        np.testing.assert_allclose(sp.eigenvalues, [2.0, 2.0])
        assert sp.trace_sigma == pytest.approx(4.0)
        np.testing.assert_allclose(xr.gram, 2 * np.eye(2), atol=1e-12)

    def test_random_design_diagonalized(self, rng):
        x = rng.standard_normal((20, 5))
        xr, sp = pc_rotate(x)
        g = xr.values.T @ xr.values  # direct multiplication oracle
        off = g - np.diag(np.diag(g))
        assert np.linalg.norm(off) < 1e-8 * np.trace(g)
        np.testing.assert_allclose(np.diag(g), sp.eigenvalues, rtol=1e-10)
        assert np.all(np.diff(sp.eigenvalues) <= 0)

    def test_predictions_basis_invariant(self, rng):
        x = rng.standard_normal((20, 5))
        beta = rng.standard_normal(5)
        xr, _ = pc_rotate(x)
        np.testing.assert_allclose(xr.values @ (xr.rotation.T @ beta), x @ beta, atol=1e-10)

    def test_row_inner_products_preserved(self, rng):
        x = rng.standard_normal((8, 5))
        xr, _ = pc_rotate(x)
        ref = x @ x.T
        np.testing.assert_allclose(xr.values @ xr.values.T, ref, atol=1e-8 * np.abs(ref).max())

    def test_sign_convention(self, rng):
        xr, _ = pc_rotate(rng.standard_normal((10, 4)))
        v = xr.rotation
        pivot = np.argmax(np.abs(v), axis=0)
        assert np.all(v[pivot, np.arange(4)] > 0)

    def test_wide_design_has_zero_eigenvalues(self, rng):
        _, sp = pc_rotate(rng.standard_normal((3, 6)))
        assert sp.rank == 3
        np.testing.assert_array_equal(sp.eigenvalues[3:], 0.0)

    def test_deterministic(self, rng):
        x = rng.standard_normal((10, 4))
        a, _ = pc_rotate(x)
        b, _ = pc_rotate(x)
        np.testing.assert_array_equal(a.values, b.values)


class TestSynthetic:
    def test_identity(self):
        x, sp = synthetic_design("identity", 4, 4)
        np.testing.assert_array_equal(sp.eigenvalues, [1, 1, 1, 1])
        assert sp.trace_sigma == 4

    def test_inverse_index(self):
        x, sp = synthetic_design("inverse_index", 5, 3)
        np.testing.assert_allclose(sp.eigenvalues, [1, 1 / 2, 1 / 3], rtol=0, atol=0)
        exact = sum(Fraction(1, i) for i in range(1, 4))
        assert exact == Fraction(11, 6)
        assert sp.trace_sigma == pytest.approx(float(exact), rel=1e-15)
        np.testing.assert_allclose(x.gram, np.diag(sp.eigenvalues), rtol=1e-15)

    def test_spiked(self):
        x, sp = synthetic_design("spiked", 20, 20, d=5, eps=1e-6)
        np.testing.assert_array_equal(sp.eigenvalues[:5], 1.0)
        np.testing.assert_array_equal(sp.eigenvalues[5:], 1e-6)
        assert sp.eigenvalues.size == 20

    def test_gram_equals_requested_diagonal(self):
        x, sp = synthetic_design("inverse_index", 40, 20)
        g = x.values.T @ x.values
        np.testing.assert_allclose(g, np.diag(sp.eigenvalues), rtol=1e-15, atol=0)
        assert x.n == 40

    def test_scale(self):
        _, sp = synthetic_design("identity", 10, 10, scale=2.0)
        np.testing.assert_array_equal(sp.eigenvalues, 2.0)

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_spiked_rejects_bad_eps(self, eps):
        with pytest.raises(InvalidParameter):
            synthetic_design("spiked", 20, 20, d=5, eps=eps)

    def test_requires_n_at_least_p(self):
        with pytest.raises(InvalidParameter):
            synthetic_design("identity", 3, 4)

    def test_seeded_row_mixing_keeps_gram(self):
        x, sp = synthetic_design("inverse_index", 30, 10, seed=3)
        np.testing.assert_allclose(x.gram, np.diag(sp.eigenvalues), atol=1e-12)
        assert np.count_nonzero(np.abs(x.values[10:]) > 1e-8) > 0

    def test_as_spectrum_from_design(self):
        x = design_from_spectrum([3.0, 2.0, 1.0])
        np.testing.assert_allclose(as_spectrum(x).eigenvalues, [3, 2, 1])
