"""Forward models: apply/adjoint fidelity, calibration, simulation, file IO."""

import numpy as np
import pytest

from poisson_pr.operators import (
    CanonicalDftModel,
    DenseModel,
    FieldTag,
    MaskedDftModel,
    MeasurementSet,
    SignalVector,
    calibrate_scale,
    load_file_matrix,
    load_pgm,
    make_masks,
    random_gaussian_model,
    save_file_matrix,
    simulate_poisson,
)


def _rand_vec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def all_variants():
    """One small instance of each of the four model variants."""
    rng = np.random.default_rng(11)
    dense = DenseModel(_rand_vec(rng, 12).reshape(4, 3))
    gauss = random_gaussian_model(8, 4, seed=3)
    masked = MaskedDftModel(make_masks(2, 4, seed=5))
    canon = CanonicalDftModel((2, 2), np.array([[0.5, 1.0], [0.2, 0.0]]))
    return [("dense", dense), ("gaussian", gauss),
            ("masked_dft", masked), ("canonical_dft", canon)]


class TestSignalVector:
    def test_real_field_rejects_imag(self):
        with pytest.raises(ValueError):
            SignalVector(np.array([1.0 + 1.0j]), field=FieldTag.REAL)

    def test_nonneg_field_rejects_negative(self):
        with pytest.raises(ValueError):
            SignalVector(np.array([-1.0, 1.0]), field=FieldTag.REAL_NONNEGATIVE)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            SignalVector(np.array([]))


class TestApply:
    def test_identity(self):
        m = DenseModel(np.eye(2))
        x = np.array([1.0, 1.0j])
        assert np.allclose(m.apply(x), x)

    def test_masked_dft_impulse_flat_spectrum(self):
        m = MaskedDftModel(np.ones((1, 2)))
        assert m.rows == 3  # oversampled length 2N-1
        out = m.apply(np.array([1.0, 0.0]))
        assert np.allclose(np.abs(out), 1.0, atol=1e-12)

    def test_canonical_zero_signal_gives_reference_spectrum(self):
        ref = np.array([[1.0, 2.0], [0.5, 0.0]])
        m = CanonicalDftModel((2, 2), ref)
        out = m.apply(np.zeros(4))
        # the reference alone: DFT of [0 | 0 | R]
        full = np.zeros(m.concat_dims, dtype=complex)
        full[:, -2:] = ref
        expected = np.fft.fft2(full, s=m.fft_dims).ravel()
        assert np.allclose(out, expected, atol=1e-12)
        assert np.allclose(np.abs(out) ** 2,
                           np.abs(m.reference_only_spectrum()) ** 2)

    def test_dimension_mismatch_reports_both(self):
        m = DenseModel(np.eye(3))
        with pytest.raises(ValueError, match=r"\(2,\).*\(3,\)"):
            m.apply(np.zeros(2))

    def test_scale_applied(self):
        m = DenseModel(np.eye(2), scale=3.0)
        assert np.allclose(m.apply(np.array([1.0, 2.0])), [3.0, 6.0])


class TestAdjoint:
    def test_identity(self):
        m = DenseModel(np.eye(2))
        v = np.array([2.0, 3.0j])
        assert np.allclose(m.adjoint(v), v)

    def test_dimension_mismatch(self):
        m = DenseModel(np.ones((4, 3)))
        with pytest.raises(ValueError, match="adjoint"):
            m.adjoint(np.zeros(3))

    @pytest.mark.parametrize("name,model", all_variants())
    def test_adjoint_consistency(self, name, model):
        rng = np.random.default_rng(7)
        for _ in range(3):
            x = _rand_vec(rng, model.cols)
            z = _rand_vec(rng, model.rows)
            lhs = np.vdot(z, model.apply_linear(x))
            rhs = np.vdot(model.adjoint(z), x)
            assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0), name

    @pytest.mark.parametrize("name,model", all_variants())
    def test_densified_matches_apply_and_adjoint(self, name, model):
        a = model.densify()
        rng = np.random.default_rng(13)
        x = _rand_vec(rng, model.cols)
        z = _rand_vec(rng, model.rows)
        assert np.allclose(model.apply_linear(x), a @ x, atol=1e-12), name
        assert np.allclose(model.adjoint(z), a.conj().T @ z, atol=1e-12), name

    def test_masked_dft_adjoint_against_densified(self):
        m = MaskedDftModel(make_masks(2, 4, seed=1))
        a = m.densify()
        rng = np.random.default_rng(2)
        v = _rand_vec(rng, m.rows)
        assert np.allclose(m.adjoint(v), a.conj().T @ v, atol=1e-12)

    @pytest.mark.parametrize("name,model", all_variants())
    def test_normal_diag_matches_densified(self, name, model):
        diag = model.normal_diag()
        if diag is None:
            return
        a = model.densify()
        h = a.conj().T @ a
        assert np.allclose(np.diag(h).real, diag, atol=1e-10), name
        off = h - np.diag(np.diag(h))
        assert np.max(np.abs(off)) < 1e-10, f"{name}: A'A not diagonal"


class TestCalibrateScale:
    def test_identity_two_ones(self):
        m = DenseModel(np.eye(2))
        c = calibrate_scale(m, np.array([1.0, 1.0]), 0.25)
        assert c == pytest.approx(0.5, abs=1e-15)
        assert np.mean(m.intensities(np.array([1.0, 1.0]))) == pytest.approx(0.25)

    def test_degenerate_zero_field(self):
        m = DenseModel(np.eye(2), background=0.25)
        assert calibrate_scale(m, np.zeros(2), 0.25) == 0.0
        with pytest.raises(ValueError):
            calibrate_scale(m, np.zeros(2), 0.5)

    def test_target_below_background_rejected(self):
        m = DenseModel(np.eye(2), background=0.5)
        with pytest.raises(ValueError):
            calibrate_scale(m, np.ones(2), 0.25)

    def test_exact_mean_intensity(self):
        m = random_gaussian_model(64, 8, seed=0, background=0.1)
        rng = np.random.default_rng(1)
        x = _rand_vec(rng, 8)
        calibrate_scale(m, x, 0.25)
        assert np.mean(m.intensities(x)) == pytest.approx(0.25, abs=1e-12)

    def test_simulated_mean_near_target(self):
        # mean 0.25 with b = 0.1 everywhere, Monte-Carlo 3 sigma
        m = random_gaussian_model(20000, 8, seed=2, background=0.1)
        rng = np.random.default_rng(3)
        x = _rand_vec(rng, 8)
        calibrate_scale(m, x, 0.25)
        meas = simulate_poisson(m, x, seed=4)
        sigma = np.sqrt(np.mean(m.intensities(x)) / m.rows)
        assert abs(meas.mean_count - 0.25) < 3.0 * sigma

    def test_canonical_includes_reference_in_calibration(self):
        m = CanonicalDftModel((2, 2), np.ones((2, 2)), background=0.1)
        x = np.array([0.3, 0.7, 0.1, 0.9])
        calibrate_scale(m, x, 0.25)
        assert np.mean(m.intensities(x)) == pytest.approx(0.25, abs=1e-12)


class TestSimulatePoisson:
    def test_zero_mean_gives_zero_counts(self):
        m = DenseModel(np.eye(3))
        meas = simulate_poisson(m, np.zeros(3), seed=0)
        assert np.all(meas.y == 0)

    def test_seed_determinism(self):
        m = random_gaussian_model(50, 5, seed=0, background=0.1)
        x = np.ones(5)
        y1 = simulate_poisson(m, x, seed=42).y
        y2 = simulate_poisson(m, x, seed=42).y
        assert np.array_equal(y1, y2)

    def test_clt_sample_mean(self):
        # per-entry mean exactly 0.25 on 1e5 measurements
        n = 100_000
        m = DenseModel(np.zeros((n, 1)), background=0.25)
        meas = simulate_poisson(m, np.zeros(1), seed=7)
        assert abs(meas.mean_count - 0.25) < 4.0 * np.sqrt(0.25 / n)

    def test_measurement_set_validates(self):
        with pytest.raises(ValueError):
            MeasurementSet(np.array([-1.0, 2.0]), seed=0)
        ms = MeasurementSet(np.array([1.0, 3.0]), seed=0)
        assert ms.mean_count == 2.0


class TestMasks:
    def test_first_mask_all_ones(self):
        masks = make_masks(4, 10, seed=0)
        assert np.all(masks[0] == 1.0)

    def test_bernoulli_values_binary(self):
        masks = make_masks(5, 64, seed=1)
        assert set(np.unique(masks)) <= {0.0, 1.0}

    def test_exact_half(self):
        masks = make_masks(5, 10, seed=2, exact_half=True)
        for row in masks[1:]:
            assert int(np.sum(row)) == 5


class TestFileMatrix:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        path = tmp_path / "mat.csv"
        save_file_matrix(path, a)
        m = load_file_matrix(path)
        assert m.rows == 3 and m.cols == 2
        assert np.allclose(m.entries, a, atol=0)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("not a header\n")
        with pytest.raises(ValueError, match="header"):
            load_file_matrix(path)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("2,1\n1:0\n")
        with pytest.raises(ValueError, match="ended early"):
            load_file_matrix(path)

    def test_wrong_row_width(self, tmp_path):
        path = tmp_path / "wide.csv"
        path.write_text("1,2\n1:0\n")
        with pytest.raises(ValueError, match="entries"):
            load_file_matrix(path)


class TestPgm:
    def test_p2_ascii(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_text("P2\n# comment\n2 2\n255\n0 128 255 64\n")
        img = load_pgm(path)
        assert img.shape == (2, 2)
        assert img[0, 0] == 0.0
        assert img[0, 1] == pytest.approx(128 / 255)
        assert img[1, 0] == 1.0

    def test_p5_binary(self, tmp_path):
        path = tmp_path / "img5.pgm"
        path.write_bytes(b"P5\n2 1\n255\n" + bytes([10, 200]))
        img = load_pgm(path)
        assert img.shape == (1, 2)
        assert np.allclose(img, [[10 / 255, 200 / 255]])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "nope.pgm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(ValueError, match="magic"):
            load_pgm(path)
