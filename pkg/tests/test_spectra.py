import csv

import numpy as np
import pytest

from transmon_hierarchy.errors import AmbiguousLabel, NegativeDiscriminant, NoConvergence
from transmon_hierarchy.models import ModelSpec, Variant
from transmon_hierarchy.spectra import (
    REFERENCE_RATIO,
    SWEEP_COLUMNS,
    closed_form_parameters,
    dressed_labels,
    dressed_spectrum,
    eigensystem,
    ejc_sweep,
    invert_parameters,
    params_for_ratio,
    spectral_features,
    transition_frequencies,
    write_sweep_csv,
)


class TestEigensystem:
    def test_sigma_z(self):
        vals, _ = eigensystem(np.diag([1.0, -1.0]))
        np.testing.assert_array_equal(vals, [-1.0, 1.0])

    def test_diagonal_sorted(self):
        vals, _ = eigensystem(np.diag([3.0, -2.0, 0.5, 7.0]))
        np.testing.assert_array_equal(vals, [-2.0, 0.5, 3.0, 7.0])

    def test_cubic_roots(self, rng):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = a + a.conj().T
        vals, vecs = eigensystem(h)
        roots = np.sort(np.roots(np.poly(h)).real)
        np.testing.assert_allclose(vals, roots, atol=1e-10)
        assert np.max(np.abs(vecs.conj().T @ vecs - np.eye(3))) < 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            eigensystem(np.array([[0.0, 1.0], [2.0, 0.0]]))


class TestDressedLabels:
    def test_identity_at_zero_coupling(self, params):
        spec = ModelSpec(Variant.GR)
        sp = dressed_spectrum(spec, params.replace(g=0.0))
        energies = np.diag(sp.vectors.conj().T @ np.diag(sp.energies) @ sp.vectors).real
        for (j, k), e in sp.labels.index.items():
            assert sp.labels.overlap[(j, k)] == pytest.approx(1.0, abs=1e-12)
            assert abs(sp.vectors[j * 3 + k, e]) == pytest.approx(1.0)
        assert len(sp.labels.index) == spec.dim
        assert energies.size == spec.dim

    def test_dispersive_regime_overlaps(self, params):
        for variant in (Variant.CPB, Variant.DO3, Variant.GR, Variant.R):
            sp = dressed_spectrum(ModelSpec(variant), params)
            assert min(sp.labels.overlap[lab] for lab in [(0, 0), (1, 0)]) > 0.99

    def test_resonance_is_maximally_mixed(self, params):
        # GR w01 tuned onto the resonator: |1,0> and |0,1> split evenly
        p = params.replace(ej=(params.omega_r + params.ec) ** 2 / (8 * params.ec))
        sp = dressed_spectrum(ModelSpec(Variant.GR), p, require=())
        assert sp.labels.overlap[(1, 0)] == pytest.approx(0.5, abs=1e-3)

    def test_ambiguous_label_raised(self):
        # one bare state spread evenly over three eigenvectors
        mix = np.array([[1, 1, 1], [1, np.exp(2j * np.pi / 3), np.exp(4j * np.pi / 3)],
                        [1, np.exp(4j * np.pi / 3), np.exp(2j * np.pi / 3)]]) / np.sqrt(3)
        with pytest.raises(AmbiguousLabel):
            dressed_labels(mix.T, 3, 1, require=[(0, 0)])

    def test_global_phase_invariance(self, params):
        sp = dressed_spectrum(ModelSpec(Variant.DO3), params)
        phased = sp.vectors * np.exp(1j * np.linspace(0, 6, sp.vectors.shape[1]))
        again = dressed_labels(phased, 12, 3)
        assert again.index == sp.labels.index

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            dressed_labels(np.eye(4), 3, 2)

    def test_missing_label_lookup(self, params):
        sp = dressed_spectrum(ModelSpec(Variant.R), params)
        with pytest.raises(KeyError):
            sp.labels[(5, 5)]


class TestSpectralFeatures:
    def test_gr_uncoupled_exact(self, params):
        f = spectral_features(ModelSpec(Variant.GR), params.replace(g=0.0))
        assert f.omega01 == pytest.approx(np.sqrt(8 * 0.348 * 10.158) - 0.348, abs=1e-9)
        assert f.anharmonicity == pytest.approx(-0.348, abs=1e-9)
        assert f.chi == pytest.approx(0.0, abs=1e-12)

    def test_cpb_gr_gaps(self, params):
        c = spectral_features(ModelSpec(Variant.CPB), params)
        g = spectral_features(ModelSpec(Variant.GR), params)
        assert abs(c.omega01 - g.omega01) > 0.015
        assert abs(c.anharmonicity - g.anharmonicity) > 0.050

    def test_gr_dispersive_shift(self, params):
        f = spectral_features(ModelSpec(Variant.GR), params)
        delta = f.omega01 - params.omega_r
        delta0 = params.plasma - params.ec - params.omega_r
        assert delta0 == pytest.approx(-2.020, abs=1e-3)
        expected = -params.g**2 * params.ec / (delta0 * (delta0 - params.ec))
        assert expected == pytest.approx(-2.9e-5, rel=0.05)
        assert f.chi == pytest.approx(expected, rel=0.1)
        assert delta < 0

    def test_two_level_has_no_anharmonicity(self, params):
        assert spectral_features(ModelSpec(Variant.R), params).anharmonicity is None

    def test_single_resonator_level_has_no_chi(self, params):
        assert spectral_features(ModelSpec(Variant.GR, resonator_levels=1), params).chi is None

    @pytest.mark.parametrize("variant", [Variant.CPB, Variant.DO2, Variant.DO3, Variant.GR, Variant.GR3])
    def test_transmon_anharmonicity_negative(self, variant, params):
        assert spectral_features(ModelSpec(variant), params).anharmonicity < 0


class TestTransitions:
    def test_gr_relations(self, params):
        p = params.replace(g=0.0)
        t = {(x.lower, x.upper, x.photons): x.frequency for x in transition_frequencies(ModelSpec("GR"), p, 3)}
        w01 = p.plasma - p.ec
        assert t[(1, 2, 1)] - t[(0, 1, 1)] == pytest.approx(-p.ec, abs=1e-12)
        assert t[(0, 2, 2)] == pytest.approx(w01 - p.ec / 2, abs=1e-12)
        assert t[(1, 3, 2)] == pytest.approx(w01 - 1.5 * p.ec, abs=1e-12)
        assert len(t) == 12

    def test_names(self, params):
        names = [t.name for t in transition_frequencies(ModelSpec("GR"), params, 2)]
        assert "|0>->|2> (2-photon)" in names and "|1>->|2>" in names

    def test_cpb_do3_two_photon(self, params):
        """Sub-percent agreement on the 0->2 two-photon line, limited by the truncated cosine."""
        def two_photon(variant):
            return next(t.frequency for t in transition_frequencies(ModelSpec(variant), params, 2)
                        if (t.lower, t.upper, t.photons) == (0, 2, 2))

        diff = abs(two_photon("CPB") - two_photon("DO3"))
        gr = abs(two_photon("CPB") - two_photon("GR"))
        assert diff < 0.015
        assert diff < gr / 3

    def test_rejects_high_level(self, params):
        with pytest.raises(ValueError):
            transition_frequencies(ModelSpec("GR"), params, 6)


class TestSweep:
    def test_constant_frequency_mode(self, params):
        p0 = params.replace(g=0.0)
        rows = ejc_sweep("constant_freq", [1, 2, 4, 8, 16, 32, 64], p0, models=[Variant.GR])
        w = np.array([r.omega01 for r in rows])
        np.testing.assert_allclose(w, p0.plasma - p0.ec, atol=1e-9)
        np.testing.assert_allclose([r.ej / r.ec for r in rows], REFERENCE_RATIO * np.array([1, 2, 4, 8, 16, 32, 64]),
                                   rtol=1e-12)

    def test_constant_anharmonicity_mode(self, params):
        p0 = params.replace(g=0.0)
        rows = ejc_sweep("constant_anharm", [1, 4, 16], p0, models=[Variant.GR])
        np.testing.assert_allclose([r.anharmonicity for r in rows], -p0.ec, atol=1e-9)

    def test_gaps_shrink(self, params):
        rows = ejc_sweep("constant_freq", [1, 4], params, models=[Variant.CPB, Variant.GR])
        gap = [abs(rows[i].omega01 - rows[i + 1].omega01) for i in (0, 2)]
        assert gap[1] < gap[0]

    @pytest.mark.parametrize("variant", [Variant.CPB, Variant.DO3, Variant.GR])
    def test_anharmonicity_limit(self, variant, params):
        p = params_for_ratio("constant_freq", 64, params)
        f = spectral_features(ModelSpec(variant), p)
        assert abs(f.anharmonicity / -p.ec - 1) < 0.02

    def test_rejects_bad_inputs(self, params):
        with pytest.raises(ValueError):
            params_for_ratio("constant_freq", 0.0, params)
        with pytest.raises(ValueError):
            params_for_ratio("constant_freq", 0.004, params)
        with pytest.raises(ValueError):
            params_for_ratio("bogus", 1.0, params)

    def test_parallel_ordering(self, params):
        serial = ejc_sweep("constant_freq", [1, 2], params, models=[Variant.GR, Variant.R])
        parallel = ejc_sweep("constant_freq", [1, 2], params, models=[Variant.GR, Variant.R], workers=2)
        assert serial == parallel
        assert [(r.n_exp, r.model) for r in serial] == [(1, "GR"), (1, "R"), (2, "GR"), (2, "R")]

    def test_csv_round_trip(self, params, tmp_path):
        rows = ejc_sweep("constant_freq", [1, 2], params, models=[Variant.GR, Variant.R])
        path = write_sweep_csv(rows, tmp_path / "s.csv")
        with path.open() as fh:
            read = list(csv.reader(fh))
        assert tuple(read[0]) == SWEEP_COLUMNS
        assert float(read[1][4]) == rows[0].omega01
        assert read[2][5] == ""


class TestInversion:
    def test_closed_form_exact(self, params):
        w01 = params.plasma - params.ec
        delta = w01 - params.omega_r
        chi = -params.g**2 * params.ec / (delta * (delta - params.ec))
        p = closed_form_parameters(w01, w01 - params.ec, chi, params.omega_r)
        assert p.ec == pytest.approx(params.ec, abs=1e-10)
        assert p.ej == pytest.approx(params.ej, abs=1e-10)
        assert p.g == pytest.approx(params.g, abs=1e-10)

    def test_negative_discriminant(self, params):
        with pytest.raises(NegativeDiscriminant):
            closed_form_parameters(4.97, 4.62, +1e-4, params.omega_r)

    def test_rejects_positive_anharmonicity(self, params):
        with pytest.raises(ValueError):
            closed_form_parameters(4.97, 5.1, -1e-4, params.omega_r)

    @pytest.mark.parametrize("variant", [Variant.CPB, Variant.DO3, Variant.GR, Variant.R])
    def test_round_trip(self, variant, params):
        spec = ModelSpec(variant)
        f = spectral_features(spec, params)
        w12 = f.omega01 + (f.anharmonicity if f.anharmonicity is not None else -params.ec)
        p = invert_parameters(f.omega01, w12, f.chi, params.omega_r, spec, method="numeric")
        for name in ("ec", "ej", "g"):
            assert getattr(p, name) == pytest.approx(getattr(params, name), rel=1e-3)

    def test_no_convergence(self, params):
        with pytest.raises(NoConvergence):
            invert_parameters(4.9, 4.55, -3e-5, params.omega_r, ModelSpec("DO3"), method="numeric", max_iter=2)

    def test_unknown_method(self, params):
        with pytest.raises(ValueError):
            invert_parameters(4.9, 4.55, -3e-5, params.omega_r, ModelSpec("DO3"), method="magic")
