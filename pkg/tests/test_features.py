import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psmgp.errors import ValidationError
from psmgp.features import (BinnedVector, FeatureConfig, FeatureRow, bin_spectrum, cosine_feature,
                            euclidean_feature, extract_features, extract_many, hamming_feature,
                            match_peaks, read_feature_table, sequest_features, sequest_preprocess,
                            variable_length, write_feature_table)
from psmgp.spectra import AMINO_ACIDS, Spectrum, peptide_mass
from psmgp.theo import Ion, TheoreticalSpectrum, generate_theoretical

from conftest import exact_spectrum


def brute_force_matches(spectrum, theo, tol):
    """Every ion that has at least one peak within ``tol`` (all-pairs scan)."""
    hit = set()
    for ion in theo.ions:
        for p in spectrum.peaks:
            if abs(ion.mz - p.mz) <= tol:
                hit.add((ion.series, ion.index))
    return hit


def leading(hit, series, n):
    k = 0
    for i in range(1, n):
        if (series, i) in hit:
            k += 1
        else:
            break
    return k


def fake_theo(mzs):
    ions = tuple(Ion("b", i + 1, m) for i, m in enumerate(mzs))
    return TheoreticalSpectrum(None, ions, ())


def test_match_example():
    s = Spectrum.build("s", [(100.3, 1.0), (500.0, 1.0)], 600.0, 2)
    m = match_peaks(s, fake_theo([100.0, 200.0]), 0.5)
    assert [(ion.mz, p.mz) for ion, p in m.matched] == [(100.0, 100.3)]
    assert [ion.mz for ion in m.unmatched_theoretical] == [200.0]
    assert brute_force_matches(s, fake_theo([100.0, 200.0]), 0.5) == {("b", 1)}


def test_match_empty_and_exact():
    t = generate_theoretical("PEPTIDEK")
    empty = Spectrum.build("e", [], 900.0, 2)
    assert len(match_peaks(empty, t).unmatched_theoretical) == 14
    m = match_peaks(exact_spectrum("PEPTIDEK"), t)
    assert len(m.matched) == 14 and not m.unmatched_theoretical


def test_match_nearest_and_tie_break():
    s = Spectrum.build("s", [(99.8, 1.0), (100.2, 2.0), (100.1, 3.0)], 600.0, 2)
    (pair,) = match_peaks(s, fake_theo([100.0]), 0.5).matched
    assert pair[1].mz == 100.1
    s = Spectrum.build("s", [(99.75, 1.0), (100.25, 2.0)], 600.0, 2)
    (pair,) = match_peaks(s, fake_theo([100.0]), 0.5).matched
    assert pair[1].mz == 99.75


def test_match_tolerance_must_be_positive():
    with pytest.raises(ValidationError):
        match_peaks(exact_spectrum("GAS"), generate_theoretical("GAS"), 0.0)


def test_perfect_match_features():
    seq = "PEPTIDEK"
    t = generate_theoretical(seq)
    # precondition for the binned features: no two ions share a 0.5 Da bin
    bins = [math.floor(ion.mz / 0.5) for ion in t.ions]
    assert len(set(bins)) == len(bins)
    fv = extract_features(exact_spectrum(seq), seq)
    n = len(seq)
    assert (fv.f2, fv.f3, fv.f5, fv.f6) == (2 * (n - 1), 0, n - 1, n - 1)
    assert (fv.f7, fv.f8, fv.f9) == (1.0, 0.0, 0)
    assert fv.f4 < 1e-6
    assert fv.f1 == 2 * (n - 1)
    assert fv.f10 == 1.0 and fv.f11 == 1.0


def test_empty_spectrum_features():
    seq = "PEPTIDEK"
    fv = extract_features(Spectrum.build("e", [], peptide_mass(seq), 2), seq)
    assert (fv.f1, fv.f2, fv.f5, fv.f6) == (0, 0, 0, 0)
    assert fv.f3 == 14
    assert fv.f7 == 0.0 and fv.f10 == 0.0 and fv.f11 == 0.0


def test_b1_b2_only_fixture():
    seq = "PEPTIDEK"
    t = generate_theoretical(seq)
    s = Spectrum.build("s", [(t.b_ions[0].mz, 1.0), (t.b_ions[1].mz, 1.0)], peptide_mass(seq), 2)
    hit = brute_force_matches(s, t, 0.5)
    assert hit == {("b", 1), ("b", 2)}
    oracle = (leading(hit, "b", 8), len(hit), leading(hit, "y", 8))
    assert oracle == (2, 2, 0)
    fv = extract_features(s, seq)
    assert (fv.f5, fv.f2, fv.f6) == oracle


def test_cosine_examples():
    a = np.zeros(4000)
    a[[0, 1]] = 1
    b = np.zeros(4000)
    b[0] = 1
    assert cosine_feature(a, b) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert cosine_feature(a, a) == 1.0
    c = np.zeros(4000)
    c[5] = 3
    assert cosine_feature(a, c) == 0.0
    assert cosine_feature(a, np.zeros(4000)) == 0.0
    with pytest.raises(ValidationError):
        cosine_feature(a, np.zeros(10))


def test_euclidean_and_hamming():
    a = np.zeros(50)
    a[[1, 2, 3]] = [1, 2, 3]
    b = np.zeros(50)
    b[[10, 11]] = [5, 1]
    assert euclidean_feature(a, a) == 0.0
    assert hamming_feature(a, a) == 0
    assert euclidean_feature(a, b) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert hamming_feature(a, b) == 3 + 2
    with pytest.raises(ValidationError):
        hamming_feature(a, np.zeros(3))
    with pytest.raises(ValidationError):
        euclidean_feature(a, np.zeros(3))


def test_bin_examples():
    s = Spectrum.build("s", [(100.2, 5.0), (100.4, 3.0)], 500.0, 2)
    v = bin_spectrum(s, 4000, 0.5)
    assert isinstance(v, BinnedVector) and v.length == 4000
    assert v.bins[200] == 8.0 and v.bins.sum() == 8.0
    t = fake_theo([100.2])
    assert bin_spectrum(t).bins[200] == 1.0
    assert not bin_spectrum(Spectrum.build("e", [], 500.0, 2)).bins.any()


def test_bin_drops_out_of_range():
    s = Spectrum.build("s", [(1999.9, 1.0), (2000.0, 1.0), (2500.0, 1.0)], 500.0, 2)
    v = bin_spectrum(s, 4000, 0.5)
    assert v.dropped == 2
    assert v.bins[3999] == 1.0


def test_variable_length():
    assert variable_length(1000.0, 0.5) == 2000
    assert variable_length(1000.1, 0.5) == 2001


def test_sequest_preprocess_windows():
    # max m/z 1000 -> 100 Da windows; each window scaled to a max of 50
    s = Spectrum.build("s", [(50, 4.0), (60, 1.0), (550, 100.0), (1000, 0.0001)], 900.0, 2)
    mz, inten = sequest_preprocess(s)
    got = dict(zip(mz.tolist(), inten.tolist()))
    assert got[50.0] == pytest.approx(50.0)
    assert got[60.0] == pytest.approx(25.0)
    assert got[550.0] == pytest.approx(50.0)
    assert got[1000.0] == pytest.approx(50.0)


def test_sequest_noise_floor():
    # both low peaks share the first 100 Da window
    s = Spectrum.build("s", [(50, 1e6), (60, 1.0), (1000, 4.0)], 900.0, 2)
    mz, inten = sequest_preprocess(s)
    assert mz.tolist() == [50.0, 1000.0]  # sqrt ratio 1e-3 falls under the 1% floor


def test_sequest_perfect_and_empty():
    seq = "PEPTIDEK"
    t = generate_theoretical(seq)
    assert sequest_features(exact_spectrum(seq, intensity=7.0), t) == (1.0, 1.0)
    assert sequest_features(Spectrum.build("e", [], 900.0, 2), t) == (0.0, 0.0)


spectra = st.lists(st.tuples(st.floats(50, 1500), st.floats(0.01, 1000)), min_size=0, max_size=40)
seqs = st.text(alphabet=AMINO_ACIDS, min_size=2, max_size=14)


@settings(max_examples=60, deadline=None)
@given(spectra, seqs, st.floats(0.01, 100))
def test_feature_invariants(peaks, seq, scale):
    s = Spectrum.build("s", peaks, peptide_mass(seq) + 0.3, 2)
    fv = extract_features(s, seq)
    n = len(seq)
    assert fv.f2 + fv.f3 == 2 * (n - 1)
    assert fv.f5 <= min(n - 1, fv.f2) and fv.f6 <= min(n - 1, fv.f2)
    assert 0.0 <= fv.f7 <= 1.0
    assert fv.f4 == pytest.approx(0.3, abs=1e-9)
    scaled = Spectrum.build("s", [(m, i * scale) for m, i in peaks], s.precursor_mass, 2)
    fs = extract_features(scaled, seq)
    assert fs.f7 == pytest.approx(fv.f7, abs=1e-12)
    assert fs.f1 == pytest.approx(fv.f1 * scale, rel=1e-9)
    v = bin_spectrum(s)
    assert v.bins.sum() == pytest.approx(sum(i for m, i in peaks if m < 2000), rel=1e-12)


def test_threads_match_sequential():
    pairs = [(exact_spectrum("PEPTIDEK"), p) for p in ("PEPTIDEK", "PEPTIDKE", "GASPEPK", "KEDITPEP")]
    assert extract_many(pairs, threads=4) == extract_many(pairs, threads=1)


def test_feature_table_round_trip(tmp_path):
    fv = extract_features(exact_spectrum("PEPTIDEK"), "PEPTIDEK", target=12.5)
    rows = [FeatureRow("scan:7:1", "PEPTIDEK", fv, True),
            FeatureRow("scan:7:2", "PEPTIDKE", fv.with_target(None), None)]
    path = tmp_path / "f.tsv"
    write_feature_table(rows, path)
    header = path.read_text().splitlines()[0].split("\t")
    assert header == ["psm_id", "peptide"] + [f"f{i}" for i in range(1, 12)] + ["target", "is_correct"]
    back = read_feature_table(path)
    assert back[0].spectrum_id == "scan:7" and back[0].rank == 1
    assert back[0].features.target == 12.5 and back[1].features.target is None
    assert back[0].is_correct is True and back[1].is_correct is None
    assert back[0].features.values == pytest.approx(fv.values, rel=1e-5)


def test_config_validation():
    with pytest.raises(ValidationError):
        FeatureConfig(tolerance=0)
    with pytest.raises(ValidationError):
        FeatureConfig(n_bins=0)
