import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from psmgp.errors import ValidationError
from psmgp.spectra import AMINO_ACIDS, DEFAULT_MASSES, peptide_mass
from psmgp.theo import generate_theoretical

PROTON = DEFAULT_MASSES.proton_mass


def test_ga_ions():
    t = generate_theoretical("GA")
    assert t.b_ions[0].mz == pytest.approx(58.02874, abs=1e-9)
    # 71.03711 + 18.01056 + 1.00728 = 90.05495 with the 5-decimal table
    assert t.y_ions[0].mz == pytest.approx(90.05496, abs=1.5e-5)
    assert t.y_ions[0].mz == pytest.approx(90.05495, abs=1e-9)


def test_gas_complementarity():
    t = generate_theoretical("GAS")
    total = peptide_mass("GAS") + 2 * PROTON
    b1, b2 = (i.mz for i in t.b_ions)
    y1, y2 = (i.mz for i in t.y_ions)
    assert b1 + y2 == pytest.approx(total, abs=1e-9)
    assert b2 + y1 == pytest.approx(total, abs=1e-9)


def test_ion_sums_match_direct_summation():
    seq = "PEPTIDEK"
    t = generate_theoretical(seq)
    r = DEFAULT_MASSES.residue_mass
    for i in range(1, len(seq)):
        assert t.b_ions[i - 1].mz == pytest.approx(sum(r[a] for a in seq[:i]) + PROTON, abs=1e-9)
        assert t.y_ions[i - 1].mz == pytest.approx(
            sum(r[a] for a in seq[-i:]) + DEFAULT_MASSES.water_mass + PROTON, abs=1e-9)


def test_too_short():
    with pytest.raises(ValidationError):
        generate_theoretical("G")


@given(st.text(alphabet=AMINO_ACIDS, min_size=2, max_size=30))
def test_ladder_properties(seq):
    t = generate_theoretical(seq)
    n = len(seq)
    assert len(t.b_ions) == len(t.y_ions) == n - 1
    assert [i.index for i in t.b_ions] == list(range(1, n))
    total = peptide_mass(seq) + 2 * PROTON
    for i in range(1, n):
        assert abs(t.b_ions[i - 1].mz + t.y_ions[n - i - 1].mz - total) <= 1e-9
    for series in (t.b_ions, t.y_ions):
        assert all(a.mz < b.mz for a, b in zip(series, series[1:]))
    assert max(i.mz for i in t.ions) < total
