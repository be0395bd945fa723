import random

import numpy as np
import pytest

from psmgp.spectra import Spectrum
from psmgp.theo import generate_theoretical

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def exact_spectrum(peptide, sid="exact", charge=2, intensity=1.0):
    """Spectrum holding exactly the theoretical b/y ions of ``peptide``."""
    from psmgp.spectra import peptide_mass

    t = generate_theoretical(peptide)
    peaks = [(ion.mz, intensity) for ion in t.ions]
    return Spectrum.build(sid, peaks, peptide_mass(peptide), charge)


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture
def nprng():
    return np.random.default_rng(12345)
