"""Theoretical CID spectra: singly charged b- and y-ion ladders."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import accumulate

from .errors import ValidationError
from .spectra import DEFAULT_MASSES, MassTable, Peptide, as_peptide


@dataclass(frozen=True)
class Ion:
    series: str  # "b" or "y"
    index: int   # 1..n-1
    mz: float


@dataclass(frozen=True)
class TheoreticalSpectrum:
    peptide: Peptide
    b_ions: tuple[Ion, ...]
    y_ions: tuple[Ion, ...]

    @property
    def ions(self) -> tuple[Ion, ...]:
        """All ions, b series first then y series, each in index order."""
        return self.b_ions + self.y_ions

    @property
    def mz(self) -> list[float]:
        return sorted(i.mz for i in self.ions)


def generate_theoretical(p, masses: MassTable = DEFAULT_MASSES) -> TheoreticalSpectrum:
    """Build the b/y ladder for ``p``.

    b_i carries the first i residues plus a proton; y_i the last i residues
    plus water and a proton.
    """
    p = as_peptide(p)
    n = len(p)
    if n < 2:
        raise ValidationError(f"peptide {p.sequence!r} too short to fragment")
    residues = [masses.residue_mass[aa] for aa in p.sequence]
    prefix = list(accumulate(residues[:-1]))
    suffix = list(accumulate(reversed(residues[1:])))
    proton, water = masses.proton_mass, masses.water_mass
    b = tuple(Ion("b", i + 1, m + proton) for i, m in enumerate(prefix))
    y = tuple(Ion("y", i + 1, m + water + proton) for i, m in enumerate(suffix))
    return TheoreticalSpectrum(p, b, y)
