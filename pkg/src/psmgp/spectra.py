"""Spectra, peptides, MGF input/output and monoisotopic mass arithmetic."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

PROTON_MASS = 1.00728
WATER_MASS = 18.01056

# Monoisotopic residue masses (Da), 5-decimal published values.
RESIDUE_MASSES = {
    "G": 57.02146,
    "A": 71.03711,
    "S": 87.03203,
    "P": 97.05276,
    "V": 99.06841,
    "T": 101.04768,
    "C": 103.00919,
    "L": 113.08406,
    "I": 113.08406,
    "N": 114.04293,
    "D": 115.02694,
    "Q": 128.05858,
    "K": 128.09496,
    "E": 129.04259,
    "M": 131.04049,
    "H": 137.05891,
    "F": 147.06841,
    "R": 156.10111,
    "Y": 163.06333,
    "W": 186.07931,
}

AMINO_ACIDS = "".join(sorted(RESIDUE_MASSES))


@dataclass(frozen=True)
class MassTable:
    residue_mass: Mapping[str, float] = field(default_factory=lambda: dict(RESIDUE_MASSES))
    proton_mass: float = PROTON_MASS
    water_mass: float = WATER_MASS

    def __post_init__(self):
        missing = set(RESIDUE_MASSES) - set(self.residue_mass)
        if missing:
            raise ValidationError(f"mass table lacks residues: {''.join(sorted(missing))}")
        bad = [k for k, v in self.residue_mass.items() if not v > 0]
        if bad or not self.proton_mass > 0 or not self.water_mass > 0:
            raise ValidationError("all masses must be positive")

    @classmethod
    def from_file(cls, path) -> "MassTable":
        """Load overrides from a ``key = value`` file.

        Keys are residue letters, ``proton`` or ``water``; anything not
        mentioned keeps its default.
        """
        residues = dict(RESIDUE_MASSES)
        proton, water = PROTON_MASS, WATER_MASS
        for key, value in read_key_values(path).items():
            try:
                mass = float(value)
            except ValueError:
                raise ValidationError(f"{path}: non-numeric mass for {key!r}") from None
            if key.lower() == "proton":
                proton = mass
            elif key.lower() == "water":
                water = mass
            elif key.upper() in RESIDUE_MASSES:
                residues[key.upper()] = mass
            else:
                raise ValidationError(f"{path}: unknown mass key {key!r}")
        return cls(residues, proton, water)


DEFAULT_MASSES = MassTable()


def read_key_values(path) -> dict[str, str]:
    """Parse a simple ``key = value`` text file (``#`` starts a comment)."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected key = value", line=lineno, source=str(path))
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


@dataclass(frozen=True)
class Peak:
    mz: float
    intensity: float

    def __post_init__(self):
        if not self.mz > 0:
            raise ValidationError(f"peak m/z must be positive, got {self.mz}")
        if not self.intensity >= 0:
            raise ValidationError(f"peak intensity must be non-negative, got {self.intensity}")


@dataclass(frozen=True)
class Spectrum:
    """An MS/MS spectrum. ``precursor_mass`` is the neutral peptide mass."""

    id: str
    peaks: tuple[Peak, ...]
    precursor_mass: float
    charge: int

    def __post_init__(self):
        peaks = tuple(self.peaks)
        object.__setattr__(self, "peaks", peaks)
        if self.charge < 1:
            raise ValidationError(f"{self.id}: charge must be >= 1")
        if not self.precursor_mass > 0:
            raise ValidationError(f"{self.id}: precursor mass must be positive")
        if any(a.mz > b.mz for a, b in zip(peaks, peaks[1:])):
            raise ValidationError(f"{self.id}: peaks are not sorted by m/z")

    @classmethod
    def build(cls, id, peaks: Iterable, precursor_mass, charge) -> "Spectrum":
        """Construct from unsorted ``(mz, intensity)`` pairs or Peaks."""
        ps = [p if isinstance(p, Peak) else Peak(float(p[0]), float(p[1])) for p in peaks]
        ps.sort(key=lambda p: p.mz)
        return cls(id, tuple(ps), float(precursor_mass), int(charge))

    @property
    def mz(self) -> list[float]:
        return [p.mz for p in self.peaks]

    @property
    def intensity(self) -> list[float]:
        return [p.intensity for p in self.peaks]

    @property
    def precursor_mz(self) -> float:
        return precursor_mz(self.precursor_mass, self.charge)


@dataclass(frozen=True)
class Peptide:
    sequence: str

    def __post_init__(self):
        if not self.sequence:
            raise ValidationError("empty peptide sequence")
        bad = sorted(set(self.sequence) - set(RESIDUE_MASSES))
        if bad:
            raise ValidationError(f"invalid residue(s) {''.join(bad)!r} in {self.sequence!r}")

    def __len__(self):
        return len(self.sequence)

    def __str__(self):
        return self.sequence

    @property
    def length(self) -> int:
        return len(self.sequence)


def as_peptide(p) -> Peptide:
    return p if isinstance(p, Peptide) else Peptide(str(p))


def peptide_mass(p, masses: MassTable = DEFAULT_MASSES) -> float:
    """Neutral monoisotopic mass: residue sum plus one water."""
    p = as_peptide(p)
    return sum(masses.residue_mass[aa] for aa in p.sequence) + masses.water_mass


def neutral_mass(mz: float, charge: int, masses: MassTable = DEFAULT_MASSES) -> float:
    return mz * charge - charge * masses.proton_mass


def precursor_mz(mass: float, charge: int, masses: MassTable = DEFAULT_MASSES) -> float:
    return (mass + charge * masses.proton_mass) / charge


def _parse_charge(value: str) -> int:
    v = value.strip().split(" ")[0].split(",")[0]
    sign = 1
    if v.endswith("+"):
        v = v[:-1]
    elif v.endswith("-"):
        v, sign = v[:-1], -1
    return sign * int(v)


def parse_mgf(source, masses: MassTable = DEFAULT_MASSES, name=None) -> list[Spectrum]:
    """Parse MGF text into spectra.

    ``source`` may be ``str``, ``bytes`` or a text/binary file object.
    PEPMASS is read as m/z and converted to neutral mass with the block's
    charge. Unknown header keys are ignored.
    """
    if isinstance(source, bytes):
        text = source.decode("ascii")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("ascii")

    spectra = []
    block = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;!/":
            continue
        if line == "BEGIN IONS":
            if block is not None:
                raise ParseError("BEGIN IONS inside an open block (missing END IONS)",
                                 line=lineno, source=name)
            block = {"start": lineno, "peaks": [], "title": None, "pepmass": None, "charge": None}
        elif line == "END IONS":
            if block is None:
                raise ParseError("END IONS without BEGIN IONS", line=lineno, source=name)
            spectra.append(_finish_block(block, lineno, masses, name, len(spectra)))
            block = None
        elif block is None:
            # Global header parameters outside blocks are not used.
            continue
        elif "=" in line and not line[0].isdigit():
            key, value = line.split("=", 1)
            key = key.strip().upper()
            if key == "TITLE":
                block["title"] = value.strip()
            elif key == "PEPMASS":
                try:
                    block["pepmass"] = float(value.split()[0])
                except (ValueError, IndexError):
                    raise ParseError(f"non-numeric PEPMASS {value!r}", line=lineno, source=name) from None
            elif key == "CHARGE":
                try:
                    block["charge"] = _parse_charge(value)
                except ValueError:
                    raise ParseError(f"bad CHARGE {value!r}", line=lineno, source=name) from None
        else:
            parts = line.split()
            try:
                mz, inten = float(parts[0]), float(parts[1])
            except (ValueError, IndexError):
                raise ParseError(f"non-numeric peak line {line!r}", line=lineno, source=name) from None
            if not mz > 0 or not inten >= 0:
                raise ParseError(f"peak out of range {line!r}", line=lineno, source=name)
            block["peaks"].append(Peak(mz, inten))

    if block is not None:
        raise ParseError("missing END IONS", line=block["start"], source=name)
    return spectra


def _finish_block(block, lineno, masses, name, index) -> Spectrum:
    if block["pepmass"] is None:
        raise ParseError("missing PEPMASS", line=block["start"], source=name)
    if not block["peaks"]:
        raise ParseError("empty peak list", line=lineno, source=name)
    charge = block["charge"] if block["charge"] is not None else 1
    if charge < 1:
        raise ParseError(f"unsupported charge {charge}", line=block["start"], source=name)
    title = block["title"] if block["title"] is not None else f"spectrum_{index}"
    mass = neutral_mass(block["pepmass"], charge, masses)
    if not mass > 0:
        raise ParseError("non-positive precursor mass", line=block["start"], source=name)
    peaks = sorted(block["peaks"], key=lambda p: p.mz)
    return Spectrum(title, tuple(peaks), mass, charge)


def read_mgf(path, masses: MassTable = DEFAULT_MASSES) -> list[Spectrum]:
    with open(path, "rb") as fh:
        return parse_mgf(fh, masses, name=str(path))


def format_mgf(spectra: Iterable[Spectrum], masses: MassTable = DEFAULT_MASSES) -> str:
    """Serialize spectra to MGF with 5-decimal floats."""
    buf = io.StringIO()
    for s in spectra:
        buf.write("BEGIN IONS\n")
        buf.write(f"TITLE={s.id}\n")
        buf.write(f"PEPMASS={precursor_mz(s.precursor_mass, s.charge, masses):.5f}\n")
        buf.write(f"CHARGE={s.charge}+\n")
        for p in s.peaks:
            buf.write(f"{p.mz:.5f} {p.intensity:.5f}\n")
        buf.write("END IONS\n\n")
    return buf.getvalue()


def write_mgf(spectra, path, masses: MassTable = DEFAULT_MASSES) -> None:
    Path(path).write_text(format_mgf(spectra, masses), encoding="ascii")


def check_dataset_constraints(s: Spectrum, max_precursor=1150.0, charge=2) -> list[str]:
    """Return reasons ``s`` falls outside the doubly-charged, <=1150 Da dataset shape."""
    problems = []
    if s.charge != charge:
        problems.append(f"charge {s.charge} != {charge}")
    if s.precursor_mass > max_precursor:
        problems.append(f"precursor {s.precursor_mass:.3f} > {max_precursor}")
    return problems
