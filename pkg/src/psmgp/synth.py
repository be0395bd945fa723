"""Synthetic spectra, candidate lists and planted target scores.

Experimental spectra are the b/y ladder of a random peptide with dropout,
m/z jitter, random intensities and uniform noise peaks. Candidate lists hold
the true peptide plus decoys that differ by one transposition or one
substitution with a residue of nearby mass, so decoys look much like the
truth. Targets stand in for database-search scores: a planted expression of
the true peptide's features plus Gaussian noise.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ValidationError
from .features import FeatureConfig, FeatureVector, extract_features
from .gp.tree import ExpressionTree
from .rerank import CandidatePSM, CandidateSet, write_candidates
from .spectra import (AMINO_ACIDS, DEFAULT_MASSES, MassTable, Peptide, Spectrum, neutral_mass,
                      peptide_mass, precursor_mz, write_mgf)
from .theo import generate_theoretical

logger = logging.getLogger(__name__)

DEFAULT_PLANTED = "(add (mul 3.0 f2) f7)"
TARGET_HEADER = ("spectrum_id", "peptide", "target")


@dataclass(frozen=True)
class SynthSpec:
    n_spectra: int = 1000
    peptide_length_range: tuple = (7, 12)
    charge: int = 2
    max_precursor: float = 1150.0
    noise_peaks_per_spectrum: int = 10
    peak_dropout_rate: float = 0.15
    mz_jitter_sd: float = 0.05
    intensity_spread: float = 0.8   # ion intensities ~ U[1 - spread, 1]
    noise_intensity_max: float = 0.3
    n_candidates: int = 5
    planted: str = DEFAULT_PLANTED
    target_noise_sd: float = 1.0
    merge_width: float = 0.5        # ions closer than one bin become one peak
    seed: int = 0

    def __post_init__(self):
        lo, hi = (int(x) for x in self.peptide_length_range)
        object.__setattr__(self, "peptide_length_range", (lo, hi))
        if lo < 2 or lo > hi:
            raise ValidationError(f"peptide length range {self.peptide_length_range} is empty or < 2")
        if self.n_spectra < 0:
            raise ValidationError("n_spectra must be >= 0")
        if self.charge < 1:
            raise ValidationError("charge must be >= 1")
        if self.n_candidates < 1:
            raise ValidationError("n_candidates must be >= 1")
        for name in ("peak_dropout_rate", "intensity_spread"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1]")
        if self.peak_dropout_rate == 1.0 and self.noise_peaks_per_spectrum == 0:
            raise ValidationError("dropout 1 without noise peaks leaves spectra empty")
        if self.noise_peaks_per_spectrum < 0 or self.mz_jitter_sd < 0 or self.target_noise_sd < 0:
            raise ValidationError("noise settings must be non-negative")
        if not self.noise_intensity_max >= 0 or not self.merge_width > 0:
            raise ValidationError("noise_intensity_max >= 0 and merge_width > 0 required")
        ExpressionTree.from_sexpr(self.planted)
        lightest = min(DEFAULT_MASSES.residue_mass.values())
        if lo * lightest + DEFAULT_MASSES.water_mass > self.max_precursor:
            raise ValidationError(f"no peptide of length >= {lo} fits under {self.max_precursor} Da")


@dataclass
class SynthDataset:
    spec: SynthSpec
    spectra: list[Spectrum]
    candidates: list[CandidateSet]
    true_peptides: dict[str, Peptide]
    true_features: dict[str, FeatureVector] = field(default_factory=dict)
    targets: dict[str, float] = field(default_factory=dict)


def _canonical(seq: str) -> str:
    # I/L share a mass and K/Q sit inside the fragment tolerance
    return seq.replace("I", "L").replace("Q", "K")


def _random_peptide(rng, spec: SynthSpec, masses: MassTable) -> Peptide:
    lo, hi = spec.peptide_length_range
    table = np.array([masses.residue_mass[a] for a in AMINO_ACIDS])
    lengths = list(range(lo, hi + 1))
    for _ in range(50):
        n = int(rng.choice(lengths))
        draws = rng.integers(0, len(AMINO_ACIDS), size=(512, n))
        mass = table[draws].sum(axis=1) + masses.water_mass
        ok = np.flatnonzero(mass <= spec.max_precursor)
        if len(ok):
            return Peptide("".join(AMINO_ACIDS[k] for k in draws[ok[0]]))
        lengths = [m for m in lengths if m < n] or lengths[:1]
    raise ValidationError("could not draw a peptide within the mass limit")


def _nearby_residues(aa: str, masses: MassTable, k=3, min_delta=1.0) -> list[str]:
    m = masses.residue_mass[aa]
    others = [(abs(masses.residue_mass[b] - m), b) for b in AMINO_ACIDS
              if abs(masses.residue_mass[b] - m) > min_delta]
    others.sort()
    return [b for _, b in others[:k]]


def make_decoys(true: Peptide, n: int, rng, masses: MassTable = DEFAULT_MASSES) -> list[Peptide]:
    """``n`` distinct one-edit variants of ``true`` that stay distinguishable."""
    seq = true.sequence
    seen = {_canonical(seq)}
    out = []
    for _ in range(2000):
        if len(out) == n:
            break
        s = list(seq)
        if rng.random() < 0.5:
            i, j = sorted(int(x) for x in rng.choice(len(s), size=2, replace=False))
            s[i], s[j] = s[j], s[i]
        else:
            i = int(rng.integers(len(s)))
            s[i] = str(rng.choice(_nearby_residues(s[i], masses)))
        cand = "".join(s)
        key = _canonical(cand)
        if key not in seen:
            seen.add(key)
            out.append(Peptide(cand))
    if len(out) < n:
        raise ValidationError(f"could not build {n} distinct decoys for {seq}")
    return out


def synth_spectrum(sid: str, p: Peptide, spec: SynthSpec, rng,
                   masses: MassTable = DEFAULT_MASSES) -> Spectrum:
    t = generate_theoretical(p, masses)
    seen_bins = set()
    ion_mz = []
    for mz in sorted(ion.mz for ion in t.ions):
        b = int(mz // spec.merge_width)
        if b not in seen_bins:
            seen_bins.add(b)
            ion_mz.append(mz)
    ion_mz = np.array(ion_mz)
    keep = rng.random(len(ion_mz)) >= spec.peak_dropout_rate
    ion_mz = ion_mz[keep]
    if spec.mz_jitter_sd > 0:
        ion_mz = ion_mz + rng.normal(0.0, spec.mz_jitter_sd, len(ion_mz))
    ion_int = rng.uniform(1.0 - spec.intensity_spread, 1.0, len(ion_mz))

    mass = peptide_mass(p, masses)
    k = spec.noise_peaks_per_spectrum
    noise_mz = rng.uniform(50.0, max(mass, 60.0), k)
    noise_int = rng.uniform(0.0, spec.noise_intensity_max, k)

    mz = np.round(np.concatenate([ion_mz, noise_mz]), 5)
    inten = np.round(np.concatenate([ion_int, noise_int]), 5)
    peaks = [(float(a), float(b)) for a, b in zip(mz, inten) if a > 0]
    if not peaks:
        # every ion dropped and no noise requested: keep one ion so the spectrum is valid
        peaks = [(round(float(t.ions[0].mz), 5), 1.0)]
    # store the mass exactly as an MGF round trip would report it
    pep_mz = round(precursor_mz(mass, spec.charge, masses), 5)
    return Spectrum.build(sid, peaks, neutral_mass(pep_mz, spec.charge, masses), spec.charge)


def generate_dataset(spec: SynthSpec, rng: Optional[np.random.Generator] = None,
                     cfg: FeatureConfig = FeatureConfig(),
                     masses: MassTable = DEFAULT_MASSES, prefix: str = "synth") -> SynthDataset:
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    planted = ExpressionTree.from_sexpr(spec.planted)
    ds = SynthDataset(spec, [], [], {})
    for i in range(spec.n_spectra):
        sid = f"{prefix}_{i:05d}"
        true = _random_peptide(rng, spec, masses)
        s = synth_spectrum(sid, true, spec, rng, masses)
        peptides = [true] + make_decoys(true, spec.n_candidates - 1, rng, masses)
        order = rng.permutation(len(peptides))
        scores = np.sort(np.round(rng.uniform(0, 100, len(peptides)), 1))[::-1]
        cands = []
        for rank, k in enumerate(order, 1):
            cands.append(CandidatePSM(sid, peptides[k], rank, float(scores[rank - 1]), bool(k == 0)))
        fv = extract_features(s, true, cfg, masses)
        target = planted(fv)
        if spec.target_noise_sd > 0:
            target += float(rng.normal(0.0, spec.target_noise_sd))
        ds.spectra.append(s)
        ds.candidates.append(CandidateSet(sid, tuple(cands)))
        ds.true_peptides[sid] = true
        ds.true_features[sid] = fv.with_target(target)
        ds.targets[sid] = target
    return ds


def write_targets(ds: SynthDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(TARGET_HEADER)
        for sid, p in ds.true_peptides.items():
            w.writerow([sid, p.sequence, repr(float(ds.targets[sid]))])


def write_dataset(ds: SynthDataset, out_dir, prefix: str, masses: MassTable = DEFAULT_MASSES) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "mgf": out / f"{prefix}.mgf",
        "candidates": out / f"{prefix}_candidates.tsv",
        "targets": out / f"{prefix}_targets.tsv",
    }
    write_mgf(ds.spectra, paths["mgf"], masses)
    write_candidates(ds.candidates, paths["candidates"])
    write_targets(ds, paths["targets"])
    return paths
