"""The 11 spectrum/peptide match-quality features.

====  ============  ==================================================
name  label         meaning
====  ============  ==================================================
f1    I_matched     summed intensity of matched experimental peaks
f2    N_matched     theoretical ions with a peak within tolerance
f3    N_unmatched   theoretical ions without one
f4    delta_mass    abs(precursor mass - peptide mass)
f5    Nterm         consecutive matched b-ions starting at b1
f6    Cterm         consecutive matched y-ions starting at y1
f7    cos           cosine of the fixed-length binned vectors
f8    euc           distance between the L2-normalised binned vectors
f9    hamming       bins occupied in exactly one binned vector
f10   seq_fix       SEQUEST-style normalised dot product, fixed length
f11   seq_var       same, length ceil(precursor mass / tolerance)
====  ============  ==================================================
"""

from __future__ import annotations

import bisect
import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .spectra import DEFAULT_MASSES, MassTable, Peak, Spectrum, as_peptide, peptide_mass
from .theo import Ion, TheoreticalSpectrum, generate_theoretical

logger = logging.getLogger(__name__)

FEATURE_NAMES = tuple(f"f{i}" for i in range(1, 12))
FEATURE_LABELS = ("I_matched", "N_matched", "N_unmatched", "delta_mass", "Nterm", "Cterm",
                  "cos", "euc", "hamming", "seq_fix", "seq_var")


@dataclass(frozen=True)
class FeatureConfig:
    tolerance: float = 0.5
    n_bins: int = 4000
    bin_width: float = 0.5
    sequest_windows: int = 10
    sequest_window_max: float = 50.0
    sequest_noise_floor: float = 0.01

    def __post_init__(self):
        if not self.tolerance > 0 or not self.bin_width > 0:
            raise ValidationError("tolerance and bin width must be positive")
        if self.n_bins < 1 or self.sequest_windows < 1:
            raise ValidationError("n_bins and sequest_windows must be >= 1")
        if not 0 <= self.sequest_noise_floor < 1:
            raise ValidationError("sequest_noise_floor must be in [0, 1)")


@dataclass(frozen=True)
class MatchResult:
    matched: tuple[tuple[Ion, Peak], ...]
    unmatched_theoretical: tuple[Ion, ...]
    tolerance: float
    peak_indices: tuple[int, ...] = ()  # experimental index of each matched pair

    @property
    def matched_ions(self) -> set[tuple[str, int]]:
        return {(ion.series, ion.index) for ion, _ in self.matched}


@dataclass
class BinnedVector:
    bins: np.ndarray
    bin_width: float
    dropped: int = 0

    @property
    def length(self) -> int:
        return len(self.bins)


@dataclass(frozen=True)
class FeatureVector:
    f1: float
    f2: float
    f3: float
    f4: float
    f5: float
    f6: float
    f7: float
    f8: float
    f9: float
    f10: float
    f11: float
    target: Optional[float] = None

    @property
    def values(self) -> tuple[float, ...]:
        return (self.f1, self.f2, self.f3, self.f4, self.f5, self.f6,
                self.f7, self.f8, self.f9, self.f10, self.f11)

    @classmethod
    def from_values(cls, values: Sequence[float], target=None) -> "FeatureVector":
        if len(values) != 11:
            raise ValidationError(f"expected 11 feature values, got {len(values)}")
        return cls(*(float(v) for v in values), target=target)

    def with_target(self, target) -> "FeatureVector":
        return FeatureVector.from_values(self.values, target)


def feature_matrix(vectors: Iterable[FeatureVector]) -> np.ndarray:
    return np.array([v.values for v in vectors], dtype=float).reshape(-1, 11)


def match_peaks(s: Spectrum, t: TheoreticalSpectrum, tolerance: float = 0.5) -> MatchResult:
    """Pair each theoretical ion with its nearest experimental peak within ``tolerance``.

    Equidistant peaks resolve to the lower m/z one.
    """
    if not tolerance > 0:
        raise ValidationError("tolerance must be positive")
    mzs = [p.mz for p in s.peaks]
    matched, unmatched, indices = [], [], []
    for ion in t.ions:
        lo = bisect.bisect_left(mzs, ion.mz - tolerance)
        best, best_d = None, math.inf
        for j in range(lo, len(mzs)):
            d = abs(mzs[j] - ion.mz)
            if mzs[j] > ion.mz + tolerance:
                break
            # strict < keeps the first (lowest m/z) of equidistant peaks
            if d <= tolerance and d < best_d:
                best, best_d = j, d
        if best is None:
            unmatched.append(ion)
        else:
            matched.append((ion, s.peaks[best]))
            indices.append(best)
    return MatchResult(tuple(matched), tuple(unmatched), tolerance, tuple(indices))


def bin_spectrum(s, n_bins: int = 4000, bin_width: float = 0.5) -> BinnedVector:
    """Vectorise a spectrum into ``n_bins`` bins of ``bin_width`` Da.

    Experimental bins hold summed intensity; theoretical bins hold 1.
    Peaks at or past ``n_bins * bin_width`` are dropped and counted.
    """
    if isinstance(s, TheoreticalSpectrum):
        mz = np.array([ion.mz for ion in s.ions], dtype=float)
        weight = None
    elif isinstance(s, Spectrum):
        mz = np.array(s.mz, dtype=float)
        weight = np.array(s.intensity, dtype=float)
    else:
        mz = np.asarray([p[0] for p in s], dtype=float)
        weight = np.asarray([p[1] for p in s], dtype=float)
    return _bin_arrays(mz, weight, n_bins, bin_width)


def _bin_arrays(mz, weight, n_bins, bin_width) -> BinnedVector:
    bins = np.zeros(n_bins)
    idx = np.floor(mz / bin_width).astype(np.int64) if len(mz) else np.zeros(0, np.int64)
    keep = (idx >= 0) & (idx < n_bins)
    dropped = int(len(idx) - keep.sum())
    if dropped:
        logger.debug("dropped %d peaks outside [0, %g)", dropped, n_bins * bin_width)
    if weight is None:
        bins[idx[keep]] = 1.0
    else:
        np.add.at(bins, idx[keep], weight[keep])
    return BinnedVector(bins, bin_width, dropped)


def _raw(v):
    return v.bins if isinstance(v, BinnedVector) else np.asarray(v, dtype=float)


def cosine_feature(vs, vt) -> float:
    """Normalised dot product in [0, 1]; 0 when either vector is empty."""
    a, b = _raw(vs), _raw(vt)
    if len(a) != len(b):
        raise ValidationError(f"binned vector lengths differ: {len(a)} vs {len(b)}")
    na2, nb2 = float(np.dot(a, a)), float(np.dot(b, b))
    if na2 == 0 or nb2 == 0:
        return 0.0
    # sqrt of the product keeps identical vectors at exactly 1.0
    return min(1.0, max(0.0, float(np.dot(a, b)) / math.sqrt(na2 * nb2)))


def euclidean_feature(vs, vt) -> float:
    """Distance between the unit-normalised vectors. A zero vector is left
    as is, so one empty side scores 1.0 and two empty sides 0.0."""
    a, b = _raw(vs), _raw(vt)
    if len(a) != len(b):
        raise ValidationError(f"binned vector lengths differ: {len(a)} vs {len(b)}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na > 0:
        a = a / na
    if nb > 0:
        b = b / nb
    return float(np.linalg.norm(a - b))


def hamming_feature(vs, vt) -> int:
    a, b = _raw(vs), _raw(vt)
    if len(a) != len(b):
        raise ValidationError(f"binned vector lengths differ: {len(a)} vs {len(b)}")
    return int(np.count_nonzero((a != 0) ^ (b != 0)))


def sequest_preprocess(s: Spectrum, windows=10, window_max=50.0, noise_floor=0.01):
    """Square-root intensities, scale each of ``windows`` equal m/z windows
    over [0, max m/z] to peak at ``window_max``, then drop peaks under
    ``noise_floor`` times the global maximum.

    Returns ``(mz, intensity)`` arrays.
    """
    mz = np.array(s.mz, dtype=float)
    inten = np.sqrt(np.array(s.intensity, dtype=float))
    if len(mz) == 0:
        return mz, inten
    width = mz.max() / windows
    region = np.minimum((mz / width).astype(np.int64), windows - 1)
    out = np.zeros_like(inten)
    for r in range(windows):
        sel = region == r
        if not sel.any():
            continue
        top = inten[sel].max()
        if top > 0:
            out[sel] = inten[sel] * (window_max / top)
    gmax = out.max()
    keep = out >= noise_floor * gmax if gmax > 0 else np.zeros(len(out), bool)
    return mz[keep], out[keep]


def sequest_features(s: Spectrum, t: TheoreticalSpectrum,
                     cfg: FeatureConfig = FeatureConfig()) -> tuple[float, float]:
    """Return (fixed-length, variable-length) SEQUEST-style scores."""
    mz, inten = sequest_preprocess(s, cfg.sequest_windows, cfg.sequest_window_max,
                                   cfg.sequest_noise_floor)
    theo_mz = np.array([ion.mz for ion in t.ions], dtype=float)
    fixed = cosine_feature(_bin_arrays(mz, inten, cfg.n_bins, cfg.bin_width),
                           _bin_arrays(theo_mz, None, cfg.n_bins, cfg.bin_width))
    n_var = variable_length(s.precursor_mass, cfg.tolerance)
    var = cosine_feature(_bin_arrays(mz, inten, n_var, cfg.tolerance),
                         _bin_arrays(theo_mz, None, n_var, cfg.tolerance))
    return fixed, var


def variable_length(precursor_mass: float, tolerance: float = 0.5) -> int:
    return max(1, math.ceil(precursor_mass / tolerance))


def _leading_run(indices: set[int], n: int) -> int:
    k = 0
    while k + 1 <= n and (k + 1) in indices:
        k += 1
    return k


def extract_features(s: Spectrum, p, cfg: FeatureConfig = FeatureConfig(),
                     masses: MassTable = DEFAULT_MASSES, target=None) -> FeatureVector:
    p = as_peptide(p)
    t = generate_theoretical(p, masses)
    m = match_peaks(s, t, cfg.tolerance)
    # each experimental peak contributes once even if it matches several ions
    f1 = float(sum(s.peaks[j].intensity for j in set(m.peak_indices)))
    f2 = len(m.matched)
    f3 = len(m.unmatched_theoretical)
    f4 = abs(s.precursor_mass - peptide_mass(p, masses))
    hit_b = {ion.index for ion, _ in m.matched if ion.series == "b"}
    hit_y = {ion.index for ion, _ in m.matched if ion.series == "y"}
    n = len(p) - 1
    f5 = _leading_run(hit_b, n)
    f6 = _leading_run(hit_y, n)

    vs = bin_spectrum(s, cfg.n_bins, cfg.bin_width)
    vt = bin_spectrum(t, cfg.n_bins, cfg.bin_width)
    f7 = cosine_feature(vs, vt)
    f8 = euclidean_feature(vs, vt)
    f9 = hamming_feature(vs, vt)
    f10, f11 = sequest_features(s, t, cfg)
    return FeatureVector(f1, f2, f3, f4, f5, f6, f7, f8, f9, f10, f11, target=target)


def extract_many(pairs: Sequence[tuple[Spectrum, object]], cfg: FeatureConfig = FeatureConfig(),
                 masses: MassTable = DEFAULT_MASSES, threads: int = 1) -> list[FeatureVector]:
    """Extract features for ``(spectrum, peptide)`` pairs, preserving order."""
    work = lambda sp: extract_features(sp[0], sp[1], cfg, masses)  # noqa: E731
    if threads <= 1:
        return [work(sp) for sp in pairs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(work, pairs))


# --- feature table (TSV) --------------------------------------------------

@dataclass(frozen=True)
class FeatureRow:
    psm_id: str
    peptide: str
    features: FeatureVector
    is_correct: Optional[bool] = None

    @property
    def spectrum_id(self) -> str:
        return split_psm_id(self.psm_id)[0]

    @property
    def rank(self) -> int:
        return split_psm_id(self.psm_id)[1]


def make_psm_id(spectrum_id: str, rank: int) -> str:
    return f"{spectrum_id}:{rank}"


def split_psm_id(psm_id: str) -> tuple[str, int]:
    sid, _, rank = psm_id.rpartition(":")
    try:
        return sid, int(rank)
    except ValueError:
        raise ValidationError(f"psm_id {psm_id!r} is not of the form <spectrum_id>:<rank>") from None


FEATURE_HEADER = ("psm_id", "peptide") + FEATURE_NAMES + ("target", "is_correct")


def _fmt(x) -> str:
    return "NA" if x is None else f"{x:.6g}"


def _fmt_bool(b) -> str:
    return "NA" if b is None else str(int(bool(b)))


def write_feature_table(rows: Iterable[FeatureRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(FEATURE_HEADER)
        for r in rows:
            w.writerow([r.psm_id, r.peptide, *(_fmt(v) for v in r.features.values),
                        _fmt(r.features.target), _fmt_bool(r.is_correct)])


def parse_bool(value: str, where=None) -> Optional[bool]:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "t", "y"):
        return True
    if v in ("0", "false", "no", "f", "n"):
        return False
    if v in ("", "na", "nan", "none"):
        return None
    raise ParseError(f"not a boolean: {value!r}", **(where or {}))


def read_feature_table(path) -> list[FeatureRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(header) != FEATURE_HEADER:
            raise ParseError(f"unexpected feature table header {header!r}", line=1, source=str(path))
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            if len(rec) != len(FEATURE_HEADER):
                raise ParseError(f"expected {len(FEATURE_HEADER)} columns, got {len(rec)}",
                                 line=lineno, source=str(path))
            try:
                vals = [float(v) for v in rec[2:13]]
                target = None if rec[13].strip().upper() in ("NA", "") else float(rec[13])
            except ValueError:
                raise ParseError("non-numeric feature value", line=lineno, source=str(path)) from None
            is_correct = parse_bool(rec[14], {"line": lineno, "source": str(path)})
            rows.append(FeatureRow(rec[0], rec[1], FeatureVector.from_values(vals, target), is_correct))
    return rows

