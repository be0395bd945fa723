"""Re-score candidate peptides, pick one per spectrum and count false positives.

A spectrum counts as a true positive only when its top-ranked candidate is
correct and no other candidate shares the top score. Everything else is a
false positive, including spectra whose candidate list holds no correct
peptide at all, so ``tp + fp == n_spectra`` and ``fpr = fp / n_spectra``.

Published reference counts for a 120-spectrum de novo evaluation set. They
come from external tools and data that are not part of this package, so
only their arithmetic is checked here:

>>> ref = REFERENCE_BEFORE
>>> ref["tp"] + ref["missed_targets"] + ref["no_correct_candidate"] == ref["n_spectra"]
True
>>> round((ref["n_spectra"] - ref["tp"]) / ref["n_spectra"], 2) == ref["fpr"]
True
>>> after = REFERENCE_AFTER
>>> after["tp"] + after["fp"] == after["n_spectra"]
True
>>> round(after["fp"] / after["n_spectra"], 2) == after["fpr"]
True
>>> round(ref["fpr"] - after["fpr"], 2) == REFERENCE_FPR_REDUCTION
True
>>> after["missed_targets_recovered"] <= ref["missed_targets"]
True
>>> REFERENCE_RSS["best_train"], REFERENCE_RSS["best_test"]
(0.49, 0.5)
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .errors import ParseError, ValidationError
from .features import FeatureRow, FeatureVector, parse_bool, split_psm_id
from .spectra import Peptide, as_peptide

logger = logging.getLogger(__name__)

REFERENCE_BEFORE = {"n_spectra": 120, "tp": 67, "missed_targets": 25,
                    "no_correct_candidate": 28, "fpr": 0.44}
REFERENCE_AFTER = {"n_spectra": 120, "tp": 79, "fp": 41, "fpr": 0.34,
                   "targets_lost": 8, "missed_targets_recovered": 20}
REFERENCE_FPR_REDUCTION = 0.10
REFERENCE_RSS = {"best_train": 0.49, "best_test": 0.50,
                 "mean_train": 0.55, "sd_train": 0.04, "mean_test": 0.55, "sd_test": 0.03}


@dataclass(frozen=True)
class CandidatePSM:
    spectrum_id: str
    peptide: Peptide
    rank: int
    denovo_score: Optional[float] = None
    is_correct: Optional[bool] = None
    features: Optional[FeatureVector] = None
    new_score: Optional[float] = None


@dataclass(frozen=True)
class CandidateSet:
    spectrum_id: str
    candidates: tuple[CandidatePSM, ...]
    tied: bool = False

    def __post_init__(self):
        cands = tuple(self.candidates)
        object.__setattr__(self, "candidates", cands)
        if not cands:
            raise ValidationError(f"{self.spectrum_id}: empty candidate set")
        if any(c.spectrum_id != self.spectrum_id for c in cands):
            raise ValidationError(f"{self.spectrum_id}: candidates from another spectrum")
        if sum(1 for c in cands if c.is_correct) > 1:
            raise ValidationError(f"{self.spectrum_id}: more than one correct candidate")

    @property
    def top(self) -> CandidatePSM:
        return self.candidates[0]

    @property
    def has_correct(self) -> bool:
        return any(c.is_correct for c in self.candidates)


@dataclass(frozen=True)
class EvaluationReport:
    n_spectra: int
    tp: int
    fp: int
    fpr: float
    missed_targets: int
    no_correct_candidate: int
    tied: int
    missed_targets_recovered: int
    targets_lost: int
    spectrum_ids: tuple = field(default=(), repr=False)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("spectrum_ids")
        return d


@dataclass(frozen=True)
class ReportDelta:
    fpr_before: float
    fpr_after: float
    fpr_reduction_points: float  # percentage points
    tp_before: int
    tp_after: int
    missed_targets_recovered: int
    targets_lost: int


def _score_key(c: CandidatePSM):
    return (-c.new_score, c.rank)


def rescore(model, cs: CandidateSet) -> CandidateSet:
    """Score every candidate with ``model`` and sort best first.

    ``model`` is anything with a ``score(features)`` method or a callable.
    The set is flagged ``tied`` when more than one candidate holds the top
    score (exact equality). De novo scores are not consulted.
    """
    score = getattr(model, "score", model)
    out = []
    for c in cs.candidates:
        if c.features is None:
            raise ValidationError(f"{cs.spectrum_id}: candidate {c.peptide} has no features")
        out.append(replace(c, new_score=float(score(c.features))))
    out.sort(key=_score_key)
    tied = len(out) > 1 and out[0].new_score == out[1].new_score
    return CandidateSet(cs.spectrum_id, tuple(out), tied)


def rescore_all(model, sets: Sequence[CandidateSet], threads: int = 1) -> list[CandidateSet]:
    if threads <= 1:
        return [rescore(model, cs) for cs in sets]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda cs: rescore(model, cs), sets))


def baseline_ranking(cs: CandidateSet) -> CandidateSet:
    """Order by the input rank column, the upstream tool's own ranking."""
    return CandidateSet(cs.spectrum_id, tuple(sorted(cs.candidates, key=lambda c: c.rank)), False)


def _baseline_correct(cs: CandidateSet) -> bool:
    return bool(min(cs.candidates, key=lambda c: c.rank).is_correct)


def compute_fpr(sets: Sequence[CandidateSet]) -> EvaluationReport:
    """Tally a list of ranked candidate sets.

    Transition counts compare against the rank-column ordering of the same
    candidates: ``missed_targets_recovered`` spectra were wrong there and
    are right now, ``targets_lost`` the reverse.
    """
    sets = list(sets)
    if not sets:
        raise ValidationError("no candidate sets to evaluate")
    tp = missed = absent = tied = recovered = lost = 0
    ids = []
    for cs in sets:
        if any(c.is_correct is None for c in cs.candidates):
            raise ValidationError(f"{cs.spectrum_id}: ground truth missing")
        ids.append(cs.spectrum_id)
        ok = bool(cs.top.is_correct) and not cs.tied
        tied += cs.tied
        if ok:
            tp += 1
        elif cs.has_correct:
            missed += 1
        else:
            absent += 1
        was_ok = _baseline_correct(cs)
        if ok and not was_ok:
            recovered += 1
        elif was_ok and not ok:
            lost += 1
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate spectrum ids in evaluation")
    n = len(sets)
    fp = n - tp
    return EvaluationReport(n, tp, fp, fp / n, missed, absent, tied, recovered, lost,
                            tuple(sorted(ids)))


def compare_reports(before: EvaluationReport, after: EvaluationReport) -> ReportDelta:
    if before.spectrum_ids != after.spectrum_ids or before.n_spectra != after.n_spectra:
        raise ValidationError("reports cover different spectra")
    return ReportDelta(
        fpr_before=before.fpr,
        fpr_after=after.fpr,
        fpr_reduction_points=(before.fp - after.fp) * 100.0 / before.n_spectra,
        tp_before=before.tp,
        tp_after=after.tp,
        missed_targets_recovered=after.missed_targets_recovered,
        targets_lost=after.targets_lost,
    )


# --- files -----------------------------------------------------------------

CANDIDATE_HEADER = ("spectrum_id", "rank", "peptide", "denovo_score", "is_correct")
RANKED_HEADER = ("spectrum_id", "rank", "new_rank", "peptide", "new_score", "is_correct", "tied")


def _group(psms: Iterable[CandidatePSM]) -> list[CandidateSet]:
    groups: dict[str, list] = {}
    for c in psms:
        groups.setdefault(c.spectrum_id, []).append(c)
    return [CandidateSet(sid, tuple(sorted(cs, key=lambda c: c.rank))) for sid, cs in groups.items()]


def _read_tsv(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        got = next(reader, None)
        if got is None or tuple(got) != header:
            raise ParseError(f"expected header {' '.join(header)!r}, got {got!r}",
                             line=1, source=str(path))
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} columns, got {len(rec)}",
                                 line=lineno, source=str(path))
            yield lineno, rec


def read_candidates(path) -> list[CandidateSet]:
    psms = []
    for lineno, rec in _read_tsv(path, CANDIDATE_HEADER):
        where = {"line": lineno, "source": str(path)}
        try:
            rank = int(rec[1])
            score = None if rec[3].strip().upper() in ("", "NA") else float(rec[3])
        except ValueError:
            raise ParseError("non-numeric rank or score", **where) from None
        try:
            peptide = as_peptide(rec[2])
        except ValidationError as e:
            raise ParseError(str(e), **where) from None
        psms.append(CandidatePSM(rec[0], peptide, rank, score, parse_bool(rec[4], where)))
    return _group(psms)


def write_candidates(sets: Iterable[CandidateSet], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(CANDIDATE_HEADER)
        for cs in sets:
            for c in sorted(cs.candidates, key=lambda c: c.rank):
                score = "NA" if c.denovo_score is None else f"{c.denovo_score:.6g}"
                correct = "NA" if c.is_correct is None else str(int(c.is_correct))
                w.writerow([c.spectrum_id, c.rank, c.peptide.sequence, score, correct])


def sets_from_feature_rows(rows: Iterable[FeatureRow]) -> list[CandidateSet]:
    psms = []
    for r in rows:
        sid, rank = split_psm_id(r.psm_id)
        psms.append(CandidatePSM(sid, as_peptide(r.peptide), rank, None, r.is_correct, r.features))
    return _group(psms)


def write_ranked(sets: Iterable[CandidateSet], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(RANKED_HEADER)
        for cs in sets:
            for new_rank, c in enumerate(cs.candidates, 1):
                correct = "NA" if c.is_correct is None else str(int(c.is_correct))
                w.writerow([c.spectrum_id, c.rank, new_rank, c.peptide.sequence,
                            repr(float(c.new_score)), correct, int(cs.tied)])


def read_ranked(path) -> list[CandidateSet]:
    """Read a ranked table back into sets ordered by ``new_rank``."""
    psms, tied = [], {}
    for lineno, rec in _read_tsv(path, RANKED_HEADER):
        where = {"line": lineno, "source": str(path)}
        try:
            rank, new_rank, score = int(rec[1]), int(rec[2]), float(rec[4])
        except ValueError:
            raise ParseError("non-numeric rank or score", **where) from None
        psms.append((new_rank, CandidatePSM(rec[0], as_peptide(rec[3]), rank, None,
                                            parse_bool(rec[5], where), None, score)))
        tied[rec[0]] = tied.get(rec[0], False) or bool(parse_bool(rec[6], where))
    groups: dict[str, list] = {}
    for new_rank, c in psms:
        groups.setdefault(c.spectrum_id, []).append((new_rank, c))
    return [CandidateSet(sid, tuple(c for _, c in sorted(items, key=lambda t: t[0])), tied[sid])
            for sid, items in groups.items()]


def evaluate_ranked(sets: Sequence[CandidateSet]) -> tuple[EvaluationReport, EvaluationReport, ReportDelta]:
    """Reports for the rank-column baseline and for the given ordering."""
    before = compute_fpr([baseline_ranking(cs) for cs in sets])
    after = compute_fpr(sets)
    return before, after, compare_reports(before, after)


def report_json(before: EvaluationReport, after: EvaluationReport, delta: ReportDelta) -> str:
    doc = {"before": before.summary(), "after": after.summary(), "delta": asdict(delta)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_table(before: EvaluationReport, after: EvaluationReport, delta: ReportDelta) -> str:
    rows = [
        ("spectra", before.n_spectra, after.n_spectra),
        ("TP", before.tp, after.tp),
        ("FP", before.fp, after.fp),
        ("  correct not first", before.missed_targets, after.missed_targets),
        ("  no correct candidate", before.no_correct_candidate, after.no_correct_candidate),
        ("  tied at top", before.tied, after.tied),
        ("missed targets recovered", "-", after.missed_targets_recovered),
        ("targets lost", "-", after.targets_lost),
        ("FPR", f"{before.fpr:.4f}", f"{after.fpr:.4f}"),
    ]
    width = max(len(r[0]) for r in rows)
    lines = [f"{'':<{width}}  {'before':>8}  {'after':>8}"]
    lines += [f"{name:<{width}}  {str(b):>8}  {str(a):>8}" for name, b, a in rows]
    lines.append(f"FPR reduction: {delta.fpr_reduction_points:.2f} percentage points")
    return "\n".join(lines) + "\n"
