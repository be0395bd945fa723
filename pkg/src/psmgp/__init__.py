"""Learn a peptide-spectrum-match scoring function with genetic programming
and use it to re-rank de novo sequencing candidates."""

__version__ = "0.1.0"
