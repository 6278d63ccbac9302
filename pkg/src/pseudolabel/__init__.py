"""Agreement-based pseudo-labeling of speech from two ASR experts, plus GLM-aware WER/CER scoring."""

__version__ = "0.1.0"
