"""Semantic text transmission toolkit.

Compresses captions to their head words, hardens them with longer in-context
synonyms, adapts them to a receiver's phrasing via few-shot translation, and
transmits them word by word over a simulated 16QAM/AWGN or analytic
per-character channel, with full metrics reporting.
"""

__version__ = "0.1.0"
