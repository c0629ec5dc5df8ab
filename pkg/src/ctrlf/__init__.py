"""Segmentation-free word spotting for scanned manuscript pages.

Pipeline: region proposals (connected-component based), a trainable
embedding of proposal patches into a word-embedding space (DCToW or
PHOC), cosine-ranked query-by-string / query-by-example search, and a
retrieval evaluation harness (AP/MAP, recall, transcription-only AP).
"""

__version__ = "0.1.0"
