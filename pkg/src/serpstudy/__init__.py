"""User-centered search-engine evaluation harness.

Pipeline: interaction logs -> sessions -> multi-engine result collection
-> anonymized judgment pools -> HTTP judgment service -> provenance
re-join -> retrieval-effectiveness report.
"""

__version__ = "0.1.0"
