"""Transaction analytics for financial-vulnerability profiling.

Pipeline: ingest bank transaction histories, engineer behavioral
features, derive vulnerability indicator labels and protected-attribute
proxies, train and evaluate classifiers out of time, segment accounts,
and audit proxy leakage of protected characteristics.  A built-in
synthetic cohort generator with planted signals makes the whole
pipeline testable end to end.
"""

__version__ = "0.1.0"
