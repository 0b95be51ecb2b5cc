"""Building-damage mapping from SAR backscatter time series.

Core pipeline: paired time-series feature classification with a random
forest, multi-orbit fusion into per-period probability maps, overlap-
weighted building aggregation, precision-targeted threshold calibration,
and a pixel-wise t-test baseline for comparison. A CLI (``sardamage``) and
a local HTTP assessment service expose the pipeline end to end.
"""

__version__ = "0.1.0"
