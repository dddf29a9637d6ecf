"""Potential-customer mining toolkit.

Columnar preprocessing, feature engineering, a histogram gradient-boosted
tree classifier, baseline learners, adversarial validation and
positive-unlabeled ranking of top-K candidates.
"""
from ._kernels import BACKEND, get_num_threads, set_num_threads

__version__ = "0.1.0"

__all__ = ["BACKEND", "get_num_threads", "set_num_threads", "__version__"]
