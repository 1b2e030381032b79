"""Covariate-adjusted excellence rankings for research institutions.

The engine turns paper-level publication data into per-subject ranking
tables: percentile-based excellence indicators, a random-intercept
binomial logistic model fitted by adaptive Gauss-Hermite maximum
likelihood, Empirical Bayes shrinkage estimates per institution, and
Goldstein-adjusted intervals that make pairwise comparisons honest.
Results are stored as versioned editions and served read-only over HTTP.
"""

__version__ = "0.1.0"
