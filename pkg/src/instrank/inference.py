"""Derived statistics on fitted models.

Variance Wald tests, intraclass correlation, explained cluster variance,
Goldstein-adjusted and conventional confidence intervals, joint Wald
F tests on coefficient blocks, deviance and BIC, and the model-summary
export used by reports.

The interval multiplier 1.39 makes pairwise comparison by interval
overlap an approximate 5% test between two estimates with similar
standard errors; 1.96 gives the conventional per-estimate 95% interval.
"""
from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import expit
from scipy.stats import f as f_dist
from scipy.stats import norm

from .errors import DegenerateTestError, UndefinedInputError, ValidationError
from .glmm import FitResult

__all__ = [
    "LOGISTIC_RESIDUAL_VARIANCE",
    "GOLDSTEIN_MULTIPLIER",
    "CONVENTIONAL_MULTIPLIER",
    "IntervalEstimate",
    "wald_variance_test",
    "icc",
    "r2_explained",
    "confidence_interval",
    "joint_wald_test",
    "deviance_bic",
    "model_summary",
    "format_summary_text",
]

#: residual variance of the standard logistic distribution, pi^2 / 3.
#: Stored at full precision; conventionally displayed as 3.29.
LOGISTIC_RESIDUAL_VARIANCE = math.pi * math.pi / 3.0

#: interval half-width multiplier calibrated for pairwise overlap tests
GOLDSTEIN_MULTIPLIER = 1.39
#: conventional 95% multiplier
CONVENTIONAL_MULTIPLIER = 1.96


@dataclass(frozen=True)
class IntervalEstimate:
    """A center with lower/upper bounds on a named scale."""

    center: float
    lower: float
    upper: float
    multiplier: float
    scale: str

    def __post_init__(self):
        if self.scale not in ("logit", "probability"):
            raise ValidationError(f"unknown scale {self.scale!r}")
        if not (self.lower <= self.center <= self.upper):
            raise ValidationError("interval bounds must bracket the center")
        if self.scale == "probability" and not (0.0 <= self.lower and self.upper <= 1.0):
            raise ValidationError("probability-scale bounds must lie in [0, 1]")

    def overlaps(self, other: "IntervalEstimate") -> bool:
        if self.scale != other.scale:
            raise ValidationError("cannot compare intervals on different scales")
        return self.lower <= other.upper and other.lower <= self.upper

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "lower": self.lower,
            "upper": self.upper,
            "multiplier": self.multiplier,
            "scale": self.scale,
        }


def wald_variance_test(fit: FitResult) -> tuple[float, float]:
    """One-sided Wald test of the cluster variance against zero.

    Returns (z, p) with z = sigma2 / se(sigma2) and p the upper normal
    tail. A boundary fit (sigma2 = 0) is reported as z = 0, p = 0.5.
    """
    if not fit.converged:
        raise ValidationError("wald_variance_test requires a converged fit")
    if fit.sigma2_u == 0.0:
        return 0.0, 0.5
    se = fit.sigma2_se
    if se == 0.0:
        raise DegenerateTestError("variance standard error is 0")
    z = fit.sigma2_u / se
    return float(z), float(norm.sf(z))


def icc(sigma2: float) -> float:
    """Intraclass correlation sigma2 / (pi^2/3 + sigma2)."""
    if sigma2 < 0:
        raise ValidationError("sigma2 must be >= 0")
    return float(sigma2 / (LOGISTIC_RESIDUAL_VARIANCE + sigma2))


def r2_explained(sigma2_null, sigma2_cov):
    """Proportional reduction in cluster variance, (null - cov) / null.

    Exact on rational inputs (int or Fraction in, Fraction out); may be
    negative when the covariate model has the larger variance.
    """
    if sigma2_null < 0 or sigma2_cov < 0:
        raise ValidationError("variances must be >= 0")
    if sigma2_null == 0:
        raise UndefinedInputError("r2_explained is undefined for a zero null variance")
    if isinstance(sigma2_null, numbers.Rational) and isinstance(sigma2_cov, numbers.Rational):
        return (Fraction(sigma2_null) - Fraction(sigma2_cov)) / Fraction(sigma2_null)
    return (sigma2_null - sigma2_cov) / sigma2_null


def confidence_interval(
    center: float, se: float, multiplier: float, scale: str = "logit"
) -> IntervalEstimate:
    """Symmetric logit-scale interval, optionally mapped to probabilities.

    The probability scale applies the logistic to the center and both
    bounds; the result is no longer symmetric but preserves order.
    """
    if se < 0:
        raise ValidationError("se must be >= 0")
    if multiplier <= 0:
        raise ValidationError("multiplier must be positive")
    lo, hi = center - multiplier * se, center + multiplier * se
    if scale == "logit":
        return IntervalEstimate(center, lo, hi, multiplier, "logit")
    if scale == "probability":
        return IntervalEstimate(
            float(expit(center)), float(expit(lo)), float(expit(hi)), multiplier, "probability"
        )
    raise ValidationError(f"unknown scale {scale!r}")


def joint_wald_test(fit: FitResult, coefficient_indices) -> tuple[float, int, int, float]:
    """Joint Wald F test that the selected coefficients are all zero.

    Returns (F, df1, df2, p): F is the Wald chi-square b'V^-1 b divided
    by the number of coefficients tested, df2 = n_papers - rank of the
    fixed design.
    """
    idx = list(coefficient_indices)
    if not idx:
        raise ValidationError("coefficient_indices must be non-empty")
    k = len(fit.beta)
    if any(i < 0 or i >= k for i in idx):
        raise ValidationError(f"coefficient indices must be in [0, {k})")
    b = fit.beta[idx]
    sub = fit.covariance[np.ix_(idx, idx)]
    try:
        solved = np.linalg.solve(sub, b)
    except np.linalg.LinAlgError:
        raise DegenerateTestError("singular coefficient sub-covariance") from None
    q = len(idx)
    stat = float(b @ solved)
    if stat < 0:
        raise DegenerateTestError("sub-covariance is not positive definite")
    f_stat = stat / q
    df2 = fit.n_papers - k
    if df2 <= 0:
        raise DegenerateTestError("non-positive denominator degrees of freedom")
    return f_stat, q, df2, float(f_dist.sf(f_stat, q, df2))


def deviance_bic(fit: FitResult) -> tuple[float, float]:
    """Deviance -2*loglik and BIC with a per-cluster sample-size penalty.

    The parameter count is len(beta) + 1 for the variance; the BIC
    sample size is the number of clusters.
    """
    if not fit.converged:
        raise ValidationError("deviance_bic requires a converged fit")
    deviance = -2.0 * fit.log_likelihood
    k = len(fit.beta) + 1
    return float(deviance), float(deviance + k * math.log(fit.n_clusters))


def _coefficient_blocks(columns) -> dict[str, list[int]]:
    # named blocks for joint tests: subject main effects, interactions,
    # and each standalone non-intercept column by its own name
    blocks: dict[str, list[int]] = {}
    for i, name in enumerate(columns):
        if name == "intercept":
            continue
        if name.startswith("subject[") and "*" in name:
            blocks.setdefault("subject_interactions", []).append(i)
        elif name.startswith("subject["):
            blocks.setdefault("subject_main_effects", []).append(i)
        else:
            blocks.setdefault(name, []).append(i)
    return blocks


def model_summary(fits: dict[str, FitResult], null_model: str | None = None) -> dict:
    """Comparable per-model summary across a family of fits.

    ``fits`` maps a model label to its result; ``null_model`` names the
    variance baseline for the explained-variance column (defaults to
    the first label). Produces a JSON-ready dict: per model the labeled
    coefficients with 95% intervals, the variance with its Wald test,
    ICC, explained variance versus the null, deviance, BIC, and joint
    F tests on the named coefficient blocks.
    """
    if not fits:
        raise ValidationError("model_summary needs at least one fit")
    labels = list(fits)
    if null_model is None:
        null_model = labels[0]
    if null_model not in fits:
        raise ValidationError(f"null model {null_model!r} not among the fits")
    sigma2_null = fits[null_model].sigma2_u

    models = []
    for label in labels:
        fit = fits[label]
        ses = fit.beta_se()
        coefficients = [
            {
                "name": name,
                "estimate": float(est),
                "se": float(se),
                "ci95": [float(est - CONVENTIONAL_MULTIPLIER * se),
                         float(est + CONVENTIONAL_MULTIPLIER * se)],
            }
            for name, est, se in zip(fit.columns, fit.beta, ses)
        ]
        if fit.sigma2_u == 0.0:
            var_z, var_p = 0.0, 0.5
        else:
            var_z, var_p = wald_variance_test(fit)
        deviance, bic = deviance_bic(fit)
        f_tests = []
        for block, idx in _coefficient_blocks(fit.columns).items():
            try:
                f_stat, df1, df2, p = joint_wald_test(fit, idx)
            except DegenerateTestError:
                continue
            f_tests.append(
                {"block": block, "f": f_stat, "df1": df1, "df2": df2, "p": p}
            )
        entry = {
            "model": label,
            "coefficients": coefficients,
            "sigma2": float(fit.sigma2_u),
            "sigma2_se": fit.sigma2_se,
            "sigma2_wald_z": var_z,
            "sigma2_wald_p": var_p,
            "icc": icc(fit.sigma2_u),
            "deviance": deviance,
            "bic": bic,
            "f_tests": f_tests,
            "n_clusters": fit.n_clusters,
            "n_papers": fit.n_papers,
            "converged": fit.converged,
            "boundary": fit.boundary,
        }
        if label != null_model and sigma2_null > 0:
            entry["r2_vs_null"] = float(r2_explained(sigma2_null, fit.sigma2_u))
        models.append(entry)
    return {"null_model": null_model, "models": models}


def format_summary_text(summary: dict) -> str:
    """Tab-delimited rendering of a model_summary dict, one row per model."""
    header = [
        "model", "coefficients", "sigma2", "sigma2_se", "wald_z", "wald_p",
        "icc", "r2_vs_null", "deviance", "bic", "f_tests",
    ]
    lines = ["\t".join(header)]
    for m in summary["models"]:
        coef = "; ".join(
            f"{c['name']}={c['estimate']:.4g} [{c['ci95'][0]:.4g}, {c['ci95'][1]:.4g}]"
            for c in m["coefficients"]
        )
        ftxt = "; ".join(
            f"{t['block']}: F({t['df1']},{t['df2']})={t['f']:.3g}, p={t['p']:.3g}"
            for t in m["f_tests"]
        )
        r2 = m.get("r2_vs_null")
        lines.append("\t".join([
            m["model"], coef, f"{m['sigma2']:.6g}", f"{m['sigma2_se']:.6g}",
            f"{m['sigma2_wald_z']:.6g}", f"{m['sigma2_wald_p']:.6g}",
            f"{m['icc']:.6g}", "" if r2 is None else f"{r2:.6g}",
            f"{m['deviance']:.6g}", f"{m['bic']:.6g}", ftxt,
        ]))
    return "\n".join(lines) + "\n"
