"""Offline phase: trip features, logistic model, MLE training, ROC/AUC.

The two features compare a finished trip against the recommendation it was
given at pickup: the fractional excess in distance and in travel time.  A
logistic regression on those two features separates detour trips; the fitted
coefficients then drive the live per-step score with no further training.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FitError, InputError
from .trips import TripRecord, trajectory_distance_km, trajectory_minutes


@dataclass(frozen=True)
class FeatureVector:
    extra_distance_ratio: float  # actual / initially planned distance, minus 1
    extra_time_ratio: float  # actual / initially estimated minutes, minus 1


@dataclass(frozen=True)
class LogitModel:
    intercept: float
    dist_coef: float
    time_coef: float

    def log_odds(self, fv: FeatureVector) -> float:
        """Linear detour score; positive means detour is the likelier class."""
        return self.intercept + self.dist_coef * fv.extra_distance_ratio \
            + self.time_coef * fv.extra_time_ratio

    def detour_probability(self, fv: FeatureVector) -> float:
        theta = self.log_odds(fv)
        if theta >= 0:
            return 1.0 / (1.0 + math.exp(-theta))
        z = math.exp(theta)
        return z / (1.0 + z)


@dataclass(frozen=True)
class TrainReport:
    model: LogitModel
    final_log_likelihood: float
    iterations: int
    converged: bool
    standard_errors: tuple[float, float, float]
    ridge: float
    diagnostics: str | None = None


def offline_features(net, trip: TripRecord) -> FeatureVector:
    """Excess-distance and excess-time ratios of a finished trip."""
    plan = trip.plans[0]
    if plan.distance <= 0.0 or plan.est_time <= 0.0:
        raise InputError(f"trip {trip.trip_id!r}: degenerate initial plan")
    dist = trajectory_distance_km(net, trip.atr)
    minutes = trajectory_minutes(trip.atr)
    return FeatureVector(dist / plan.distance - 1.0, minutes / plan.est_time - 1.0)


def _design(samples) -> tuple[np.ndarray, np.ndarray]:
    X = np.array(
        [[1.0, fv.extra_distance_ratio, fv.extra_time_ratio] for fv, _ in samples]
    )
    y = np.array([float(label) for _, label in samples])
    return X, y


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_likelihood(beta: np.ndarray, X: np.ndarray, y: np.ndarray, ridge: float = 0.0) -> float:
    """Bernoulli log-likelihood of the logistic model, optionally ridged."""
    theta = X @ beta
    ll = float(np.sum(y * theta - _softplus(theta)))
    if ridge:
        ll -= 0.5 * ridge * float(beta @ beta)
    return ll


def log_likelihood_gradient(beta, X, y, ridge: float = 0.0) -> np.ndarray:
    grad = X.T @ (y - _sigmoid(X @ beta))
    if ridge:
        grad = grad - ridge * beta
    return grad


def train(samples, ridge: float = 0.0, tol: float = 1e-8, max_iter: int = 10000) -> TrainReport:
    """Fit the logit model by maximum likelihood.

    Gradient ascent with a backtracking (Armijo) line search; the trial step
    uses the Barzilai-Borwein secant estimate, which keeps this a pure
    gradient method but converges orders of magnitude faster than a fixed
    schedule.  Stops when the gradient infinity-norm drops below ``tol``.
    Standard errors come from the inverse observed information at the
    optimum.  Perfectly separable data with no ridge has no finite
    maximizer; that case is reported with ``converged=False`` and a
    diagnostic instead of an error.
    """
    X, y = _design(samples)
    positives = int(np.sum(y))
    if positives == 0 or positives == len(y):
        raise FitError("training data must contain both classes")

    beta = np.zeros(3)
    ll = log_likelihood(beta, X, y, ridge)
    grad = log_likelihood_gradient(beta, X, y, ridge)
    prev_beta = prev_grad = None
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            converged = True
            iterations -= 1
            break
        if prev_beta is None:
            step = 1.0 / max(1.0, float(np.linalg.norm(grad)))
        else:
            move = beta - prev_beta
            bend = prev_grad - grad
            denom = float(move @ bend)
            step = float(move @ move) / denom if denom > 0 else 1.0
        g2 = float(grad @ grad)
        candidate, cll = beta, ll
        while step > 1e-18:
            candidate = beta + step * grad
            cll = log_likelihood(candidate, X, y, ridge)
            if cll >= ll + 1e-4 * step * g2:
                break
            step *= 0.5
        else:
            break  # no ascent progress at float resolution
        prev_beta, prev_grad = beta, grad
        beta, ll = candidate, cll
        grad = log_likelihood_gradient(beta, X, y, ridge)

    theta = X @ beta
    diagnostics = None
    if ridge == 0.0:
        pos_min = float(np.min(theta[y == 1.0]))
        neg_max = float(np.max(theta[y == 0.0]))
        if pos_min > neg_max:
            converged = False
            diagnostics = (
                "perfect separation: coefficients diverge, the likelihood has no "
                "finite maximizer (consider a small ridge)"
            )
    if float(np.max(np.abs(beta))) > 1e4 and diagnostics is None:
        converged = False
        diagnostics = "coefficients diverging; data may be (near-)separable"

    probs = _sigmoid(theta)
    weights = probs * (1.0 - probs)
    info = X.T @ (X * weights[:, None]) + ridge * np.eye(3)
    try:
        cov = np.linalg.inv(info)
        ses = np.sqrt(np.maximum(np.diag(cov), 0.0))
        if not np.all(np.isfinite(ses)):
            raise np.linalg.LinAlgError
        standard_errors = (float(ses[0]), float(ses[1]), float(ses[2]))
    except np.linalg.LinAlgError:
        standard_errors = (math.inf, math.inf, math.inf)

    return TrainReport(
        model=LogitModel(float(beta[0]), float(beta[1]), float(beta[2])),
        final_log_likelihood=ll,
        iterations=iterations,
        converged=converged,
        standard_errors=standard_errors,
        ridge=ridge,
        diagnostics=diagnostics,
    )


def rank_auc(scores, labels) -> tuple[float, list[tuple[float, float]]]:
    """AUC and ROC points from raw scores, ties grouped.

    Thresholds sweep the distinct score values from high to low; the curve
    always starts at (0, 0) and ends at (1, 1), and the trapezoidal area
    equals the pair-counting (Mann-Whitney) statistic.
    """
    pos = sum(1 for yy in labels if yy)
    neg = len(labels) - pos
    if pos == 0 or neg == 0:
        raise FitError("AUC is undefined without both classes")

    order = sorted(zip(scores, labels), key=lambda sy: -sy[0])
    roc = [(0.0, 0.0)]
    auc = 0.0
    tp = fp = 0
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and order[j][0] == order[i][0]:
            j += 1
        prev_tpr, prev_fpr = tp / pos, fp / neg
        for k in range(i, j):
            if order[k][1]:
                tp += 1
            else:
                fp += 1
        tpr, fpr = tp / pos, fp / neg
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0
        roc.append((fpr, tpr))
        i = j
    return auc, roc


def evaluate_roc_auc(model: LogitModel, samples) -> tuple[float, list[tuple[float, float]]]:
    """Score labeled feature vectors with the model and rank them."""
    scores = [model.log_odds(fv) for fv, _ in samples]
    labels = [label for _, label in samples]
    return rank_auc(scores, labels)


def save_model(model: LogitModel, path, trained_on: int = 0, ridge: float = 0.0) -> None:
    data = {
        "beta0": model.intercept,
        "beta1": model.dist_coef,
        "beta2": model.time_coef,
        "trained_on": trained_on,
        "ridge": ridge,
    }
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path) -> LogitModel:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"model file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
        return LogitModel(float(data["beta0"]), float(data["beta1"]), float(data["beta2"]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed model file {p}: {exc}") from exc
