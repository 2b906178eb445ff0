"""Linear epsilon-tube support vector regression.

Solves min 1/2 ||w||^2 + C sum(xi + xi*) subject to the epsilon-tube
constraints, via SMO-style pairwise ascent on the dual

    max  -1/2 b'Kb + y'b - eps*||b||_1   s.t.  sum(b) = 0, |b_i| <= C

with K the linear-kernel Gram matrix and w = X'b. The first pair index
is the most violating coordinate; its partner maximizes a second-order
gain estimate. Each pair step is an exact 1-D piecewise-quadratic
maximization, so the dual objective never decreases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SolverError


@dataclass
class SvrModel:
    """Fitted linear SVR: f(x) = w.x + b."""

    w: np.ndarray
    b: float
    C: float
    epsilon: float
    slack_upper: np.ndarray  # xi: residual above the tube
    slack_lower: np.ndarray  # xi*: residual below the tube
    dual_coef: np.ndarray
    iterations: int

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.w + self.b

    def primal_objective(self, X, y) -> float:
        resid = np.abs(np.asarray(y, dtype=np.float64) - self.predict(X))
        slack = np.maximum(0.0, resid - self.epsilon)
        return float(0.5 * self.w @ self.w + self.C * slack.sum())


def _up_rate(g: np.ndarray, beta: np.ndarray, eps: float) -> np.ndarray:
    """Directional derivative of the dual when increasing each beta_i."""
    return np.where(beta >= 0, g - eps, g + eps)


def _down_rate(g: np.ndarray, beta: np.ndarray, eps: float) -> np.ndarray:
    """Directional derivative of the dual when decreasing each beta_i."""
    return np.where(beta > 0, -g + eps, -g - eps)


def _pair_step(beta, i, j, gi, gj, qij, C, epsilon):
    """Exact maximizer of the dual gain over delta in [0, hi] for the pair (i, j).

    The L1 penalty kinks at beta_i = 0 and beta_j = 0 split the interval
    into segments on which the gain is an exact quadratic.
    """
    hi = min(C - beta[i], beta[j] + C)
    points = {0.0, hi}
    if beta[i] < 0 < beta[i] + hi:
        points.add(-beta[i])
    if 0 < beta[j] < hi:
        points.add(beta[j])
    pts = sorted(points)
    best_d, best_gain = 0.0, 0.0
    for lo_p, hi_p in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (lo_p + hi_p)
        si = 1.0 if beta[i] + mid >= 0 else -1.0
        sj = 1.0 if beta[j] - mid > 0 else -1.0
        r = (gi - gj) - epsilon * si + epsilon * sj
        if qij > 0:
            d_star = min(max(r / qij, lo_p), hi_p)
        else:
            d_star = hi_p if r > 0 else lo_p
        for d in (d_star, lo_p, hi_p):
            gain = (
                (gi - gj) * d
                - 0.5 * qij * d * d
                - epsilon * (abs(beta[i] + d) - abs(beta[i]))
                - epsilon * (abs(beta[j] - d) - abs(beta[j]))
            )
            if gain > best_gain:
                best_gain, best_d = gain, d
    return best_d, best_gain


def svr_fit(X, y, C: float, epsilon: float, tol: float = 1e-6, max_iter: int = 100_000) -> SvrModel:
    """Fit a linear epsilon-SVR; raises SolverError if the pair loop hits its cap."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ConfigError(f"svr_fit expects X (n,d) and y (n,), got {X.shape} and {y.shape}")
    if C < 0 or epsilon < 0:
        raise ConfigError("C and epsilon must be non-negative")
    n = X.shape[0]
    K = X @ X.T
    Kd = np.diag(K).copy()
    beta = np.zeros(n)
    f = np.zeros(n)  # K @ beta, maintained incrementally
    idx = np.arange(n)

    iterations = 0
    if C > 0 and n >= 2:
        while True:
            g = y - f
            up = _up_rate(g, beta, epsilon)
            dn = _down_rate(g, beta, epsilon)
            up[beta >= C] = -np.inf
            dn[beta <= -C] = -np.inf

            i = int(np.argmax(up))
            dn_j = dn.copy()
            dn_j[i] = -np.inf
            j_v = int(np.argmax(dn_j))
            violation = up[i] + dn_j[j_v]
            # the global max-violating pair may instead pair the best dn with
            # the second-best up when both maxima share an index
            jd = int(np.argmax(dn))
            if jd != j_v:
                up_i = up.copy()
                up_i[jd] = -np.inf
                i2 = int(np.argmax(up_i))
                if np.isfinite(up_i[i2]) and up_i[i2] + dn[jd] > violation:
                    i, j_v, violation = i2, jd, up_i[i2] + dn[jd]
            if not np.isfinite(violation) or violation <= tol:
                break
            if iterations >= max_iter:
                raise SolverError(
                    "SVR dual ascent hit the iteration cap", residual=float(violation)
                )
            iterations += 1

            rate = up[i] + dn
            rate[i] = -np.inf
            candidates = np.isfinite(rate) & (rate > 0)
            if candidates.any():
                q_all = np.maximum(Kd[i] + Kd - 2.0 * K[i], 1e-12)
                gain = np.where(candidates, rate * rate / (2.0 * q_all), -np.inf)
                j = int(np.argmax(gain))
            else:
                j = j_v
            qij = max(Kd[i] + Kd[j] - 2.0 * K[i, j], 0.0)
            best_d, best_gain = _pair_step(beta, i, j, g[i], g[j], qij, C, epsilon)
            if best_d <= 0 and j != j_v:
                j = j_v
                qij = max(Kd[i] + Kd[j] - 2.0 * K[i, j], 0.0)
                best_d, best_gain = _pair_step(beta, i, j, g[i], g[j], qij, C, epsilon)
            if best_d <= 0:
                break
            beta[i] += best_d
            beta[j] -= best_d
            f += best_d * (K[idx, i] - K[idx, j])

    w = X.T @ beta
    fx = X @ w
    b = _solve_bias(y, fx, beta, C, epsilon)
    resid_up = (fx + b) - y
    resid_dn = y - (fx + b)
    slack_up = np.maximum(0.0, resid_up - epsilon)
    slack_dn = np.maximum(0.0, resid_dn - epsilon)
    return SvrModel(w, b, C, epsilon, slack_up, slack_dn, beta, iterations)


def _solve_bias(y, fx, beta, C, epsilon) -> float:
    """Bias from KKT conditions: average over free points, else interval midpoint."""
    margin = 1e-9 * max(1.0, C)
    free_pos = (beta > margin) & (beta < C - margin)
    free_neg = (beta < -margin) & (beta > -C + margin)
    estimates = []
    if free_pos.any():
        estimates.extend(y[free_pos] - fx[free_pos] - epsilon)
    if free_neg.any():
        estimates.extend(y[free_neg] - fx[free_neg] + epsilon)
    if estimates:
        return float(np.mean(estimates))
    lo, hi = -np.inf, np.inf
    for i in range(len(y)):
        center = y[i] - fx[i]
        if abs(beta[i]) <= margin:
            lo = max(lo, center - epsilon)
            hi = min(hi, center + epsilon)
        elif beta[i] >= C - margin:
            hi = min(hi, center - epsilon)
        else:
            lo = max(lo, center + epsilon)
    if not np.isfinite(lo) and not np.isfinite(hi):
        return float(np.mean(y - fx))
    if not np.isfinite(lo):
        return float(hi)
    if not np.isfinite(hi):
        return float(lo)
    return float(0.5 * (lo + hi))
