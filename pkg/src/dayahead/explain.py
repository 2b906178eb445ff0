"""Shapley-value feature attribution for black-box regressors.

Absent features are imputed interventionally: the model is averaged
over background rows with the absent coordinates replaced. kernel_shap
solves the coalition-weighted least squares with the efficiency
constraint eliminated into the system, so attributions plus the base
value reproduce the prediction exactly. exact_shapley enumerates all
coalitions and serves as the validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .errors import ConfigError, FeasibilityError, SchemaError, SolverError
from .numkernel import RngState
from .svr import SvrModel, svr_fit


@dataclass
class ShapExplanation:
    values: np.ndarray  # per-feature attribution
    base: float  # expected model output over the background
    instance: np.ndarray
    n_background: int

    def total(self) -> float:
        return float(self.values.sum() + self.base)


def _coalition_value(predict_fn, instance, background, mask_bits) -> float:
    """Average model output with absent features drawn from the background."""
    data = background.copy()
    data[:, mask_bits] = instance[mask_bits]
    return float(np.mean(predict_fn(data)))


def _shapley_kernel_weight(d: int, s: int) -> float:
    return (d - 1) / (comb(d, s) * s * (d - s))


def _prepare(instance, background):
    instance = np.asarray(instance, dtype=np.float64).ravel()
    background = np.asarray(background, dtype=np.float64)
    if background.ndim != 2 or background.shape[1] != instance.size:
        raise ConfigError(
            f"background {background.shape} does not match instance of {instance.size} features"
        )
    if len(background) == 0:
        raise ConfigError("background set must be nonempty")
    return instance, background


def kernel_shap(
    predict_fn,
    instance,
    background,
    n_coalitions: int | None = None,
    rng: RngState | None = None,
) -> ShapExplanation:
    """Kernel-weighted regression approximation of Shapley values.

    All 2^d - 2 proper coalitions are enumerated whenever the budget
    allows (at which point the result equals exact Shapley values);
    otherwise coalitions are sampled from the kernel's size
    distribution. The full and empty coalitions are always included via
    the efficiency constraint.
    """
    instance, background = _prepare(instance, background)
    d = instance.size
    if d < 1:
        raise ConfigError("nothing to explain without features")
    if n_coalitions is None:
        n_coalitions = min(2**d - 2, 2048)
    floor = min(d + 2, max(2**d - 2, 1))
    if n_coalitions < floor:
        raise ConfigError(f"need at least {floor} coalitions, got {n_coalitions}")

    base = _coalition_value(predict_fn, instance, background, np.zeros(d, dtype=bool))
    full = _coalition_value(predict_fn, instance, background, np.ones(d, dtype=bool))
    delta = full - base
    if d == 1:
        return ShapExplanation(np.array([delta]), base, instance, len(background))

    total = 2**d - 2
    if total <= n_coalitions:
        masks = np.zeros((total, d), dtype=bool)
        weights = np.empty(total)
        row = 0
        for code in range(1, 2**d - 1):
            bits = np.array([(code >> j) & 1 for j in range(d)], dtype=bool)
            masks[row] = bits
            weights[row] = _shapley_kernel_weight(d, int(bits.sum()))
            row += 1
    else:
        if rng is None:
            rng = RngState(0)
        masks, weights = _sample_coalitions(d, n_coalitions, rng)

    values = _solve_weighted(predict_fn, instance, background, masks, weights, base, delta)
    if values is None:  # singular system: try once more with a doubled sample
        if rng is None:
            rng = RngState(0)
        masks2, weights2 = _sample_coalitions(d, min(2 * n_coalitions, 2**d - 2), rng)
        masks = np.vstack([masks, masks2])
        weights = np.concatenate([weights, weights2])
        values = _solve_weighted(predict_fn, instance, background, masks, weights, base, delta)
        if values is None:
            raise SolverError("kernel SHAP weighting system is singular")
    return ShapExplanation(values, base, instance, len(background))


def _sample_coalitions(d: int, budget: int, rng: RngState):
    sizes = np.arange(1, d)
    size_mass = np.array([_shapley_kernel_weight(d, int(s)) * comb(d, int(s)) for s in sizes])
    size_prob = size_mass / size_mass.sum()
    masks = np.zeros((budget, d), dtype=bool)
    cum = np.cumsum(size_prob)
    for i in range(budget):
        s = int(sizes[np.searchsorted(cum, rng.uniform())])
        idx = rng.choice(d, size=s, replace=False)
        masks[i, idx] = True
    weights = np.ones(budget)  # kernel encoded in the sampling distribution
    return masks, weights


def _solve_weighted(predict_fn, instance, background, masks, weights, base, delta):
    """Weighted least squares with the efficiency constraint eliminated.

    The last feature's attribution is delta - sum(others), which removes
    one unknown and guarantees efficiency by construction.
    """
    d = masks.shape[1]
    targets = np.array(
        [_coalition_value(predict_fn, instance, background, m) for m in masks]
    ) - base
    z = masks.astype(np.float64)
    y_adj = targets - z[:, -1] * delta
    design = z[:, :-1] - z[:, -1:]
    sw = np.sqrt(weights)
    A = design * sw[:, None]
    b = y_adj * sw
    gram = A.T @ A
    if np.linalg.matrix_rank(gram) < d - 1:
        return None
    phi_head = np.linalg.solve(gram, A.T @ b)
    phi = np.empty(d)
    phi[:-1] = phi_head
    phi[-1] = delta - phi_head.sum()
    return phi


def exact_shapley(predict_fn, instance, background, max_features: int = 15) -> ShapExplanation:
    """Classical Shapley values by full subset enumeration (d <= 15)."""
    instance, background = _prepare(instance, background)
    d = instance.size
    if d > max_features:
        raise FeasibilityError(f"exact enumeration infeasible for d = {d} > {max_features}")
    values_cache = np.empty(2**d)
    for code in range(2**d):
        bits = np.array([(code >> j) & 1 for j in range(d)], dtype=bool)
        values_cache[code] = _coalition_value(predict_fn, instance, background, bits)
    fact = [factorial(i) for i in range(d + 1)]
    phi = np.zeros(d)
    for j in range(d):
        bit_j = 1 << j
        for code in range(2**d):
            if code & bit_j:
                continue
            s = bin(code).count("1")
            weight = fact[s] * fact[d - s - 1] / fact[d]
            phi[j] += weight * (values_cache[code | bit_j] - values_cache[code])
    base = values_cache[0]
    return ShapExplanation(phi, base, instance, len(background))


def importance_ranking(explanations: list[ShapExplanation]) -> list[tuple[int, float]]:
    """Features sorted by mean |attribution| descending; ties keep index order."""
    if not explanations:
        raise ConfigError("need at least one explanation")
    mags = np.mean(np.abs(np.stack([e.values for e in explanations])), axis=0)
    order = np.argsort(-mags, kind="stable")
    return [(int(j), float(mags[j])) for j in order]


def dependence_export(
    explanations: list[ShapExplanation],
    feature: int,
    interaction_feature: int | None = None,
) -> dict:
    """Rows of (feature value, attribution, interaction value) per instance.

    The interaction partner defaults to the feature whose values
    correlate most (in absolute value) with this feature's attributions
    across the explained instances.
    """
    if not explanations:
        raise ConfigError("need at least one explanation")
    d = explanations[0].values.size
    if not 0 <= feature < d:
        raise SchemaError(f"feature index {feature} outside 0..{d - 1}")
    inst = np.stack([e.instance for e in explanations])
    phi = np.array([e.values[feature] for e in explanations])
    if interaction_feature is None:
        best, best_corr = (feature + 1) % d, -1.0
        for m in range(d):
            if m == feature:
                continue
            x = inst[:, m]
            if x.std() == 0 or phi.std() == 0:
                corr = 0.0
            else:
                corr = abs(float(np.corrcoef(x, phi)[0, 1]))
            if corr > best_corr:
                best, best_corr = m, corr
        interaction_feature = best
    elif not 0 <= interaction_feature < d:
        raise SchemaError(f"interaction feature index {interaction_feature} outside 0..{d - 1}")
    rows = [
        (float(inst[i, feature]), float(phi[i]), float(inst[i, interaction_feature]))
        for i in range(len(explanations))
    ]
    return {"feature": feature, "interaction_feature": interaction_feature, "rows": rows}


DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)
DEFAULT_EPS_GRID = (0.01, 0.1, 0.5)


def fit_surrogate_svr(
    X,
    y,
    c_grid=DEFAULT_C_GRID,
    eps_grid=DEFAULT_EPS_GRID,
    val_fraction: float = 0.2,
    tol: float = 1e-5,
    max_iter: int = 1_000_000,
) -> tuple[SvrModel, dict]:
    """Grid-search a linear SVR on a chronological 80/20 split of the
    given training rows; returns the best model and the search record.

    The tight-tube large-C corner of the grid needs far more pair steps
    than a single production fit, hence the raised iteration cap.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    cut = int(len(y) * (1 - val_fraction))
    if cut < 1 or cut >= len(y):
        raise ConfigError(f"cannot carve a validation block from {len(y)} rows")
    best = None
    trace = []
    for C in c_grid:
        for eps in eps_grid:
            model = svr_fit(X[:cut], y[:cut], C=C, epsilon=eps, tol=tol, max_iter=max_iter)
            val_mse = float(np.mean((model.predict(X[cut:]) - y[cut:]) ** 2))
            trace.append({"C": C, "epsilon": eps, "val_mse": val_mse})
            if best is None or val_mse < best[0]:
                best = (val_mse, model, {"C": C, "epsilon": eps})
    assert best is not None
    return best[1], {"chosen": best[2], "val_mse": best[0], "trace": trace}


def sample_background(X, size: int, rng: RngState) -> np.ndarray:
    """Uniform background sample (without replacement when possible)."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise ConfigError("cannot sample a background from no rows")
    take = min(size, len(X))
    idx = rng.choice(len(X), size=take, replace=False)
    return X[np.sort(idx)].copy()
