"""Feature selection: correlation filter, PSO-ELM and GA-ELM wrappers,
recursive elimination around a linear SVR, and Lasso-based embedded
selection. Every selector emits a 62-bit mask with exactly ``k`` bits
set (k = 30 by default).

Wrapper fitness is the validation MSE of an extreme learning machine
whose hidden layer is drawn once per run and frozen: only the output
weights are re-fitted per candidate subset. Selectors must only ever see
the training window of the enclosing experiment; the wrappers re-split
that window 80/20 chronologically for their internal fitness data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataio import FEATURE_IDS
from .errors import ConfigError, DegenerateStatisticsError
from .numkernel import RngState, least_squares, sigmoid
from .svr import SvrModel, svr_fit

N_FEATURES = 62
DEFAULT_K = 30


@dataclass(frozen=True)
class FeatureMask:
    """Boolean selection over the 62-feature catalog plus per-feature scores."""

    bits: tuple[bool, ...]
    method: str
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.bits) != N_FEATURES:
            raise ConfigError(f"mask must cover {N_FEATURES} features, got {len(self.bits)}")
        if self.scores is not None and len(self.scores) != N_FEATURES:
            raise ConfigError("scores must align with the feature catalog")

    @property
    def popcount(self) -> int:
        return sum(self.bits)

    def indices(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.bits))

    def selected_names(self) -> list[str]:
        return [FEATURE_IDS[i] for i in self.indices()]

    def to_json(self) -> str:
        payload = {
            "method": self.method,
            "selected": self.selected_names(),
        }
        if self.scores is not None:
            payload["scores"] = {FEATURE_IDS[i]: self.scores[i] for i in range(N_FEATURES)}
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FeatureMask":
        payload = json.loads(text)
        chosen = set(payload["selected"])
        bits = tuple(fid in chosen for fid in FEATURE_IDS)
        scores = None
        if "scores" in payload:
            scores = tuple(float(payload["scores"][fid]) for fid in FEATURE_IDS)
        return cls(bits, payload["method"], scores)


def masks_to_table_text(masks: list[FeatureMask]) -> str:
    """Checkmark table, one row per feature and one column per mask."""
    header = "Feature  " + "  ".join(f"{m.method:>8}" for m in masks)
    lines = [header, "-" * len(header)]
    for i, fid in enumerate(FEATURE_IDS):
        cells = "  ".join(f"{('x' if m.bits[i] else '.'):>8}" for m in masks)
        lines.append(f"{fid:<7}  {cells}")
    return "\n".join(lines) + "\n"


def _top_k_mask(scores: np.ndarray, k: int) -> tuple[bool, ...]:
    """Highest-score k features; ties resolved toward the lower feature index."""
    order = np.argsort(-scores, kind="stable")
    chosen = set(order[:k].tolist())
    return tuple(i in chosen for i in range(len(scores)))


def pearson_correlations(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Correlation of each column with the target; constant columns score 0."""
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sy = np.sqrt((yc**2).sum())
    if sy == 0:
        raise DegenerateStatisticsError("target is constant; correlations undefined")
    sx = np.sqrt((Xc**2).sum(axis=0))
    rho = np.zeros(X.shape[1])
    ok = sx > 0
    rho[ok] = (Xc[:, ok] * yc[:, None]).sum(axis=0) / (sx[ok] * sy)
    return rho


def pearson_select(X: np.ndarray, y: np.ndarray, k: int = DEFAULT_K) -> FeatureMask:
    """Filter selection: top-k features by absolute correlation with the target."""
    if len(y) < 2:
        raise ConfigError("need at least two rows")
    rho = pearson_correlations(np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.float64))
    return FeatureMask(_top_k_mask(np.abs(rho), k), "pc", tuple(rho))


class ElmModel:
    """Single-hidden-layer network with a frozen random hidden layer.

    Hidden weights and biases are drawn once at construction and never
    change; output weights are least-squares fitted per feature subset,
    which makes candidate evaluation cheap inside the wrappers.
    """

    def __init__(self, n_features: int, hidden: int, rng: RngState, activation: str = "sigmoid"):
        self.n_features = n_features
        self.hidden = hidden
        self.activation = activation
        self.w_in = rng.uniform(-1.0, 1.0, size=(n_features, hidden))
        self.bias = rng.uniform(-1.0, 1.0, size=hidden)

    def _hidden(self, X: np.ndarray, idx: np.ndarray) -> np.ndarray:
        pre = X[:, idx] @ self.w_in[idx, :] + self.bias
        return sigmoid(pre) if self.activation == "sigmoid" else np.tanh(pre)

    def fit_output(self, X: np.ndarray, y: np.ndarray, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=int)
        if idx.size == 0:
            raise ConfigError("candidate subset selects no features")
        return least_squares(self._hidden(X, idx), y)

    def predict(self, X: np.ndarray, idx, w_out: np.ndarray) -> np.ndarray:
        return self._hidden(X, np.asarray(idx, dtype=int)) @ w_out


def elm_fit(X, y, idx, hidden: int, rng: RngState) -> tuple[ElmModel, np.ndarray]:
    """Convenience one-shot ELM fit; returns the model and output weights."""
    model = ElmModel(np.asarray(X).shape[1], hidden, rng)
    return model, model.fit_output(np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.float64), idx)


def elm_eval(model: ElmModel, w_out: np.ndarray, idx, X, y) -> float:
    pred = model.predict(np.asarray(X, dtype=np.float64), idx, w_out)
    return float(np.mean((pred - np.asarray(y, dtype=np.float64)) ** 2))


def _chronological_fitness_split(X, y, fraction: float = 0.8):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    cut = int(len(y) * fraction)
    if cut < 1 or cut >= len(y):
        raise ConfigError(f"cannot split {len(y)} rows {fraction:.0%}/{1 - fraction:.0%}")
    return X[:cut], y[:cut], X[cut:], y[cut:]


def make_elm_fitness(X, y, hidden: int, rng: RngState):
    """Fitness closure: validation MSE of the frozen-hidden-layer ELM on a subset."""
    X_tr, y_tr, X_val, y_val = _chronological_fitness_split(X, y)
    model = ElmModel(X_tr.shape[1], hidden, rng)

    def fitness(bits: np.ndarray) -> float:
        idx = np.flatnonzero(bits)
        w_out = model.fit_output(X_tr, y_tr, idx)
        return elm_eval(model, w_out, idx, X_val, y_val)

    return fitness


def repair_cardinality_by_score(bits: np.ndarray, scores: np.ndarray, k: int) -> np.ndarray:
    """Force popcount to k, keeping the best-scored set bits / adding best unset ones."""
    bits = bits.astype(bool).copy()
    n_on = int(bits.sum())
    if n_on > k:
        on = np.flatnonzero(bits)
        drop = on[np.argsort(scores[on], kind="stable")[: n_on - k]]
        bits[drop] = False
    elif n_on < k:
        off = np.flatnonzero(~bits)
        add = off[np.argsort(-scores[off], kind="stable")[: k - n_on]]
        bits[add] = True
    return bits


def repair_cardinality_random(bits: np.ndarray, k: int, rng: RngState) -> np.ndarray:
    """Force popcount to k by randomly dropping set bits / adding unset ones."""
    bits = bits.astype(bool).copy()
    n_on = int(bits.sum())
    if n_on > k:
        on = np.flatnonzero(bits)
        drop = rng.choice(len(on), size=n_on - k, replace=False)
        bits[on[drop]] = False
    elif n_on < k:
        off = np.flatnonzero(~bits)
        add = rng.choice(len(off), size=k - n_on, replace=False)
        bits[off[add]] = True
    return bits


@dataclass(frozen=True)
class PsoConfig:
    """Swarm configuration; fitness is minimized.

    Defaults follow the applied configuration (c1 0.5, c2 0.3, inertia
    0.7, 10000 iterations); the oracle suite uses stronger attraction
    constants when exact recovery of a planted optimum is required.
    """

    c1: float = 0.5
    c2: float = 0.3
    inertia: float = 0.7
    iterations: int = 10_000
    particles: int = 20
    k: int = DEFAULT_K
    elm_hidden: int = 50
    init_span: float = 4.0
    velocity_clamp: float = 6.0
    stop_at_fitness: float | None = None


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_fitness: float
    best_payload: object
    history: list[float] = field(default_factory=list)


def pso_optimize(objective, dim: int, rng: RngState, config: PsoConfig) -> PsoResult:
    """Continuous particle swarm minimization.

    ``objective(position, rng) -> (fitness, payload)``; the payload of
    the best evaluation ever seen is returned alongside its position.
    Velocities blend inertia with attraction toward each particle's own
    best and the swarm's best position.
    """
    n = config.particles
    pos = rng.uniform(-config.init_span, config.init_span, size=(n, dim))
    vel = np.zeros((n, dim))
    pbest_pos = pos.copy()
    pbest_fit = np.full(n, np.inf)
    gbest_pos = pos[0].copy()
    gbest_fit = np.inf
    gbest_payload = None
    history = []

    for _ in range(config.iterations):
        for p in range(n):
            fit, payload = objective(pos[p], rng)
            if fit < pbest_fit[p]:
                pbest_fit[p] = fit
                pbest_pos[p] = pos[p].copy()
            if fit < gbest_fit:
                gbest_fit = fit
                gbest_pos = pos[p].copy()
                gbest_payload = payload
        history.append(gbest_fit)
        if config.stop_at_fitness is not None and gbest_fit <= config.stop_at_fitness:
            break
        r1 = rng.uniform(size=(n, dim))
        r2 = rng.uniform(size=(n, dim))
        vel = (
            config.inertia * vel
            + config.c1 * r1 * (pbest_pos - pos)
            + config.c2 * r2 * (gbest_pos - pos)
        )
        pos = pos + vel
    return PsoResult(gbest_pos, gbest_fit, gbest_payload, history)


@dataclass
class BinaryPsoResult:
    best_bits: np.ndarray
    best_fitness: float
    best_probabilities: np.ndarray
    history: list[float] = field(default_factory=list)


def binary_pso(fitness, dim: int, rng: RngState, config: PsoConfig) -> BinaryPsoResult:
    """Binary PSO: velocities follow the inertia/personal/global update over
    bit positions; each bit then switches on when a fresh uniform draw
    falls below sigmoid(velocity), and the candidate is repaired to
    exactly k bits keeping the highest per-bit scores (the sigmoid
    probabilities). Best-ever fitness is therefore non-increasing.
    """
    n, k = config.particles, config.k
    vel = rng.uniform(-1.0, 1.0, size=(n, dim))
    pos = np.empty((n, dim), dtype=bool)
    for p in range(n):
        probs = sigmoid(vel[p])
        pos[p] = repair_cardinality_by_score(rng.uniform(size=dim) < probs, probs, k)
    pbest = pos.copy()
    pbest_fit = np.array([fitness(pos[p]) for p in range(n)])
    g = int(np.argmin(pbest_fit))
    gbest = pos[g].copy()
    gbest_fit = float(pbest_fit[g])
    gbest_probs = sigmoid(vel[g])
    history = [gbest_fit]

    clamp = config.velocity_clamp
    for _ in range(config.iterations):
        if config.stop_at_fitness is not None and gbest_fit <= config.stop_at_fitness:
            break
        r1 = rng.uniform(size=(n, dim))
        r2 = rng.uniform(size=(n, dim))
        vel = (
            config.inertia * vel
            + config.c1 * r1 * (pbest.astype(float) - pos.astype(float))
            + config.c2 * r2 * (gbest.astype(float) - pos.astype(float))
        )
        vel = np.clip(vel, -clamp, clamp)
        for p in range(n):
            probs = sigmoid(vel[p])
            pos[p] = repair_cardinality_by_score(rng.uniform(size=dim) < probs, probs, k)
            fit = fitness(pos[p])
            if fit < pbest_fit[p]:
                pbest_fit[p] = fit
                pbest[p] = pos[p].copy()
            if fit < gbest_fit:
                gbest_fit = float(fit)
                gbest = pos[p].copy()
                gbest_probs = probs.copy()
        history.append(gbest_fit)
    return BinaryPsoResult(gbest, gbest_fit, gbest_probs, history)


def pso_select(
    X,
    y,
    rng: RngState,
    config: PsoConfig = PsoConfig(),
    fitness=None,
) -> FeatureMask:
    """Wrapper selection by binary PSO over ELM validation error.

    Pass ``fitness`` to substitute the evaluation (the oracle suite
    plants rigged optima this way).
    """
    if fitness is None:
        fitness = make_elm_fitness(X, y, config.elm_hidden, rng.child(0))
    result = binary_pso(fitness, N_FEATURES, rng.child(1), config)
    scores = tuple(float(s) for s in result.best_probabilities)
    return FeatureMask(tuple(bool(b) for b in result.best_bits), "pso-elm", scores)


@dataclass(frozen=True)
class GaConfig:
    """Applied genetic-algorithm configuration; fitness (MSE) is minimized.

    ``mutation_rate`` is per chromosome: with that probability one
    uniformly chosen bit flips.
    """

    crossover_rate: float = 0.5
    mutation_rate: float = 0.2
    population: int = 100
    generations: int = 10_000
    k: int = DEFAULT_K
    pool_size: int = 20
    elm_hidden: int = 50
    stop_at_fitness: float | None = None


@dataclass
class GaResult:
    best_bits: np.ndarray
    best_fitness: float
    history: list[float] = field(default_factory=list)


def ga_evolve(fitness, rng: RngState, config: GaConfig) -> GaResult:
    """Genetic search with an elitist mating pool.

    Each generation is evaluated; its best individual replaces the
    pool's worst when strictly better, so the pool's best fitness is
    non-increasing. Children come from pool parents via single-point
    crossover and per-chromosome single-bit mutation, then cardinality
    repair. Returns the best pool member.
    """
    r = rng
    pop_n = config.population
    pool_n = min(config.pool_size, pop_n)

    population = []
    for _ in range(pop_n):
        bits = r.uniform(size=N_FEATURES) < 0.5
        population.append(repair_cardinality_random(bits, config.k, r))
    fits = np.array([fitness(ind) for ind in population])

    order = np.argsort(fits, kind="stable")
    pool = [population[i].copy() for i in order[:pool_n]]
    pool_fits = [float(fits[i]) for i in order[:pool_n]]
    history = [min(pool_fits)]

    for _ in range(config.generations):
        if config.stop_at_fitness is not None and min(pool_fits) <= config.stop_at_fitness:
            break
        children = []
        while len(children) < pop_n:
            pa = pool[int(r.integers(0, pool_n))]
            pb = pool[int(r.integers(0, pool_n))]
            if r.uniform() < config.crossover_rate:
                point = int(r.integers(1, N_FEATURES))
                ca = np.concatenate([pa[:point], pb[point:]])
                cb = np.concatenate([pb[:point], pa[point:]])
            else:
                ca, cb = pa.copy(), pb.copy()
            for child in (ca, cb):
                if r.uniform() < config.mutation_rate:
                    flip = int(r.integers(0, N_FEATURES))
                    child[flip] = ~child[flip]
                children.append(repair_cardinality_random(child, config.k, r))
        population = children[:pop_n]
        fits = np.array([fitness(ind) for ind in population])
        best_idx = int(np.argmin(fits))
        worst_pool = int(np.argmax(pool_fits))
        if fits[best_idx] < pool_fits[worst_pool]:
            pool[worst_pool] = population[best_idx].copy()
            pool_fits[worst_pool] = float(fits[best_idx])
        history.append(min(pool_fits))

    best = int(np.argmin(pool_fits))
    return GaResult(pool[best].copy(), pool_fits[best], history)


def ga_select(
    X,
    y,
    rng: RngState,
    config: GaConfig = GaConfig(),
    fitness=None,
) -> FeatureMask:
    """Wrapper selection by a genetic algorithm over ELM validation error."""
    if fitness is None:
        fitness = make_elm_fitness(X, y, config.elm_hidden, rng.child(0))
    result = ga_evolve(fitness, rng.child(1), config)
    return FeatureMask(tuple(bool(b) for b in result.best_bits), "ga-elm", None)


def rfe_svr_select(
    X,
    y,
    k: int = DEFAULT_K,
    drop_per_round: int = 1,
    C: float = 1.0,
    epsilon: float = 0.1,
    tol: float = 1e-6,
) -> tuple[FeatureMask, list[int]]:
    """Recursive feature elimination around a linear SVR.

    Repeatedly fits the SVR on the surviving features and drops the
    ``drop_per_round`` features with the smallest |w|, stopping when k
    remain. Returns the mask and the elimination order (feature indices,
    first eliminated first); scores encode elimination rank, survivors
    highest by final |w|.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n_feat = X.shape[1]
    if not 1 <= k <= n_feat:
        raise ConfigError(f"k must be in [1, {n_feat}]")
    if drop_per_round < 1:
        raise ConfigError("drop_per_round must be >= 1")
    surviving = list(range(n_feat))
    eliminated: list[int] = []
    final_w = None
    while len(surviving) > k:
        model = svr_fit(X[:, surviving], y, C=C, epsilon=epsilon, tol=tol)
        importance = np.abs(model.w)
        n_drop = min(drop_per_round, len(surviving) - k)
        order = np.argsort(importance, kind="stable")
        to_drop = sorted(order[:n_drop].tolist())
        for local in reversed(to_drop):
            eliminated.append(surviving[local])
        for local in reversed(to_drop):
            surviving.pop(local)
    model = svr_fit(X[:, surviving], y, C=C, epsilon=epsilon, tol=tol)
    final_w = np.abs(model.w)

    scores = np.zeros(n_feat)
    for rank, feat in enumerate(eliminated):
        scores[feat] = rank  # earlier eliminated -> lower score
    base = len(eliminated)
    surv_order = np.argsort(final_w, kind="stable")
    for rank, local in enumerate(surv_order):
        scores[surviving[local]] = base + rank
    bits = tuple(i in set(surviving) for i in range(n_feat))
    return FeatureMask(bits, "rfe-svr", tuple(float(s) for s in scores)), eliminated


def soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def lasso_coordinate_descent(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    beta0: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Minimize sum((y - X b)^2) + lam * sum(|b|) by cyclic coordinate descent."""
    n, d = X.shape
    beta = np.zeros(d) if beta0 is None else beta0.copy()
    col_sq = (X**2).sum(axis=0)
    resid = y - X @ beta
    for _ in range(max_iter):
        max_change = 0.0
        for j in range(d):
            if col_sq[j] == 0:
                continue
            old = beta[j]
            rho = X[:, j] @ resid + col_sq[j] * old
            new = soft_threshold(rho, lam / 2.0) / col_sq[j]
            if new != old:
                resid += X[:, j] * (old - new)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < tol:
            break
    return beta


def lasso_select(
    X,
    y,
    lam: float = 0.02,
    k: int = DEFAULT_K,
) -> FeatureMask:
    """Embedded selection: top-k coefficients of a standardized-input Lasso.

    Inputs are centered and scaled to unit variance (the penalty is only
    meaningful under a fixed scaling), the target is centered. If fewer
    than k coefficients are nonzero at ``lam``, the mask is padded with
    the strongest newcomers from smaller penalties down the path.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd_safe = np.where(sd > 0, sd, 1.0)
    Xs = (X - mu) / sd_safe
    yc = y - y.mean()

    beta = lasso_coordinate_descent(Xs, yc, lam)
    scores = np.abs(beta)
    nonzero = scores > 0
    if nonzero.sum() >= k:
        mask_bits = _top_k_mask(scores, k)
        return FeatureMask(mask_bits, "lasso", tuple(beta))

    # walk the path toward smaller penalties to recruit the missing features
    chosen = set(np.flatnonzero(nonzero).tolist())
    path_scores = scores.copy()
    current = lam if lam > 0 else 1.0
    warm = beta
    while len(chosen) < k and current > 1e-12:
        current /= 2.0
        warm = lasso_coordinate_descent(Xs, yc, current, beta0=warm)
        entrants = [
            (abs(warm[j]), j)
            for j in range(X.shape[1])
            if j not in chosen and warm[j] != 0.0
        ]
        entrants.sort(key=lambda t: (-t[0], t[1]))
        for mag, j in entrants:
            if len(chosen) >= k:
                break
            chosen.add(j)
            path_scores[j] = mag
    if len(chosen) < k:  # degenerate data; fall back to OLS magnitudes
        ols = lasso_coordinate_descent(Xs, yc, 0.0, beta0=warm)
        for j in np.argsort(-np.abs(ols), kind="stable"):
            if len(chosen) >= k:
                break
            chosen.add(int(j))
            path_scores[j] = abs(ols[j])
    bits = tuple(i in chosen for i in range(X.shape[1]))
    return FeatureMask(bits, "lasso", tuple(float(s) for s in path_scores))


SELECTORS = ("pc", "pso-elm", "ga-elm", "rfe-svr", "lasso")
