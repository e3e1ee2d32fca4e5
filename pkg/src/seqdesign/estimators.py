"""ATE estimators and the variance functional they are judged by.

The workhorse model is a per-interval linear specification: within each day,
outcome Y_m is linear in the observation and the action, and the next
observation is linear in the current observation and action. Fitting it by
per-interval OLS yields a plug-in ATE that accounts for carryover through the
chained transition matrices. The doubly robust estimator and its exact
variance functional exist to exercise the optimal-allocation theory on small
enumerable processes.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import ACTION_MINUS, ACTION_PLUS, DesignPolicy, History, PanelData, Trajectory


@dataclass(frozen=True)
class LinearModelParams:
    """Per-interval coefficients of the linear outcome/transition model.

    Reward equation (intervals m = 1..M):
        Y_m = reward_intercept[m] + reward_obs[m] @ O_m + reward_effect[m] * A_m + noise
    Transition equation (source intervals m = 1..M-1):
        O_{m+1} = trans_intercept[m] + trans_matrix[m] @ O_m + trans_effect[m] * A_m + noise
    """

    reward_intercept: np.ndarray  # (M,)
    reward_obs: np.ndarray        # (M, d)
    reward_effect: np.ndarray     # (M,)
    trans_intercept: np.ndarray   # (M-1, d)
    trans_matrix: np.ndarray      # (M-1, d, d)
    trans_effect: np.ndarray      # (M-1, d)

    def __post_init__(self):
        for name in ("reward_intercept", "reward_obs", "reward_effect",
                     "trans_intercept", "trans_matrix", "trans_effect"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        m = self.reward_intercept.shape[0]
        d = self.reward_obs.shape[1]
        expected = {
            "reward_obs": (m, d),
            "reward_effect": (m,),
            "trans_intercept": (max(m - 1, 0), d),
            "trans_matrix": (max(m - 1, 0), d, d),
            "trans_effect": (max(m - 1, 0), d),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in expected:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def n_intervals(self) -> int:
        return self.reward_intercept.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.reward_obs.shape[1]

    @staticmethod
    def stationary(
        n_intervals: int,
        reward_intercept: float,
        reward_obs: Sequence[float],
        reward_effect: float,
        trans_intercept: Sequence[float],
        trans_matrix: Sequence[Sequence[float]],
        trans_effect: Sequence[float],
    ) -> "LinearModelParams":
        """Repeat one set of coefficients across all intervals."""
        m = n_intervals
        beta = np.asarray(reward_obs, dtype=float)
        d = beta.shape[0]
        return LinearModelParams(
            reward_intercept=np.full(m, float(reward_intercept)),
            reward_obs=np.tile(beta, (m, 1)),
            reward_effect=np.full(m, float(reward_effect)),
            trans_intercept=np.tile(np.asarray(trans_intercept, float), (m - 1, 1)),
            trans_matrix=np.tile(np.asarray(trans_matrix, float).reshape(1, d, d), (m - 1, 1, 1)),
            trans_effect=np.tile(np.asarray(trans_effect, float), (m - 1, 1)),
        )

    def to_json(self) -> str:
        payload = {
            "reward_intercept": self.reward_intercept.tolist(),
            "reward_obs": self.reward_obs.tolist(),
            "reward_effect": self.reward_effect.tolist(),
            "trans_intercept": self.trans_intercept.tolist(),
            "trans_matrix": self.trans_matrix.tolist(),
            "trans_effect": self.trans_effect.tolist(),
        }
        return json.dumps(payload, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "LinearModelParams":
        payload = json.loads(text)
        return LinearModelParams(**{k: np.asarray(v, dtype=float) for k, v in payload.items()})


@dataclass(frozen=True)
class ResidualBank:
    """Fitted residuals: reward (n, M) and transition (n, M-1, d)."""

    reward: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "reward", np.asarray(self.reward, dtype=float))
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=float))
        n, m = self.reward.shape
        if self.transition.shape[:2] != (n, m - 1):
            raise ValueError("transition residual shape inconsistent with reward residuals")


@dataclass(frozen=True)
class AteEstimate:
    value: float
    method: str
    n_used: int

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("estimate must be finite")


@dataclass(frozen=True)
class MonteCarloAte:
    value: float
    se: float
    n_rollouts: int


@dataclass(frozen=True)
class ConditionalVarianceSpec:
    """Strictly positive conditional outcome standard deviation.

    ``sigma(history, observation, action)`` must return a positive real for
    every admissible input; enumerable test processes keep it free of past
    outcomes so exact enumeration remains possible.
    """

    sigma: Callable[[History, np.ndarray, int], float]

    def __call__(self, history: History, observation: np.ndarray, action: int) -> float:
        value = float(self.sigma(history, observation, action))
        if not value > 0.0:
            raise ValueError("conditional standard deviation must be strictly positive")
        return value


@dataclass(frozen=True)
class OlsFit:
    """Per-interval OLS fit together with residuals and identifiability flags."""

    params: LinearModelParams
    residuals: ResidualBank
    reward_action_identified: np.ndarray  # (M,) bool
    trans_action_identified: np.ndarray   # (M-1,) bool


def _lstsq_exact(x: np.ndarray, y: np.ndarray, context: str) -> np.ndarray:
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        raise ValueError(f"rank-deficient design matrix in {context} "
                         f"(rank {rank} < {x.shape[1]} columns)")
    return coef


def fit_ols_per_interval(panel: PanelData) -> OlsFit:
    """Fit the reward and transition equations interval by interval.

    The action column is included only where it varies within the interval;
    A/A panels therefore come back with zero action effects, flagged as
    unidentified. Requires more days than regressors per interval.
    """
    n, m, d = panel.obs.shape
    if n <= d + 2:
        raise ValueError(f"need more than d+2={d + 2} days per interval, got {n}")
    reward_intercept = np.zeros(m)
    reward_obs = np.zeros((m, d))
    reward_effect = np.zeros(m)
    reward_flag = np.zeros(m, dtype=bool)
    reward_resid = np.zeros((n, m))
    for j in range(m):
        obs = panel.obs[:, j, :]
        acts = panel.actions[:, j].astype(float)
        y = panel.outcomes[:, j]
        varies = np.ptp(acts) > 0
        cols = [np.ones(n), *obs.T] + ([acts] if varies else [])
        x = np.column_stack(cols)
        coef = _lstsq_exact(x, y, f"reward equation, interval {j + 1}")
        reward_intercept[j] = coef[0]
        reward_obs[j] = coef[1:1 + d]
        if varies:
            reward_effect[j] = coef[1 + d]
            reward_flag[j] = True
        reward_resid[:, j] = y - x @ coef

    trans_intercept = np.zeros((m - 1, d))
    trans_matrix = np.zeros((m - 1, d, d))
    trans_effect = np.zeros((m - 1, d))
    trans_flag = np.zeros(m - 1, dtype=bool)
    trans_resid = np.zeros((n, m - 1, d))
    for j in range(m - 1):
        obs = panel.obs[:, j, :]
        acts = panel.actions[:, j].astype(float)
        targets = panel.obs[:, j + 1, :]
        varies = np.ptp(acts) > 0
        cols = [np.ones(n), *obs.T] + ([acts] if varies else [])
        x = np.column_stack(cols)
        coef = _lstsq_exact(x, targets, f"transition equation, interval {j + 1}")
        trans_intercept[j] = coef[0]
        trans_matrix[j] = coef[1:1 + d].T
        if varies:
            trans_effect[j] = coef[1 + d]
            trans_flag[j] = True
        trans_resid[:, j, :] = targets - x @ coef

    params = LinearModelParams(
        reward_intercept=reward_intercept,
        reward_obs=reward_obs,
        reward_effect=reward_effect,
        trans_intercept=trans_intercept,
        trans_matrix=trans_matrix,
        trans_effect=trans_effect,
    )
    bank = ResidualBank(reward=reward_resid, transition=trans_resid)
    return OlsFit(params, bank, reward_flag, trans_flag)


def ate_plugin(params: LinearModelParams, n_intervals: int | None = None) -> float:
    """Closed-form ATE implied by the linear model.

    Sums the direct action effect on each interval's outcome plus the
    carryover channel in which past action effects propagate through the
    chained transition matrices (empty chains act as the identity). Actions
    are coded +1/-1, hence the factor 2.
    """
    m = params.n_intervals if n_intervals is None else n_intervals
    if m != params.n_intervals:
        raise ValueError("interval count does not match parameter set")
    direct = params.reward_effect.sum()
    # carry at step j holds sum_k (Phi_{j-1}...Phi_{k+1}) Gamma_k, built by the
    # left-fold recursion carry_j = Phi_{j-1} @ carry_{j-1} + Gamma_{j-1}.
    carry = np.zeros(params.obs_dim)
    lagged = 0.0
    for j in range(2, m + 1):
        carry = params.trans_matrix[j - 2] @ carry + params.trans_effect[j - 2]
        lagged += params.reward_obs[j - 1] @ carry
    return float((2.0 / m) * (direct + lagged))


def ate_monte_carlo(env, n_rollouts: int, rng: np.random.Generator) -> MonteCarloAte:
    """Monte Carlo ATE: forced all-(+1) versus all-(-1) rollouts.

    Each rollout pairs one trajectory per arm (independent noise) and records
    the difference of per-step mean outcomes; the estimate is the mean of
    those differences with its standard error.
    """
    if n_rollouts < 2:
        raise ValueError("need at least 2 rollouts to form a standard error")
    rng_plus, rng_minus = rng.spawn(2)
    plus = env.forced_outcome_means(ACTION_PLUS, n_rollouts, rng_plus)
    minus = env.forced_outcome_means(ACTION_MINUS, n_rollouts, rng_minus)
    diffs = np.asarray(plus, dtype=float) - np.asarray(minus, dtype=float)
    value = float(diffs.mean())
    se = float(diffs.std(ddof=1) / np.sqrt(n_rollouts))
    return MonteCarloAte(value=value, se=se, n_rollouts=n_rollouts)


def dr_estimate(traj: Trajectory, mu: Callable[[np.ndarray, int], float], pi: DesignPolicy) -> float:
    """Doubly robust ATE from one logged trajectory.

    ``mu(o, a)`` is the outcome-mean model; ``pi`` supplies the assignment
    probabilities actually used. Propensities must lie strictly inside (0,1)
    at every visited step.
    """
    total = 0.0
    horizon = len(traj)
    for t in range(1, horizon + 1):
        history = traj.history_at(t)
        p_plus = float(pi.allocate(history))
        if not 0.0 < p_plus < 1.0:
            raise ValueError(f"propensity {p_plus} at step {t} leaves (0,1); "
                             "doubly robust correction undefined")
        obs = traj.obs[t - 1]
        action = int(traj.actions[t - 1])
        y = float(traj.outcomes[t - 1])
        mu_plus = float(mu(obs, ACTION_PLUS))
        mu_minus = float(mu(obs, ACTION_MINUS))
        total += mu_plus - mu_minus
        if action == ACTION_PLUS:
            total += (y - mu_plus) / p_plus
        else:
            total += -(y - mu_minus) / (1.0 - p_plus)
    return total / horizon


def neyman_allocation(sigma_plus: float, sigma_minus: float) -> float:
    """Variance-optimal assignment probability sigma_+ / (sigma_+ + sigma_-)."""
    if sigma_plus <= 0.0 or sigma_minus <= 0.0:
        raise ValueError("arm standard deviations must be strictly positive")
    return sigma_plus / (sigma_plus + sigma_minus)


@dataclass(frozen=True)
class TabularProcess:
    """Exhaustively enumerable data generating process for variance audits.

    Observations live on a small finite support and evolve independently of
    actions; ``sigma_fn`` may depend on the full observation/action prefix
    (outcomes are excluded so that enumeration stays exact, and policies
    evaluated against the process must not read outcomes either).

    * ``obs_kernel(t, obs_prefix)`` returns the distribution of O_{t+1}
      given observations up to time t, as probabilities over ``obs_values``.
    * ``mean_fn(t, o, a)`` is the conditional outcome mean.
    * ``sigma_fn(t, obs_prefix, action_prefix, a)`` is the conditional
      outcome standard deviation; the current observation is the last entry
      of ``obs_prefix``.
    """

    horizon: int
    obs_values: tuple
    init_probs: tuple
    obs_kernel: Callable[[int, tuple], Sequence[float]]
    mean_fn: Callable[[int, float, int], float]
    sigma_fn: Callable[[int, tuple, tuple, int], float]

    def __post_init__(self):
        if self.horizon < 1 or self.horizon > 6:
            raise ValueError("exact enumeration supports horizons 1..6")
        if len(self.obs_values) == 0:
            raise ValueError("observation support must be finite and non-empty "
                             "(continuous-support processes cannot be enumerated)")
        if len(self.init_probs) != len(self.obs_values):
            raise ValueError("init_probs must match obs_values")
        if abs(sum(self.init_probs) - 1.0) > 1e-12:
            raise ValueError("init_probs must sum to 1")

    def obs_sequences(self):
        """Yield (obs tuple, probability) over all length-T observation paths."""
        def rec(prefix: tuple, prob: float):
            t = len(prefix)
            if t == self.horizon:
                yield prefix, prob
                return
            dist = self.init_probs if t == 0 else self.obs_kernel(t, prefix)
            for o, p in zip(self.obs_values, dist):
                if p > 0.0:
                    yield from rec(prefix + (o,), prob * p)
        yield from rec((), 1.0)


def _prefix_history(obs_prefix: tuple, action_prefix: tuple) -> History:
    t = len(obs_prefix)
    return History(
        obs=np.asarray(obs_prefix[: t - 1], dtype=float).reshape(t - 1, 1),
        actions=np.asarray(action_prefix, dtype=int),
        outcomes=np.zeros(t - 1),
        pending=np.asarray([obs_prefix[-1]], dtype=float),
    )


def dr_variance(process: TabularProcess, pi: DesignPolicy) -> float:
    """Exact variance of the doubly robust ATE under ``pi``.

    Computed by full enumeration: the covariance of the outcome-mean
    differences (policy-free, since observations evolve independently of
    actions) plus the inverse-propensity-weighted conditional variances.
    Intended for theory audits on tiny processes, not production estimation.
    """
    horizon = process.horizon

    # Covariance term: Var of the sum of per-step mean differences.
    mean_sum = 0.0
    mean_sq_sum = 0.0
    for seq, prob in process.obs_sequences():
        total_diff = sum(
            process.mean_fn(t, seq[t - 1], ACTION_PLUS) - process.mean_fn(t, seq[t - 1], ACTION_MINUS)
            for t in range(1, horizon + 1)
        )
        mean_sum += prob * total_diff
        mean_sq_sum += prob * total_diff ** 2
    cov_term = mean_sq_sum - mean_sum ** 2

    # Propensity term: enumerate observation/action prefixes with their
    # probabilities under the policy.
    prop_term = 0.0
    for t in range(1, horizon + 1):
        for obs_prefix, obs_prob in _partial_obs_sequences(process, t):
            for action_prefix in itertools.product((ACTION_MINUS, ACTION_PLUS), repeat=t - 1):
                act_prob = 1.0
                for s in range(1, t):
                    p_plus = float(pi.allocate(_prefix_history(obs_prefix[:s], action_prefix[: s - 1])))
                    act_prob *= p_plus if action_prefix[s - 1] == ACTION_PLUS else 1.0 - p_plus
                    if act_prob == 0.0:
                        break
                if act_prob == 0.0:
                    continue
                p_t = float(pi.allocate(_prefix_history(obs_prefix, action_prefix)))
                if not 0.0 < p_t < 1.0:
                    raise ValueError("doubly robust variance undefined at deterministic propensities")
                s_plus = process.sigma_fn(t, obs_prefix, action_prefix, ACTION_PLUS)
                s_minus = process.sigma_fn(t, obs_prefix, action_prefix, ACTION_MINUS)
                if s_plus <= 0.0 or s_minus <= 0.0:
                    raise ValueError("conditional standard deviations must be positive")
                prop_term += obs_prob * act_prob * (s_plus ** 2 / p_t + s_minus ** 2 / (1.0 - p_t))

    return (cov_term + prop_term) / horizon ** 2


def _partial_obs_sequences(process: TabularProcess, t: int):
    """All observation prefixes of length t with their probabilities."""
    def rec(prefix: tuple, prob: float):
        if len(prefix) == t:
            yield prefix, prob
            return
        dist = process.init_probs if not prefix else process.obs_kernel(len(prefix), prefix)
        for o, p in zip(process.obs_values, dist):
            if p > 0.0:
                yield from rec(prefix + (o,), prob * p)
    yield from rec((), 1.0)


def default_lstd_features(obs: np.ndarray, action: int) -> np.ndarray:
    """Intercept, observation, action, and action-observation interactions."""
    obs = np.asarray(obs, dtype=float)
    return np.concatenate(([1.0], obs, [float(action)], float(action) * obs))


def lstd_estimate(
    panel: PanelData | Trajectory,
    feature_map: Callable[[np.ndarray, int], np.ndarray] = default_lstd_features,
    discount: float = 0.95,
    ridge: float = 1e-6,
) -> float:
    """Least-squares temporal-difference ATE for day-episodic data.

    Fits linear per-interval value functions for the all-(+1) and all-(-1)
    target policies by backward least squares on the logged transitions, then
    returns the value difference at the initial observations normalized by
    the discounted episode length. Singular feature systems fall back to a
    ridge solve; if that also fails the features are reported as degenerate.
    """
    if not 0.0 <= discount < 1.0:
        raise ValueError("discount must lie in [0, 1)")
    if isinstance(panel, Trajectory):
        panel = panel.prefix_panel(panel.n_days)
    n, m, _ = panel.obs.shape
    k = feature_map(panel.obs[0, 0], ACTION_PLUS).shape[0]

    logged = np.zeros((m, n, k))
    for j in range(m):
        for i in range(n):
            logged[j, i] = feature_map(panel.obs[i, j], int(panel.actions[i, j]))

    def solve(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        gram = x.T @ x
        try:
            coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
            if rank == x.shape[1]:
                return coef
        except np.linalg.LinAlgError:
            pass
        try:
            return np.linalg.solve(gram + ridge * np.eye(k), x.T @ y)
        except np.linalg.LinAlgError as err:
            raise ValueError("degenerate LSTD features: singular even after ridge") from err

    values = {}
    for target in (ACTION_PLUS, ACTION_MINUS):
        theta = np.zeros((m, k))
        for j in range(m - 1, -1, -1):
            y = panel.outcomes[:, j].astype(float).copy()
            if j < m - 1:
                nxt = np.stack([feature_map(panel.obs[i, j + 1], target) for i in range(n)])
                y = y + discount * nxt @ theta[j + 1]
            theta[j] = solve(logged[j], y)
        first = np.stack([feature_map(panel.obs[i, 0], target) for i in range(n)])
        values[target] = float((first @ theta[0]).mean())

    horizon_weight = (1.0 - discount ** m) / (1.0 - discount) if discount > 0 else 1.0
    return (values[ACTION_PLUS] - values[ACTION_MINUS]) / horizon_weight


@dataclass(frozen=True)
class DailyOlsAte:
    value: float
    fallback_intervals: tuple = field(default_factory=tuple)

    @property
    def used_fallback(self) -> bool:
        return len(self.fallback_intervals) > 0


def _pooled_fit(panel: PanelData) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray,
                                           float, np.ndarray, bool]:
    """All-interval pooled OLS used as the skip-and-carry fallback.

    Returns pooled reward coefficients (intercept, obs, effect), pooled
    transition coefficients, and whether the action effect was identified.
    """
    n, m, d = panel.obs.shape
    obs = panel.obs.reshape(n * m, d)
    acts = panel.actions.reshape(n * m).astype(float)
    y = panel.outcomes.reshape(n * m)
    varies = np.ptp(acts) > 0
    cols = [np.ones(n * m), *obs.T] + ([acts] if varies else [])
    x = np.column_stack(cols)
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        # The prefix is too degenerate even pooled; keep zeros for the pieces
        # we cannot identify.
        coef = np.zeros(x.shape[1])
    r_int, r_obs = coef[0], coef[1:1 + d]
    r_eff = coef[1 + d] if varies and len(coef) > 1 + d else 0.0

    if m > 1:
        src = panel.obs[:, :-1, :].reshape(n * (m - 1), d)
        tgt = panel.obs[:, 1:, :].reshape(n * (m - 1), d)
        a_src = panel.actions[:, :-1].reshape(n * (m - 1)).astype(float)
        t_varies = np.ptp(a_src) > 0
        cols = [np.ones(len(src)), *src.T] + ([a_src] if t_varies else [])
        x = np.column_stack(cols)
        coef, _, rank, _ = np.linalg.lstsq(x, tgt, rcond=None)
        if rank < x.shape[1]:
            coef = np.zeros((x.shape[1], d))
        t_int, t_mat = coef[0], coef[1:1 + d].T
        t_eff = coef[1 + d] if t_varies and coef.shape[0] > 1 + d else np.zeros(d)
    else:
        t_int, t_mat, t_eff, t_varies = np.zeros(d), np.zeros((d, d)), np.zeros(d), False

    return r_int, r_obs, t_int, t_mat, float(r_eff), np.asarray(t_eff, float), bool(varies or t_varies)


def daily_ols_ate(panel: PanelData | Trajectory, n_days: int | None = None) -> DailyOlsAte:
    """Plug-in ATE from the panel prefix up to ``n_days``, with skip-and-carry.

    Intervals whose per-interval fit is unidentified in the prefix (constant
    action column, or too few days for the design matrix) borrow the pooled
    all-interval coefficients and are flagged in the result. This keeps the
    day-end estimate defined from day 2 onward, before both arms have
    appeared everywhere.
    """
    if isinstance(panel, Trajectory):
        panel = panel.prefix_panel(panel.n_days if n_days is None else n_days)
    elif n_days is not None and n_days != panel.n_days:
        panel = PanelData(panel.obs[:n_days], panel.actions[:n_days], panel.outcomes[:n_days])
    n, m, d = panel.obs.shape
    if n < 2:
        raise ValueError("daily plug-in ATE requires at least 2 observed days")

    pooled = _pooled_fit(panel)
    p_rint, p_robs, p_tint, p_tmat, p_reff, p_teff, pooled_identified = pooled

    reward_intercept = np.zeros(m)
    reward_obs = np.zeros((m, d))
    reward_effect = np.zeros(m)
    trans_intercept = np.zeros((max(m - 1, 0), d))
    trans_matrix = np.zeros((max(m - 1, 0), d, d))
    trans_effect = np.zeros((max(m - 1, 0), d))
    fallback = set()

    for j in range(m):
        obs = panel.obs[:, j, :]
        acts = panel.actions[:, j].astype(float)
        y = panel.outcomes[:, j]
        varies = np.ptp(acts) > 0
        cols = [np.ones(n), *obs.T] + ([acts] if varies else [])
        x = np.column_stack(cols)
        coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
        if rank < x.shape[1] or not varies:
            reward_intercept[j], reward_obs[j] = p_rint, p_robs
            reward_effect[j] = p_reff if pooled_identified else 0.0
            fallback.add(j + 1)
        else:
            reward_intercept[j] = coef[0]
            reward_obs[j] = coef[1:1 + d]
            reward_effect[j] = coef[1 + d]

    for j in range(m - 1):
        obs = panel.obs[:, j, :]
        acts = panel.actions[:, j].astype(float)
        tgt = panel.obs[:, j + 1, :]
        varies = np.ptp(acts) > 0
        cols = [np.ones(n), *obs.T] + ([acts] if varies else [])
        x = np.column_stack(cols)
        coef, _, rank, _ = np.linalg.lstsq(x, tgt, rcond=None)
        if rank < x.shape[1] or not varies:
            trans_intercept[j], trans_matrix[j] = p_tint, p_tmat
            trans_effect[j] = p_teff if pooled_identified else np.zeros(d)
            fallback.add(j + 1)
        else:
            trans_intercept[j] = coef[0]
            trans_matrix[j] = coef[1:1 + d].T
            trans_effect[j] = coef[1 + d]

    params = LinearModelParams(
        reward_intercept=reward_intercept,
        reward_obs=reward_obs,
        reward_effect=reward_effect,
        trans_intercept=trans_intercept,
        trans_matrix=trans_matrix,
        trans_effect=trans_effect,
    )
    return DailyOlsAte(value=ate_plugin(params), fallback_intervals=tuple(sorted(fallback)))
