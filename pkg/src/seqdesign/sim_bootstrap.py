"""Wild-bootstrap simulator built from A/A panel data.

Fit the per-interval linear model to an A/A panel, bank the residuals,
inject synthetic treatment effects proportional to interval means, and
generate new days by resampling source days with a shared standard-normal
multiplier on their residuals. Two sensitivity knobs reshape the generator:
``phi_coef`` rescales the cross-variable transition entries and ``rho``
moves the reward-residual correlation between independence, the empirical
structure, and a strongly correlated target.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ACTIONS, PanelData
from .estimators import LinearModelParams, ResidualBank, ate_plugin, fit_ols_per_interval


@dataclass(frozen=True)
class AADataset:
    """Panel collected under a single policy (no treatment variation)."""

    panel: PanelData
    column_names: tuple = ("demand", "supply")
    outcome_name: str = "outcome"

    def __post_init__(self):
        if np.any(self.panel.actions != 0):
            raise ValueError("A/A data must carry no treatment variation (actions all 0)")

    @property
    def n_days(self) -> int:
        return self.panel.n_days

    @property
    def intervals_per_day(self) -> int:
        return self.panel.intervals_per_day


@dataclass(frozen=True)
class BootstrapConfig:
    """Knobs for the bootstrap generator."""

    n_days: int
    intervals_per_day: int
    delta_outcome: float = 0.0    # outcome effect scale (delta_1)
    delta_transition: float = 0.0  # transition effect scale (delta_2)
    rho: float = 0.0              # reward-residual correlation knob
    phi_coef: float = 1.0         # cross-variable transition rescale

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if self.phi_coef <= 0:
            raise ValueError("phi_coef must be positive")
        if self.n_days < 1 or self.intervals_per_day < 1:
            raise ValueError("n_days and intervals_per_day must be positive")


def load_aa_csv(path) -> AADataset:
    """Read an A/A panel from CSV with columns (day, interval, obs_1, obs_2, outcome).

    The file must describe a complete day x interval grid with numeric fields.
    """
    rows = {}
    m_seen = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"day", "interval", "obs_1", "obs_2", "outcome"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"A/A CSV must have columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                day = int(row["day"])
                interval = int(row["interval"])
                values = (float(row["obs_1"]), float(row["obs_2"]), float(row["outcome"]))
            except (TypeError, ValueError) as err:
                raise ValueError(f"non-numeric field at line {lineno}") from err
            if (day, interval) in rows:
                raise ValueError(f"duplicate cell day={day} interval={interval}")
            rows[(day, interval)] = values
            m_seen.add(interval)
    if not rows:
        raise ValueError("empty panel")
    n = max(d for d, _ in rows)
    m = max(m_seen)
    if min(m_seen) != 1 or len(m_seen) != m:
        raise ValueError(f"inconsistent interval labels: saw {sorted(m_seen)}")
    obs = np.zeros((n, m, 2))
    outcomes = np.zeros((n, m))
    for day in range(1, n + 1):
        for interval in range(1, m + 1):
            if (day, interval) not in rows:
                raise ValueError(f"missing cell day={day} interval={interval}")
            o1, o2, y = rows[(day, interval)]
            obs[day - 1, interval - 1] = (o1, o2)
            outcomes[day - 1, interval - 1] = y
    panel = PanelData(obs=obs, actions=np.zeros((n, m), dtype=int), outcomes=outcomes)
    return AADataset(panel=panel)


def write_aa_csv(path, dataset: AADataset) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "interval", "obs_1", "obs_2", "outcome"])
        panel = dataset.panel
        for i in range(panel.n_days):
            for j in range(panel.intervals_per_day):
                writer.writerow([
                    i + 1, j + 1,
                    repr(float(panel.obs[i, j, 0])),
                    repr(float(panel.obs[i, j, 1])),
                    repr(float(panel.outcomes[i, j])),
                ])


def synth_aa_generator(n_days: int, intervals_per_day: int, rng: np.random.Generator) -> AADataset:
    """Synthetic stand-in for proprietary A/A data.

    Seasonal two-peak mean curves for demand and supply, a shared day-level
    random effect, AR(1) propagation with positive cross-variable loadings,
    and a common within-step shock. Produces positive short-lag outcome
    autocorrelation and positive demand-supply cross-correlation; the day
    effect lands in the OLS residuals, giving the residual bank genuine
    cross-interval correlation for the wild bootstrap to preserve.
    """
    if n_days < 10:
        raise ValueError("need at least 10 days for a usable synthetic panel")
    n, m = n_days, intervals_per_day
    grid = (np.arange(m) + 0.5) / m
    season = np.stack([
        10.0 + 2.5 * np.sin(2 * np.pi * grid) + 1.5 * np.sin(4 * np.pi * grid),
        8.0 + 2.0 * np.sin(2 * np.pi * grid + 0.7),
    ], axis=1)  # (m, 2)
    trans = np.array([[0.55, 0.20], [0.15, 0.50]])
    # day-effect scale keeps the residual bank's cross-interval correlation
    # moderate (~0.3) so the correlation-family knob has room on both sides
    day_effect = 0.45 * rng.standard_normal(n)
    obs = np.zeros((n, m, 2))
    outcomes = np.zeros((n, m))
    state = season[0] + np.outer(day_effect, [1.0, 0.8]) + 0.5 * rng.standard_normal((n, 2))
    for j in range(m):
        obs[:, j, :] = state
        common = 0.5 * rng.standard_normal(n)
        outcomes[:, j] = (2.0 + state @ [0.8, 0.6] + 1.0 * day_effect
                          + 0.8 * common + 0.4 * rng.standard_normal(n))
        if j < m - 1:
            shock = np.outer(0.5 * rng.standard_normal(n), [0.6, 0.5])
            noise = 0.4 * rng.standard_normal((n, 2))
            state = season[j + 1] + (state - season[j]) @ trans.T + shock + noise
    panel = PanelData(obs=obs, actions=np.zeros((n, m), dtype=int), outcomes=outcomes)
    return AADataset(panel=panel)


def fit_and_bank(dataset: AADataset) -> tuple[LinearModelParams, ResidualBank]:
    """Least-squares fit of the A/A panel; action effects come back zero."""
    fit = fit_ols_per_interval(dataset.panel)
    return fit.params, fit.residuals


@dataclass(frozen=True)
class InjectedEffect:
    """Parameters with synthetic treatment effects plus the implied lift."""

    params: LinearModelParams
    ate: float
    baseline_mean: float

    @property
    def effect_ratio(self) -> float:
        return self.ate / self.baseline_mean


def inject_effect(params: LinearModelParams, dataset: AADataset,
                  delta_outcome: float, delta_transition: float) -> InjectedEffect:
    """Set per-interval effects proportional to the A/A interval means.

    Outcome effects scale interval mean outcomes by ``delta_outcome``;
    transition effects scale interval mean observations by
    ``delta_transition``. The reported lift compares the implied ATE to the
    A/A grand mean outcome.
    """
    panel = dataset.panel
    mean_y = panel.outcomes.mean(axis=0)          # (M,)
    mean_obs = panel.obs.mean(axis=0)             # (M, d)
    new = replace(
        params,
        reward_effect=delta_outcome * mean_y,
        trans_effect=delta_transition * mean_obs[:-1],
    )
    return InjectedEffect(params=new, ate=ate_plugin(new),
                          baseline_mean=float(panel.outcomes.mean()))


def scale_cross_correlation(params: LinearModelParams, phi_coef: float) -> LinearModelParams:
    """Multiply the off-diagonal transition entries by ``phi_coef``.

    Diagonals, effects, and the reward equation stay untouched. Warns when
    the rescaled system's spectral radius reaches 1.5 (possible blow-up).
    """
    if phi_coef <= 0:
        raise ValueError("phi_coef must be positive")
    scaled = params.trans_matrix.copy()
    d = params.obs_dim
    off = ~np.eye(d, dtype=bool)
    scaled[:, off] *= phi_coef
    radius = max((np.max(np.abs(np.linalg.eigvals(mat))) for mat in scaled), default=0.0)
    if radius >= 1.5:
        warnings.warn(f"rescaled transition spectral radius {radius:.3f} >= 1.5; "
                      "generated trajectories may blow up", RuntimeWarning)
    return replace(params, trans_matrix=scaled)


@dataclass(frozen=True)
class CorrelationFamily:
    """Empirical reward-residual correlation and the interpolation targets."""

    empirical: np.ndarray       # R_0, (M, M)
    target: np.ndarray          # R_1: unit diagonal, 0.6 off-diagonal
    variances: np.ndarray       # diagonal of the empirical covariance, (M,)

    def correlation_at(self, rho: float) -> np.ndarray:
        if not -1.0 <= rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if rho <= 0.0:
            return (1.0 + rho) * self.empirical - rho * np.eye(self.empirical.shape[0])
        return (1.0 - rho) * self.empirical + rho * self.target


def correlation_family(bank: ResidualBank) -> CorrelationFamily:
    e = bank.reward
    centered = e - e.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / e.shape[0]
    var = np.diag(cov).copy()
    if np.any(var <= 0):
        raise ValueError("degenerate reward residuals: zero marginal variance")
    scale = 1.0 / np.sqrt(var)
    corr = cov * np.outer(scale, scale)
    m = cov.shape[0]
    target = np.full((m, m), 0.6)
    np.fill_diagonal(target, 1.0)
    return CorrelationFamily(empirical=corr, target=target, variances=var)


def _psd_factor(cov: np.ndarray, floor: float = 1e-10) -> tuple[np.ndarray, bool]:
    """Lower-triangular-style factor L with cov ~= L L^T.

    Plain Cholesky where possible; otherwise clip eigenvalues at ``floor``,
    rescale the diagonal back to the original, and factor the repaired
    matrix. Returns (factor, repaired_flag).
    """
    try:
        return np.linalg.cholesky(cov), False
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
    clipped = np.maximum(vals, floor)
    repaired = vecs @ np.diag(clipped) @ vecs.T
    orig_diag = np.diag(cov)
    rep_diag = np.diag(repaired)
    rescale = np.sqrt(np.where(rep_diag > 0, orig_diag / rep_diag, 1.0))
    repaired = repaired * np.outer(rescale, rescale)
    try:
        return np.linalg.cholesky(repaired), True
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh((repaired + repaired.T) / 2.0)
        return vecs @ np.diag(np.sqrt(np.maximum(vals, floor))), True


def residual_correlation_family(bank: ResidualBank, rho: float) -> tuple[ResidualBank, bool]:
    """Retune the reward residuals' cross-interval correlation to level ``rho``.

    rho = -1 decorrelates, 0 keeps the empirical structure (bank returned
    unchanged), +1 moves to the 0.6-equicorrelated target; marginal variances
    are preserved throughout. Transition residuals are left untouched.
    Returns the adjusted bank and whether a positive-semidefinite repair was
    needed.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    if rho == 0.0:
        return bank, False
    family = correlation_family(bank)
    d_half = np.sqrt(family.variances)
    cov_rho = family.correlation_at(rho) * np.outer(d_half, d_half)
    cov_emp = family.empirical * np.outer(d_half, d_half)
    l_rho, repaired_rho = _psd_factor(cov_rho)
    l_emp, repaired_emp = _psd_factor(cov_emp)
    transform = l_rho @ np.linalg.inv(l_emp)
    adjusted = bank.reward @ transform.T
    return ResidualBank(reward=adjusted, transition=bank.transition), repaired_rho or repaired_emp


class BootstrapEnv:
    """Generates experiments from the fitted model and banked residuals.

    Each generated day resamples a source day uniformly with replacement and
    draws one standard-normal multiplier applied to that day's residuals; the
    initial observation is the source day's first observation. Actions enter
    only through the injected effect coefficients, so holding the resampled
    day and multiplier fixed, two designs differ only through those terms.
    """

    def __init__(self, params: LinearModelParams, bank: ResidualBank,
                 source: AADataset, config: BootstrapConfig):
        if config.intervals_per_day != source.intervals_per_day:
            raise ValueError("config intervals_per_day must match the source panel")
        if config.phi_coef != 1.0:
            params = scale_cross_correlation(params, config.phi_coef)
        if config.rho != 0.0:
            bank, _ = residual_correlation_family(bank, config.rho)
        self.params = params
        self.bank = bank
        self.source = source
        self.config = config
        self.n_days = config.n_days
        self.intervals_per_day = config.intervals_per_day
        self.obs_dim = source.panel.obs_dim

    def true_ate(self) -> float:
        """Exact ATE of the generator (residual terms are mean zero)."""
        return ate_plugin(self.params)

    def episode(self, rng: np.random.Generator) -> "_BootstrapEpisode":
        return _BootstrapEpisode(self, rng)

    def draw_day(self, rng: np.random.Generator) -> tuple[int, float]:
        """Source-day index and wild multiplier for one generated day."""
        source_day = int(rng.integers(self.source.n_days))
        xi = float(rng.standard_normal())
        return source_day, xi

    def step_mean(self, interval: int, obs: np.ndarray, action: float) -> float:
        p = self.params
        j = interval - 1
        return float(p.reward_intercept[j] + p.reward_obs[j] @ obs + p.reward_effect[j] * action)

    def next_obs_mean(self, interval: int, obs: np.ndarray, action: float) -> np.ndarray:
        p = self.params
        j = interval - 1
        return p.trans_intercept[j] + p.trans_matrix[j] @ obs + p.trans_effect[j] * action

    def forced_outcome_means(self, action: int, n_rollouts: int, rng: np.random.Generator) -> np.ndarray:
        n, m = self.n_days, self.intervals_per_day
        actions = np.full((n_rollouts, n), int(action))
        _, outcomes = self.panels_under_day_actions(actions, rng)
        return outcomes.reshape(n_rollouts, n * m).mean(axis=1)

    def panels_under_day_actions(self, day_actions: np.ndarray,
                                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized generation for day-constant allocations.

        ``day_actions`` is (n_rollouts, n_days) in {-1, +1}; returns
        observations (n_rollouts, n_days, M, d) and outcomes
        (n_rollouts, n_days, M). Draw order matches the episodic path:
        one (source day, multiplier) pair per generated day.
        """
        n_roll, n = day_actions.shape
        if n != self.n_days:
            raise ValueError("day_actions must cover n_days columns")
        m, d = self.intervals_per_day, self.obs_dim
        p = self.params
        total = n_roll * n
        src = rng.integers(self.source.n_days, size=total)
        xi = rng.standard_normal(total)
        a = day_actions.reshape(total).astype(float)
        obs = self.source.panel.obs[src, 0, :].copy()
        all_obs = np.zeros((total, m, d))
        all_y = np.zeros((total, m))
        for j in range(m):
            all_obs[:, j, :] = obs
            fit = p.reward_intercept[j] + obs @ p.reward_obs[j] + p.reward_effect[j] * a
            all_y[:, j] = fit + xi * self.bank.reward[src, j]
            if j < m - 1:
                obs = (p.trans_intercept[j] + obs @ p.trans_matrix[j].T
                       + p.trans_effect[j][None, :] * a[:, None]
                       + xi[:, None] * self.bank.transition[src, j, :])
        return (all_obs.reshape(n_roll, n, m, d), all_y.reshape(n_roll, n, m))


class _BootstrapEpisode:
    def __init__(self, env: BootstrapEnv, rng: np.random.Generator):
        self._env = env
        self._rng = rng
        self._day = 1
        self._start_day()
        self._done = False

    def _start_day(self):
        self._src, self._xi = self._env.draw_day(self._rng)
        self._interval = 1
        self._obs = self._env.source.panel.obs[self._src, 0, :].copy()

    @property
    def pending(self) -> np.ndarray:
        return self._obs

    @property
    def day(self) -> int:
        return self._day

    @property
    def interval(self) -> int:
        return self._interval

    def step(self, action: int) -> tuple[float, bool]:
        if self._done:
            raise RuntimeError("episode already finished")
        if action not in ACTIONS:
            raise ValueError("action must be +1 or -1")
        env, j = self._env, self._interval
        outcome = env.step_mean(j, self._obs, action) + self._xi * env.bank.reward[self._src, j - 1]
        if j < env.intervals_per_day:
            self._obs = (env.next_obs_mean(j, self._obs, action)
                         + self._xi * env.bank.transition[self._src, j - 1, :])
            self._interval += 1
        elif self._day < env.n_days:
            self._day += 1
            self._start_day()
        else:
            self._done = True
        return float(outcome), self._done


def calibrate_effect(dataset: AADataset, target_ratio: float, config: BootstrapConfig,
                     rng: np.random.Generator, n_rollouts: int = 4000,
                     tol: float = 1e-4, max_iter: int = 30) -> InjectedEffect:
    """Tune the effect scale to hit a target ATE / baseline-return ratio.

    One scale drives both effect knobs (delta_transition = delta_outcome);
    the ratio compares the generator's exact ATE to the Monte Carlo mean
    outcome under the control arm, evaluated on a fixed stream so the map is
    deterministic. A damped proportional update keeps the search in the
    small-effect regime where the ratio responds smoothly (large scales flip
    the baseline's sign and destabilize the transitions).
    """
    if target_ratio <= 0:
        raise ValueError("target_ratio must be positive")
    params, bank = fit_and_bank(dataset)
    eval_seed = int(rng.integers(2 ** 63))

    def ratio_at(delta: float) -> tuple[float, InjectedEffect]:
        injected = inject_effect(params, dataset, delta, delta)
        env = BootstrapEnv(injected.params, bank, dataset, config)
        baseline = float(env.forced_outcome_means(
            -1, n_rollouts, np.random.default_rng(eval_seed)).mean())
        if baseline <= 0:
            raise ValueError("control-arm baseline is not positive; effect scale too large "
                             "or outcomes not positively scaled")
        return injected.ate / baseline, injected

    delta = 0.01
    ratio, best = ratio_at(delta)
    if ratio <= 0:
        raise ValueError("injected effect moves the ATE the wrong way; check the dataset")
    for _ in range(max_iter):
        if abs(ratio - target_ratio) < tol:
            break
        step = min(max(target_ratio / ratio, 0.25), 4.0)
        delta *= step
        ratio, best = ratio_at(delta)
    return best
