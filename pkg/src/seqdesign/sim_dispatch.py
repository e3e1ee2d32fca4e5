"""Grid-world ride dispatch simulator and its fitted surrogate.

Drivers and orders interact on a 9x9 grid over 20 steps per day. Orders
spawn from a two-component Gaussian mixture over (x, y, time), expire after
a truncated-Gaussian patience, and are matched to idle drivers within a
Manhattan radius by one of two dispatch rules: distance-based (minimize
total pickup distance) or value-based (maximize price plus discounted
value-table gain). The surrogate fits per-step linear models of the
(outcome, next-summary) dynamics with Gaussian residuals for fast design
evaluation.

Conventions the underlying publication leaves open, fixed here: trip
duration equals the Manhattan distance from origin to destination (one cell
per step), price = 1 + 0.3 * trip distance, and idle drivers move one step
toward the adjacent cell holding the most waiting orders (ties stay put).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import ndtr, ndtri

from .core import ACTION_PLUS, ACTIONS


@dataclass(frozen=True)
class GridConfig:
    grid_size: int = 9
    horizon: int = 20
    dispatch_radius: int = 2
    fleet_size: int = 25
    orders_per_day: int = 100
    cancel_mean: float = 2.5
    cancel_sd: float = 0.5
    cancel_lo: float = 0.0
    cancel_hi: float = 3.0
    gmm_weights: tuple = (1.0 / 3.0, 2.0 / 3.0)
    gmm_means: tuple = ((3.0, 3.0, 2.0), (6.0, 6.0, 14.0))
    gmm_sds: tuple = ((2.0, 2.0, 2.0), (2.0, 2.0, 2.0))
    price_base: float = 1.0
    price_per_cell: float = 0.3
    value_discount: float = 0.95

    def __post_init__(self):
        if abs(sum(self.gmm_weights) - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")


@dataclass
class Order:
    origin: tuple
    destination: tuple
    spawn: int
    deadline: float
    price: float
    served: bool = False

    @property
    def duration(self) -> int:
        return abs(self.origin[0] - self.destination[0]) + abs(self.origin[1] - self.destination[1])


@dataclass
class Driver:
    position: tuple
    busy_until: int = 0
    destination: tuple | None = None


def cancellation_time(rng: np.random.Generator, config: GridConfig = GridConfig()) -> float:
    """Truncated-Gaussian patience, sampled by inverse CDF (one uniform draw)."""
    lo = (config.cancel_lo - config.cancel_mean) / config.cancel_sd
    hi = (config.cancel_hi - config.cancel_mean) / config.cancel_sd
    u = ndtr(lo) + rng.random() * (ndtr(hi) - ndtr(lo))
    return float(config.cancel_mean + config.cancel_sd * ndtri(u))


def _truncated_normal(rng: np.random.Generator, mean, sd, lo, hi) -> np.ndarray:
    """Inverse-CDF sampling of normals conditioned on [lo, hi]; one uniform
    draw per sample keeps the stream's draw count fixed."""
    a = ndtr((lo - mean) / sd)
    b = ndtr((hi - mean) / sd)
    u = a + rng.random(np.shape(mean)) * (b - a)
    return mean + sd * ndtri(u)


def generate_day_orders(rng: np.random.Generator, config: GridConfig = GridConfig()) -> list[Order]:
    """Sample one day's orders from the spatiotemporal mixture.

    Origins and spawn times come from the GMM truncated to the grid/horizon
    (conditioned, then rounded to integers); destinations are uniform on the
    grid. Orders are returned sorted by spawn step; the world activates each
    at its spawn step.
    """
    n = config.orders_per_day
    comps = (rng.random(n) >= config.gmm_weights[0]).astype(int)  # 0 w.p. weight[0]
    means = np.asarray(config.gmm_means)[comps]
    sds = np.asarray(config.gmm_sds)[comps]
    raw = np.empty((n, 3))
    raw[:, :2] = _truncated_normal(rng, means[:, :2], sds[:, :2],
                                   -0.5, config.grid_size - 0.5)
    raw[:, 2] = _truncated_normal(rng, means[:, 2], sds[:, 2],
                                  -0.5, config.horizon - 0.5)
    xy = np.clip(np.rint(raw[:, :2]), 0, config.grid_size - 1).astype(int)
    spawn = np.clip(np.rint(raw[:, 2]), 0, config.horizon - 1).astype(int)
    dest = rng.integers(0, config.grid_size, size=(n, 2))
    patience = _truncated_normal(rng, np.full(n, config.cancel_mean), config.cancel_sd,
                                 config.cancel_lo, config.cancel_hi)
    orders = []
    for i in range(n):
        origin = (int(xy[i, 0]), int(xy[i, 1]))
        destination = (int(dest[i, 0]), int(dest[i, 1]))
        dist = abs(origin[0] - destination[0]) + abs(origin[1] - destination[1])
        orders.append(Order(
            origin=origin,
            destination=destination,
            spawn=int(spawn[i]),
            deadline=float(spawn[i] + patience[i]),
            price=config.price_base + config.price_per_cell * dist,
        ))
    orders.sort(key=lambda o: o.spawn)
    return orders


def spawn_orders(t: int, orders: list[Order]) -> list[Order]:
    """Orders from the day's batch that become visible at step ``t``."""
    return [o for o in orders if o.spawn == t]


def feasible_pairs(drivers: list[Driver], orders: list[Order], t: int,
                   radius: int = 2) -> list[tuple[int, int, int]]:
    """(driver index, order index, pickup distance) for idle drivers and
    alive orders within the dispatch radius."""
    idle = [i for i, d in enumerate(drivers) if d.busy_until <= t]
    alive = [j for j, o in enumerate(orders)
             if not o.served and o.spawn <= t <= o.deadline]
    if not idle or not alive:
        return []
    dpos = np.array([drivers[i].position for i in idle])
    opos = np.array([orders[j].origin for j in alive])
    dist = np.abs(dpos[:, None, :] - opos[None, :, :]).sum(axis=2)
    rows, cols = np.nonzero(dist <= radius)
    return [(idle[a], alive[b], int(dist[a, b])) for a, b in zip(rows, cols)]


_TIE_EPS = 1e-9
_CARD_BONUS = 1e6


def _solve_edges(edges: list[tuple[int, int, float]], maximize_cardinality: bool) -> list[tuple[int, int]]:
    """Exact assignment over an explicit edge list.

    Edge triples are (i, j, cost); lower total cost wins. With
    ``maximize_cardinality`` every feasible edge receives a large bonus so
    cardinality dominates cost. Ties are broken deterministically toward low
    (driver, order) index pairs via an infinitesimal rank preference.
    """
    if not edges:
        return []
    rows = sorted({e[0] for e in edges})
    cols = sorted({e[1] for e in edges})
    row_of = {r: k for k, r in enumerate(rows)}
    col_of = {c: k for k, c in enumerate(cols)}
    n_cols_total = max(cols) + 1
    cost = np.zeros((len(rows), len(cols)))
    feasible = np.zeros((len(rows), len(cols)), dtype=bool)
    for i, j, c in edges:
        r, s = row_of[i], col_of[j]
        bonus = _CARD_BONUS if maximize_cardinality else 0.0
        cost[r, s] = c - bonus + _TIE_EPS * (i * n_cols_total + j)
        feasible[r, s] = True
    row_ind, col_ind = linear_sum_assignment(cost)
    return sorted((rows[r], cols[s]) for r, s in zip(row_ind, col_ind)
                  if feasible[r, s] and cost[r, s] < 0)


def match_distance(edges: list[tuple[int, int, int]]) -> list[tuple[int, int]]:
    """Maximum-cardinality assignment minimizing total pickup distance."""
    return _solve_edges([(i, j, float(d)) for i, j, d in edges], maximize_cardinality=True)


def match_mdp(edges: list[tuple[int, int, int]], drivers: list[Driver], orders: list[Order],
              value: "ValueTable", t: int, discount: float) -> list[tuple[int, int]]:
    """Maximum-weight assignment with weight = price + discounted value at the
    destination minus the value of staying put; non-positive-weight edges are
    left unmatched."""
    weighted = []
    horizon = value.table.shape[2] - 1
    for di, oi, _ in edges:
        order = orders[oi]
        dur = order.duration
        t_arrive = min(t + dur, horizon)
        gain = (order.price
                + discount ** dur * value.at(order.destination, t_arrive)
                - value.at(drivers[di].position, min(t, horizon)))
        if gain > 0:
            weighted.append((di, oi, -gain))
    return _solve_edges(weighted, maximize_cardinality=False)


def match_sinkhorn(cost: np.ndarray, regularization: float, iterations: int
                   ) -> tuple[np.ndarray, list[tuple[int, int]], bool]:
    """Entropic-regularized transport plan between uniform marginals, plus a
    rounded assignment (greedy row argmax with conflict resolution).

    Returns (plan, assignment, converged). ``iterations = 0`` returns the
    unconverged flag immediately.
    """
    if regularization <= 0:
        raise ValueError("regularization must be positive")
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    if iterations <= 0:
        return np.full((n, m), 1.0 / (n * m)), [], False
    a = np.full(n, 1.0 / n)
    b = np.full(m, 1.0 / m)
    # log-domain iterations for numerical stability at small regularization
    log_k = -cost / regularization
    f = np.zeros(n)
    g = np.zeros(m)
    converged = False
    for _ in range(iterations):
        f_new = -regularization * _logsumexp((log_k + g[None, :] / regularization) , axis=1) + regularization * np.log(a)
        g_new = -regularization * _logsumexp((log_k + f_new[:, None] / regularization), axis=0) + regularization * np.log(b)
        if np.max(np.abs(f_new - f)) < 1e-12 and np.max(np.abs(g_new - g)) < 1e-12:
            f, g = f_new, g_new
            converged = True
            break
        f, g = f_new, g_new
    plan = np.exp(log_k + f[:, None] / regularization + g[None, :] / regularization)
    order = np.argsort(-plan.max(axis=1))
    taken = set()
    assignment = []
    for r in order:
        cols = np.argsort(-plan[r])
        for c in cols:
            if c not in taken and plan[r, c] > 0:
                assignment.append((int(r), int(c)))
                taken.add(int(c))
                break
    return plan, sorted(assignment), converged


def _logsumexp(x: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


@dataclass
class ValueTable:
    """Tabular state values over (x, y, t); the terminal layer is zero."""

    table: np.ndarray  # (grid, grid, horizon + 1)

    @staticmethod
    def zeros(config: GridConfig) -> "ValueTable":
        return ValueTable(np.zeros((config.grid_size, config.grid_size, config.horizon + 1)))

    def at(self, position: tuple, t: int) -> float:
        return float(self.table[position[0], position[1], t])


def learn_value(transitions: list[tuple], learning_rate: float, discount: float,
                config: GridConfig = GridConfig(), epochs: int = 1) -> ValueTable:
    """Tabular TD(0) from driver-level transitions.

    Each transition is ((x, y, t), reward, (x', y', t')); the bootstrap target
    discounts by the elapsed steps and the terminal layer stays pinned at 0.
    """
    value = ValueTable.zeros(config)
    horizon = config.horizon
    for _ in range(epochs):
        for (x, y, t), reward, (nx, ny, nt) in transitions:
            nt_c = min(nt, horizon)
            target = reward + discount ** max(nt - t, 0) * value.table[nx, ny, nt_c]
            value.table[x, y, t] += learning_rate * (target - value.table[x, y, t])
        value.table[:, :, horizon] = 0.0
    return value


class DispatchWorld:
    """One day of the dispatch market.

    All randomness (driver start positions, the day's orders, patience draws)
    is realized at construction, so stepping is deterministic and the draw
    count never depends on the actions taken.
    """

    def __init__(self, rng: np.random.Generator, config: GridConfig = GridConfig(),
                 value: ValueTable | None = None):
        self.config = config
        self.value = value if value is not None else ValueTable.zeros(config)
        positions = rng.integers(0, config.grid_size, size=(config.fleet_size, 2))
        self.drivers = [Driver(position=(int(x), int(y))) for x, y in positions]
        self.orders = generate_day_orders(rng, config)
        self.t = 0
        self.last_matches: list[tuple[int, int]] = []

    def observe(self) -> np.ndarray:
        """Summary state: (alive orders, idle drivers) at the current step."""
        alive = sum(1 for o in self.orders
                    if not o.served and o.spawn <= self.t <= o.deadline)
        idle = sum(1 for d in self.drivers if d.busy_until <= self.t)
        return np.array([alive, idle], dtype=float)

    def step(self, action: int) -> float:
        """Match under the selected rule, collect revenue, reposition idle
        drivers; returns the step's total matched price."""
        if action not in ACTIONS:
            raise ValueError("action must be +1 or -1")
        if self.t >= self.config.horizon:
            raise RuntimeError("cannot step past the day's horizon")
        t = self.t
        for driver in self.drivers:
            if driver.busy_until <= t and driver.destination is not None:
                driver.position = driver.destination
                driver.destination = None
        edges = feasible_pairs(self.drivers, self.orders, t, self.config.dispatch_radius)
        if action == ACTION_PLUS:
            matches = match_mdp(edges, self.drivers, self.orders, self.value, t,
                                self.config.value_discount)
        else:
            matches = match_distance(edges)
        revenue = 0.0
        for di, oi in matches:
            order = self.orders[oi]
            order.served = True
            driver = self.drivers[di]
            driver.busy_until = t + order.duration
            driver.destination = order.destination
            revenue += order.price
        self.last_matches = matches
        self._reposition_idle(t, {di for di, _ in matches})
        self.t += 1
        return revenue

    def _reposition_idle(self, t: int, matched_drivers: set):
        alive_origins = [o.origin for o in self.orders
                         if not o.served and o.spawn <= t <= o.deadline]
        counts = {}
        for pos in alive_origins:
            counts[pos] = counts.get(pos, 0) + 1
        size = self.config.grid_size
        for di, driver in enumerate(self.drivers):
            if di in matched_drivers or driver.busy_until > t:
                continue
            x, y = driver.position
            best, best_count = None, 0
            tied = False
            for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if not (0 <= nx < size and 0 <= ny < size):
                    continue
                c = counts.get((nx, ny), 0)
                if c > best_count:
                    best, best_count, tied = (nx, ny), c, False
                elif c == best_count and c > 0:
                    tied = True
            if best is not None and best_count > 0 and not tied:
                driver.position = best


def run_day_trace(world: DispatchWorld, actions) -> list[dict]:
    """Step a fresh world through one day, recording the per-step summary."""
    rows = []
    for t, action in zip(range(world.config.horizon), actions):
        obs = world.observe()
        revenue = world.step(int(action))
        rows.append({
            "t": t,
            "active_orders": int(obs[0]),
            "idle_drivers": int(obs[1]),
            "action": int(action),
            "revenue": revenue,
            "matches": len(world.last_matches),
        })
    return rows


def write_trace_csv(path, rows: list[dict]) -> None:
    """Rollout trace export: (t, active_orders, idle_drivers, action, revenue, matches)."""
    with open(path, "w") as fh:
        fh.write("t,active_orders,idle_drivers,action,revenue,matches\n")
        for r in rows:
            fh.write(f"{r['t']},{r['active_orders']},{r['idle_drivers']},"
                     f"{r['action']},{r['revenue']!r},{r['matches']}\n")


def collect_driver_transitions(world: DispatchWorld, policy_action: int) -> list[tuple]:
    """Run a fresh world to completion under one dispatch rule, recording
    driver-level (state, reward, next state) transitions for value learning."""
    transitions = []
    horizon = world.config.horizon
    while world.t < horizon:
        t = world.t
        pre_positions = [d.position for d in world.drivers]
        pre_idle = [d.busy_until <= t for d in world.drivers]
        world.step(policy_action)
        matched = dict(world.last_matches)
        for di, idle in enumerate(pre_idle):
            if not idle:
                continue
            x, y = pre_positions[di]
            if di in matched:
                order = world.orders[matched[di]]
                nx, ny = order.destination
                transitions.append(((x, y, t), order.price, (nx, ny, t + order.duration)))
            else:
                nx, ny = world.drivers[di].position
                transitions.append(((x, y, t), 0.0, (nx, ny, t + 1)))
    return transitions


def train_value_table(config: GridConfig, rng: np.random.Generator, n_days: int = 200,
                      learning_rate: float = 0.05, epochs: int = 3) -> ValueTable:
    """Learn the value table from distance-policy rollouts (the seed policy)."""
    transitions = []
    for _ in range(n_days):
        world = DispatchWorld(rng, config)
        transitions.extend(collect_driver_transitions(world, policy_action=-1))
    return learn_value(transitions, learning_rate, config.value_discount, config, epochs=epochs)


class DispatchEnv:
    """Experiment-level simulator: ``n_days`` independent dispatch days."""

    def __init__(self, config: GridConfig, value: ValueTable, n_days: int):
        self.config = config
        self.value = value
        self.n_days = n_days
        self.intervals_per_day = config.horizon
        self.obs_dim = 2

    def episode(self, rng: np.random.Generator) -> "_DispatchEpisode":
        return _DispatchEpisode(self, rng)

    def forced_outcome_means(self, action: int, n_rollouts: int, rng: np.random.Generator) -> np.ndarray:
        from .core import generic_forced_outcome_means
        return generic_forced_outcome_means(self, action, n_rollouts, rng)


class _DispatchEpisode:
    def __init__(self, env: DispatchEnv, rng: np.random.Generator):
        self._env = env
        self._rng = rng
        self._day = 1
        self._world = DispatchWorld(rng, env.config, env.value)
        self._done = False

    @property
    def pending(self) -> np.ndarray:
        return self._world.observe()

    @property
    def day(self) -> int:
        return self._day

    def step(self, action: int) -> tuple[float, bool]:
        if self._done:
            raise RuntimeError("episode already finished")
        revenue = self._world.step(action)
        if self._world.t >= self._env.config.horizon:
            if self._day == self._env.n_days:
                self._done = True
            else:
                self._day += 1
                self._world = DispatchWorld(self._rng, self._env.config, self._env.value)
        return revenue, self._done


@dataclass(frozen=True)
class SurrogateModel:
    """Per-step, per-arm linear (outcome, next-summary) predictors with
    Gaussian residuals; sampled summaries are rounded and clipped to their
    supports.

    Arm axis index: 0 for action -1, 1 for action +1. Stratifying the fits by
    arm keeps each arm's predicted mean path on-distribution for the forced
    rollouts that define the Monte Carlo truth.
    """

    outcome_coef: np.ndarray    # (horizon, 2, 3): intercept, obs1, obs2 per arm
    next_coef: np.ndarray       # (horizon - 1, 2, 3, 2)
    outcome_res_mean: np.ndarray  # (horizon, 2)
    outcome_res_sd: np.ndarray    # (horizon, 2)
    next_res_mean: np.ndarray   # (horizon - 1, 2, 2)
    next_res_sd: np.ndarray     # (horizon - 1, 2, 2)
    initial_pool: np.ndarray    # (k, 2) observed day-start summaries
    orders_cap: int
    fleet_size: int

    @property
    def horizon(self) -> int:
        return self.outcome_coef.shape[0]


def _arm_index(action) -> int:
    return (int(action) + 1) // 2


def fit_surrogate(day_obs: np.ndarray, day_actions: np.ndarray, day_outcomes: np.ndarray,
                  config: GridConfig = GridConfig()) -> SurrogateModel:
    """Fit the per-step surrogate from day-level rollouts.

    ``day_obs`` is (n_days, horizon, 2), ``day_actions`` (n_days, horizon),
    ``day_outcomes`` (n_days, horizon). Every step must have seen both
    actions.
    """
    n, horizon, _ = day_obs.shape
    for j in range(horizon):
        if np.ptp(day_actions[:, j]) == 0:
            raise ValueError(f"step {j} observed only one action; surrogate needs both arms")
    out_coef = np.zeros((horizon, 2, 3))
    out_mean = np.zeros((horizon, 2))
    out_sd = np.zeros((horizon, 2))
    nxt_coef = np.zeros((horizon - 1, 2, 3, 2))
    nxt_mean = np.zeros((horizon - 1, 2, 2))
    nxt_sd = np.zeros((horizon - 1, 2, 2))
    for j in range(horizon):
        for arm, action in enumerate((-1, 1)):
            rows = day_actions[:, j] == action
            x = np.column_stack([np.ones(rows.sum()), day_obs[rows, j, 0], day_obs[rows, j, 1]])
            coef, *_ = np.linalg.lstsq(x, day_outcomes[rows, j], rcond=None)
            out_coef[j, arm] = coef
            resid = day_outcomes[rows, j] - x @ coef
            out_mean[j, arm] = resid.mean()
            out_sd[j, arm] = resid.std()
            if j < horizon - 1:
                coef2, *_ = np.linalg.lstsq(x, day_obs[rows, j + 1, :], rcond=None)
                nxt_coef[j, arm] = coef2
                resid2 = day_obs[rows, j + 1, :] - x @ coef2
                nxt_mean[j, arm] = resid2.mean(axis=0)
                nxt_sd[j, arm] = resid2.std(axis=0)
    pool = np.rint(day_obs[:, 0, :])
    pool[:, 0] = np.clip(pool[:, 0], 0, config.orders_per_day)
    pool[:, 1] = np.clip(pool[:, 1], 0, config.fleet_size)
    return SurrogateModel(
        outcome_coef=out_coef,
        next_coef=nxt_coef,
        outcome_res_mean=out_mean,
        outcome_res_sd=out_sd,
        next_res_mean=nxt_mean,
        next_res_sd=nxt_sd,
        initial_pool=pool,
        orders_cap=config.orders_per_day,
        fleet_size=config.fleet_size,
    )


class SurrogateEnv:
    """Fast sampler over the fitted surrogate dynamics."""

    def __init__(self, model: SurrogateModel, n_days: int):
        self.model = model
        self.n_days = n_days
        self.intervals_per_day = model.horizon
        self.obs_dim = 2

    def _clip_obs(self, obs: np.ndarray) -> np.ndarray:
        out = np.rint(obs)
        out[..., 0] = np.clip(out[..., 0], 0, self.model.orders_cap)
        out[..., 1] = np.clip(out[..., 1], 0, self.model.fleet_size)
        return out

    def episode(self, rng: np.random.Generator) -> "_SurrogateEpisode":
        return _SurrogateEpisode(self, rng)

    def forced_outcome_means(self, action: int, n_rollouts: int, rng: np.random.Generator) -> np.ndarray:
        m = self.model
        horizon = m.horizon
        total = n_rollouts * self.n_days
        arm = _arm_index(action)
        idx = rng.integers(len(m.initial_pool), size=total)
        obs = m.initial_pool[idx].astype(float)
        outcome_sum = np.zeros(total)
        for j in range(horizon):
            x = np.column_stack([np.ones(total), obs[:, 0], obs[:, 1]])
            y = (x @ m.outcome_coef[j, arm] + m.outcome_res_mean[j, arm]
                 + m.outcome_res_sd[j, arm] * rng.standard_normal(total))
            outcome_sum += y
            if j < horizon - 1:
                nxt = (x @ m.next_coef[j, arm] + m.next_res_mean[j, arm]
                       + m.next_res_sd[j, arm] * rng.standard_normal((total, 2)))
                obs = self._clip_obs(nxt)
        return (outcome_sum / horizon).reshape(n_rollouts, self.n_days).mean(axis=1)


class _SurrogateEpisode:
    def __init__(self, env: SurrogateEnv, rng: np.random.Generator):
        self._env = env
        self._rng = rng
        self._day = 1
        self._interval = 0
        self._obs = self._draw_initial()
        self._done = False

    def _draw_initial(self) -> np.ndarray:
        pool = self._env.model.initial_pool
        return pool[int(self._rng.integers(len(pool)))].astype(float)

    @property
    def pending(self) -> np.ndarray:
        return self._obs

    @property
    def day(self) -> int:
        return self._day

    def step(self, action: int) -> tuple[float, bool]:
        if self._done:
            raise RuntimeError("episode already finished")
        env, m, j = self._env, self._env.model, self._interval
        arm = _arm_index(action)
        x = np.array([1.0, self._obs[0], self._obs[1]])
        y = float(x @ m.outcome_coef[j, arm] + m.outcome_res_mean[j, arm]
                  + m.outcome_res_sd[j, arm] * self._rng.standard_normal())
        if j < m.horizon - 1:
            nxt = (x @ m.next_coef[j, arm] + m.next_res_mean[j, arm]
                   + m.next_res_sd[j, arm] * self._rng.standard_normal(2))
            self._obs = env._clip_obs(nxt)
            self._interval += 1
        elif self._day < env.n_days:
            self._day += 1
            self._interval = 0
            self._obs = self._draw_initial()
        else:
            self._done = True
        return y, self._done
