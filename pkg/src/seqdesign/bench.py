"""Replicated benchmark harness.

Runs (environment x design x estimator) grids: per replication, every design
sees the same environment noise stream (common random numbers) and differs
only in its allocations; the paired estimator's squared error against the
cached Monte Carlo truth is recorded and summarized as an empirical MSE with
a normal-approximation confidence interval.

Configs are plain-text INI files with nested sections; unknown sections or
keys are rejected rather than ignored. See ``default_config_text`` for the
documented schema.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import designs as designs_mod
from . import sim_bootstrap, sim_dispatch, sim_linear
from .core import Simulator, config_hash, run_design, substream
from .estimators import ate_monte_carlo, daily_ols_ate, lstd_estimate
from .designs import DesignSpec


class ConfigError(ValueError):
    """Malformed benchmark configuration."""


_RUN_KEYS = {"replications", "seed", "mc_rollouts", "label"}
_ENV_KEYS = {
    "linear": {"kind", "setting", "n_days", "intervals_per_day", "noise_scale"},
    "bootstrap": {"kind", "n_days", "intervals_per_day", "source", "source_days",
                  "source_seed", "aa_csv", "delta_outcome", "delta_transition",
                  "rho", "phi_coef"},
    "dispatch_surrogate": {"kind", "n_days", "value_days", "surrogate_days", "fit_seed"},
    "dispatch_world": {"kind", "n_days", "value_days", "fit_seed"},
}
_DESIGN_KEYS = {
    "fixed_switchback": {"variant", "period", "start", "estimator", "burn_in", "window"},
    "random_switchback": {"variant", "switch_prob", "estimator", "burn_in", "window"},
    "daily_alternation": {"variant", "pattern", "start", "estimator"},
    "constant": {"variant", "prob", "estimator"},
    "learned": {"variant", "checkpoint", "estimator"},
}
_TRL_KEYS = {"epochs", "episodes_per_epoch", "grad_steps_per_epoch", "batch_size",
             "d_model", "n_heads", "n_layers", "d_ff", "alpha", "gamma_rl", "epsilon",
             "tau", "warmup_days", "window", "base_lr", "schedule_steps", "clip_norm",
             "weight_decay", "replay_capacity", "reward_mode", "norm_episodes",
             "validation_reps", "validation_every", "adam_beta1", "adam_beta2",
             "adam_eps", "train_seed"}

_INT_KEYS = {"replications", "seed", "mc_rollouts", "n_days", "intervals_per_day",
             "source_days", "source_seed", "period", "start", "burn_in", "window",
             "epochs", "episodes_per_epoch", "grad_steps_per_epoch", "batch_size",
             "d_model", "n_heads", "n_layers", "d_ff", "warmup_days", "replay_capacity",
             "norm_episodes", "train_seed", "value_days", "surrogate_days", "fit_seed",
             "schedule_steps", "validation_reps", "validation_every"}
_FLOAT_KEYS = {"noise_scale", "delta_outcome", "delta_transition", "rho", "phi_coef",
               "switch_prob", "prob", "alpha", "gamma_rl", "epsilon", "tau", "base_lr",
               "clip_norm", "weight_decay", "adam_beta1", "adam_beta2", "adam_eps"}


def _coerce(key: str, value: str):
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    return value


@dataclass(frozen=True)
class BenchmarkConfig:
    run: dict
    env: dict
    designs: list[DesignSpec]
    trl: dict = field(default_factory=dict)

    @property
    def replications(self) -> int:
        return self.run["replications"]

    @property
    def seed(self) -> int:
        return self.run["seed"]

    @property
    def mc_rollouts(self) -> int:
        return self.run.get("mc_rollouts", 20000)

    def digest(self) -> str:
        return config_hash({
            "run": self.run,
            "env": self.env,
            "designs": [{"id": d.design_id, "variant": d.variant, "params": d.params,
                         "estimator": d.estimator} for d in self.designs],
            "trl": self.trl,
        })

    def env_digest(self) -> str:
        return config_hash(self.env)


def parse_config(path) -> BenchmarkConfig:
    """Read and validate a benchmark INI file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read(path)

    if "run" not in parser or "env" not in parser:
        raise ConfigError("config must contain [run] and [env] sections")

    run = {}
    for key, value in parser.items("run"):
        if key not in _RUN_KEYS:
            raise ConfigError(f"unknown key {key!r} in [run]")
        run[key] = _coerce(key, value)
    for required in ("replications", "seed"):
        if required not in run:
            raise ConfigError(f"[run] must set {required}")
    if run["replications"] < 2:
        raise ConfigError("replications must be >= 2")

    env = {key: _coerce(key, value) for key, value in parser.items("env")}
    kind = env.get("kind")
    if kind not in _ENV_KEYS:
        raise ConfigError(f"unknown or missing env kind {kind!r}; "
                          f"expected one of {sorted(_ENV_KEYS)}")
    for key in env:
        if key not in _ENV_KEYS[kind]:
            raise ConfigError(f"unknown key {key!r} in [env] for kind {kind}")

    designs: list[DesignSpec] = []
    trl: dict = {}
    for section in parser.sections():
        if section in ("run", "env"):
            continue
        if section == "trl":
            for key, value in parser.items("trl"):
                if key not in _TRL_KEYS:
                    raise ConfigError(f"unknown key {key!r} in [trl]")
                trl[key] = _coerce(key, value)
            continue
        if not section.startswith("design "):
            raise ConfigError(f"unknown section [{section}]")
        design_id = section.split(" ", 1)[1]
        params = {key: _coerce(key, value) for key, value in parser.items(section)}
        variant = params.pop("variant", None)
        if variant not in _DESIGN_KEYS:
            raise ConfigError(f"design {design_id!r} has unknown variant {variant!r}")
        for key in params:
            if key not in _DESIGN_KEYS[variant]:
                raise ConfigError(f"unknown key {key!r} in [design {design_id}]")
        estimator = params.pop("estimator", "")
        designs.append(DesignSpec(design_id=design_id, variant=variant,
                                  params=params, estimator=estimator))
    if not designs:
        raise ConfigError("config declares no [design <id>] sections")
    return BenchmarkConfig(run=run, env=env, designs=designs, trl=trl)


def build_env(env_cfg: dict) -> Simulator:
    """Construct the simulator a config section describes."""
    kind = env_cfg["kind"]
    if kind == "linear":
        config = sim_linear.make_setting(
            env_cfg.get("setting", "i"),
            n_days=env_cfg.get("n_days", 30),
            intervals_per_day=env_cfg.get("intervals_per_day", 4),
        )
        return sim_linear.LinearEnv(config, noise_scale=env_cfg.get("noise_scale", 1.0))
    if kind == "bootstrap":
        source_seed = env_cfg.get("source_seed", 20240501)
        source_days = env_cfg.get("source_days", 40)
        m = env_cfg.get("intervals_per_day", 12)
        if env_cfg.get("source", "synth") == "csv":
            dataset = sim_bootstrap.load_aa_csv(env_cfg["aa_csv"])
        else:
            dataset = sim_bootstrap.synth_aa_generator(source_days, m, substream(source_seed, "aa"))
        params, bank = sim_bootstrap.fit_and_bank(dataset)
        injected = sim_bootstrap.inject_effect(
            params, dataset,
            env_cfg.get("delta_outcome", 0.0), env_cfg.get("delta_transition", 0.0))
        config = sim_bootstrap.BootstrapConfig(
            n_days=env_cfg.get("n_days", 21),
            intervals_per_day=dataset.intervals_per_day,
            delta_outcome=env_cfg.get("delta_outcome", 0.0),
            delta_transition=env_cfg.get("delta_transition", 0.0),
            rho=env_cfg.get("rho", 0.0),
            phi_coef=env_cfg.get("phi_coef", 1.0),
        )
        return sim_bootstrap.BootstrapEnv(injected.params, bank, dataset, config)
    if kind in ("dispatch_surrogate", "dispatch_world"):
        grid = sim_dispatch.GridConfig()
        fit_seed = env_cfg.get("fit_seed", 917)
        value = sim_dispatch.train_value_table(
            grid, substream(fit_seed, "value"), n_days=env_cfg.get("value_days", 60))
        if kind == "dispatch_world":
            return sim_dispatch.DispatchEnv(grid, value, env_cfg.get("n_days", 35))
        model = fit_dispatch_surrogate(grid, value, substream(fit_seed, "surrogate"),
                                       n_days=env_cfg.get("surrogate_days", 120))
        return sim_dispatch.SurrogateEnv(model, env_cfg.get("n_days", 35))
    raise ConfigError(f"unknown env kind {kind!r}")


def fit_dispatch_surrogate(grid: sim_dispatch.GridConfig, value: sim_dispatch.ValueTable,
                           rng: np.random.Generator, n_days: int = 120) -> sim_dispatch.SurrogateModel:
    """Fit the surrogate from whole-day rollouts under each dispatch rule.

    Alternating day-level arms keeps every step covered by both actions while
    matching the constant-arm regimes the Monte Carlo truth evaluates.
    """
    horizon = grid.horizon
    obs = np.zeros((n_days, horizon, 2))
    acts = np.zeros((n_days, horizon), dtype=int)
    outs = np.zeros((n_days, horizon))
    for i in range(n_days):
        world = sim_dispatch.DispatchWorld(rng, grid, value)
        action = 1 if i % 2 == 0 else -1
        for t in range(horizon):
            obs[i, t] = world.observe()
            outs[i, t] = world.step(action)
            acts[i, t] = action
    return sim_dispatch.fit_surrogate(obs, acts, outs, grid)


def make_policy(spec: DesignSpec, env: Simulator):
    if "policy" in spec.params:  # programmatic injection (tests, pre-built TRL)
        return spec.params["policy"]
    if spec.variant == "fixed_switchback":
        return designs_mod.FixedSwitchbackPolicy(spec.params.get("period", 1),
                                                 spec.params.get("start", 1))
    if spec.variant == "random_switchback":
        return designs_mod.RandomSwitchbackPolicy(spec.params.get("switch_prob", 0.5))
    if spec.variant == "daily_alternation":
        return designs_mod.DailyAlternationPolicy(
            env.intervals_per_day,
            randomized=spec.params.get("pattern", "alternate") == "randomized",
            start=spec.params.get("start", 1))
    if spec.variant == "constant":
        prob = spec.params.get("prob", 0.5)
        class _Fixed:
            def allocate(self, history):
                return prob
        return _Fixed()
    if spec.variant == "learned":
        from .trl.agent import load_policy
        return load_policy(spec.params["checkpoint"])
    raise ConfigError(f"unknown design variant {spec.variant!r}")


def env_kind_of(env: Simulator) -> str:
    if isinstance(env, (sim_dispatch.DispatchEnv, sim_dispatch.SurrogateEnv)):
        return "dispatch"
    return "linear"


def _variant_estimator(spec: DesignSpec, env_kind: str) -> str:
    if spec.variant == "random_switchback":
        if "burn_in" in spec.params:
            return "burnin_dim"
        if "window" in spec.params:
            return "ht_carryover"
    return "lstd" if env_kind == "dispatch" else "ols_plugin"


def resolve_estimator(spec: DesignSpec, env: Simulator):
    """Estimator callable (trajectory, truth) -> estimate for a design."""
    name = spec.estimator
    if not name:
        try:
            name = designs_mod.paired_estimator(spec.design_id, env_kind_of(env))
        except ValueError:
            name = _variant_estimator(spec, env_kind_of(env))

    if name == "ols_plugin":
        return name, lambda traj, truth: daily_ols_ate(traj).value
    if name == "lstd":
        return name, lambda traj, truth: lstd_estimate(traj)
    if name == "burnin_dim":
        burn_in = spec.params.get("burn_in", 1)
        return name, lambda traj, truth: designs_mod.burnin_diff_in_means(traj, burn_in)
    if name == "ht_carryover":
        window = spec.params.get("window", 2)
        prob = spec.params.get("switch_prob", 0.5)
        return name, lambda traj, truth: designs_mod.ht_carryover(traj, window, prob)
    if name == "oracle":
        return name, lambda traj, truth: truth
    raise ConfigError(f"unknown estimator {name!r}")


@dataclass(frozen=True)
class ReplicationResult:
    design_id: str
    replication: int
    estimator: str
    estimate: float
    error: float
    failed: bool = False
    message: str = ""


@dataclass(frozen=True)
class MseSummary:
    design_id: str
    mse_mean: float
    ci_half_width: float
    replications: int
    estimator: str = ""


def run_grid(env: Simulator, design_specs: list[DesignSpec], replications: int,
             seed: int, truth: float) -> list[ReplicationResult]:
    """All (design, replication) cells with common random numbers.

    The environment stream is keyed by the replication only, so every design
    sees identical noise within a replication; failures are recorded per cell
    and the grid continues.
    """
    results = []
    for spec in design_specs:
        est_name, estimator = resolve_estimator(spec, env)
        policy = make_policy(spec, env)
        for rep in range(1, replications + 1):
            env_rng = substream(seed, "env", rep)
            policy_rng = substream(seed, "policy", rep)
            try:
                traj = run_design(env, policy, env_rng, policy_rng)
                estimate = float(estimator(traj, truth))
                results.append(ReplicationResult(
                    design_id=spec.design_id, replication=rep, estimator=est_name,
                    estimate=estimate, error=estimate - truth))
            except Exception as err:  # noqa: BLE001 - surfaced per cell by design
                results.append(ReplicationResult(
                    design_id=spec.design_id, replication=rep, estimator=est_name,
                    estimate=float("nan"), error=float("nan"),
                    failed=True, message=str(err)))
    return sorted(results, key=lambda r: (r.design_id, r.replication))


def summarize(results: list[ReplicationResult]) -> list[MseSummary]:
    """Mean squared error per design with a 95% normal-approximation CI."""
    by_design: dict[str, list[ReplicationResult]] = {}
    for row in results:
        by_design.setdefault(row.design_id, []).append(row)
    summaries = []
    for design_id in sorted(by_design):
        rows = [r for r in by_design[design_id] if not r.failed]
        if len(rows) < 2:
            raise ValueError(f"design {design_id!r} has fewer than 2 successful "
                             "replications; cannot summarize")
        sq = np.array([r.error ** 2 for r in rows])
        summaries.append(MseSummary(
            design_id=design_id,
            mse_mean=float(sq.mean()),
            ci_half_width=float(1.96 * sq.std(ddof=1) / np.sqrt(len(sq))),
            replications=len(rows),
            estimator=rows[0].estimator,
        ))
    return summaries


def baseline_grid(design_id: str, intervals_per_day: int) -> list[DesignSpec]:
    """Default hyperparameter grids for the baseline families.

    Switchback periods {1, 2, 4, M}; burn-ins {1, 2}; carryover windows
    {1, 2}; the daily designs have no hyperparameters.
    """
    key = design_id.upper()
    periods = sorted({1, 2, 4, intervals_per_day})
    if key == "WSY":
        return [DesignSpec(design_id, "fixed_switchback", {"period": p}) for p in periods]
    if key == "HW":
        return [DesignSpec(design_id, "random_switchback", {"switch_prob": 0.5, "burn_in": b})
                for b in (1, 2)]
    if key == "BSZ":
        return [DesignSpec(design_id, "random_switchback", {"switch_prob": 0.5, "window": w})
                for w in (1, 2)]
    if key == "XCT":
        return [DesignSpec(design_id, "random_switchback", {"switch_prob": p})
                for p in (0.25, 0.5)]
    if key in ("TMDP", "NMDP"):
        pattern = "alternate" if key == "TMDP" else "randomized"
        return [DesignSpec(design_id, "daily_alternation", {"pattern": pattern})]
    raise ValueError(f"no default grid for design {design_id!r}")


def grid_search_baseline(env: Simulator, design_id: str, grid: list[DesignSpec],
                         replications: int, seed: int, truth: float) -> DesignSpec:
    """Pick the grid point minimizing mean MSE on a held-out seed block.

    The search uses its own seed namespace so tuning never reuses evaluation
    randomness; ties resolve to the earliest grid entry (callers list
    hyperparameters in increasing order).
    """
    if not grid:
        raise ValueError(f"empty hyperparameter grid for design {design_id!r}")
    search_seed = substream(seed, "grid-search", design_id).integers(2 ** 63)
    best_spec, best_mse = None, np.inf
    for spec in grid:
        results = run_grid(env, [spec], replications, int(search_seed), truth)
        mse = summarize(results)[0].mse_mean
        if mse < best_mse - 1e-15:
            best_spec, best_mse = spec, mse
    return best_spec


def write_results_csv(path, results: list[ReplicationResult]) -> None:
    with open(path, "w") as fh:
        fh.write("design,replication,estimator,estimate,error,failed,message\n")
        for r in results:
            fh.write(f"{r.design_id},{r.replication},{r.estimator},"
                     f"{r.estimate!r},{r.error!r},{int(r.failed)},{r.message}\n")


def write_summary_csv(path, summaries: list[MseSummary], env_label: str,
                      truth: float, seed: int) -> None:
    """Fixed schema consumed by the plotting frontend."""
    with open(path, "w") as fh:
        fh.write("design,mse_mean,ci_half_width,reps,env,estimator,truth,seed\n")
        for s in summaries:
            fh.write(f"{s.design_id},{s.mse_mean!r},{s.ci_half_width!r},"
                     f"{s.replications},{env_label},{s.estimator},{truth!r},{seed}\n")


def write_truth_cache(path, value: float, se: float, n_rollouts: int, env_digest: str) -> None:
    payload = {"ate_mc": value, "se": se, "n_rollouts": n_rollouts, "env_digest": env_digest}
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_truth_cache(path, expected_digest: str) -> tuple[float, float, int]:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("env_digest") != expected_digest:
        raise ConfigError("cached truth was computed for a different environment "
                          "(config digest mismatch); rerun mc-truth")
    return float(payload["ate_mc"]), float(payload["se"]), int(payload["n_rollouts"])


def compute_truth(env: Simulator, config: BenchmarkConfig) -> tuple[float, float, int]:
    rng = substream(config.seed, "mc-truth")
    est = ate_monte_carlo(env, config.mc_rollouts, rng)
    return est.value, est.se, est.n_rollouts


def default_config_text() -> str:
    """Documented template for the benchmark config schema."""
    return """\
# seqdesign benchmark configuration (INI syntax, nested sections).
# Unknown sections or keys are rejected.

[run]
replications = 100
seed = 20240601
mc_rollouts = 20000

[env]
kind = linear               ; linear | bootstrap | dispatch_surrogate | dispatch_world
setting = i                 ; linear only: i | ii | iii | iv
n_days = 30
intervals_per_day = 4

[design TMDP]
variant = daily_alternation
pattern = alternate

[design NMDP]
variant = daily_alternation
pattern = randomized

[design WSY]
variant = fixed_switchback
period = 2

[design HW]
variant = random_switchback
switch_prob = 0.5
burn_in = 1

[design BSZ]
variant = random_switchback
switch_prob = 0.5
window = 2

[design XCT]
variant = random_switchback
switch_prob = 0.5

# [design TRL]
# variant = learned
# checkpoint = trl_checkpoint.json

# [trl]                      ; training hyperparameters for `seqdesign train`
# epochs = 150
# train_seed = 7
"""
