import time
import numpy as np
from seqdesign import bench, sim_linear
from seqdesign.designs import DesignSpec
from seqdesign.trl.agent import TrlConfig, train
from seqdesign.core import substream

env = sim_linear.LinearEnv(sim_linear.make_setting("i", n_days=30, intervals_per_day=4))
truth = env.true_ate()
EVAL_SEED = 20260801

base = dict(d_model=16, n_heads=2, n_layers=2, d_ff=64, epochs=300,
            episodes_per_epoch=16, grad_steps_per_epoch=8, batch_size=48,
            base_lr=1e-3, epsilon=0.10, alpha=0.8, warmup_days=7, gamma_rl=0.9,
            replay_capacity=60000, norm_episodes=4,
            validation_reps=64, validation_every=20)

baseline = bench.summarize(bench.run_grid(env, [
    DesignSpec("TMDP", "daily_alternation", {"pattern": "alternate"}),
    DesignSpec("NMDP", "daily_alternation", {"pattern": "randomized"}),
], 100, EVAL_SEED, truth))
for s in baseline:
    print(f"baseline {s.design_id}: {s.mse_mean:.5f} +/- {s.ci_half_width:.5f}", flush=True)


def trial(name, seed=11, **kw):
    cfg_kw = dict(base)
    cfg_kw.update(kw)
    cfg = TrlConfig(**cfg_kw)
    t0 = time.time()
    res = train(env, cfg, substream(seed, "acc-trl"), ate_mc=truth)
    dt = time.time() - t0
    rows = bench.run_grid(env, [DesignSpec("TRL", "learned", {"policy": res.policy})],
                          100, EVAL_SEED, truth)
    mse = bench.summarize(rows)[0].mse_mean
    print(f"{name:>24}: eval MSE {mse:.5f}  ({dt:.0f}s)", flush=True)
    return mse


trial("C2 eps0.15", epsilon=0.15)
trial("C3 replay16x64", grad_steps_per_epoch=16, batch_size=64)
trial("C4 gamma0.95", gamma_rl=0.95)
trial("C1 600ep", epochs=600)
