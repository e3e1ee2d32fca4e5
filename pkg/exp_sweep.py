import time
import numpy as np
from seqdesign import bench, sim_linear
from seqdesign.designs import DesignSpec
from seqdesign.trl.agent import TrlConfig, train
from seqdesign.core import substream

env = sim_linear.LinearEnv(sim_linear.make_setting("i", n_days=30, intervals_per_day=4))
truth = env.true_ate()


def trial(name, **kw):
    base = dict(d_model=32, n_heads=4, n_layers=2, d_ff=128, epochs=60,
                episodes_per_epoch=8, grad_steps_per_epoch=8, batch_size=32,
                base_lr=1e-3, epsilon=0.1, alpha=0.8, warmup_days=7,
                replay_capacity=20000, norm_episodes=2)
    base.update(kw)
    cfg = TrlConfig(**base)
    t0 = time.time()
    res = train(env, cfg, substream(101, "trl"), ate_mc=truth)
    dt = time.time() - t0
    out = bench.run_grid(env, [DesignSpec("TRL", "learned", {"policy": res.policy})],
                         60, 777, truth)
    mse = bench.summarize(out)[0].mse_mean
    print(f"{name:>22}: MSE {mse:.5f}  ({dt:.0f}s)", flush=True)
    return mse


trial("A gamma0.9 sparse", gamma_rl=0.9)
trial("B gamma0.9 dense", gamma_rl=0.9, reward_mode="dense")
trial("C gamma1.0 dense", gamma_rl=1.0, reward_mode="dense")
trial("D gamma0.8 sparse", gamma_rl=0.8)
trial("E g0.9 sparse lr3e-3", gamma_rl=0.9, base_lr=3e-3)
trial("F g0.9 sparse b64", gamma_rl=0.9, batch_size=64)
