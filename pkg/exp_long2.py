import time
import numpy as np
from seqdesign import bench, sim_linear
from seqdesign.designs import DesignSpec
from seqdesign.trl.agent import TrlConfig, train
from seqdesign.core import substream

env = sim_linear.LinearEnv(sim_linear.make_setting("i", n_days=30, intervals_per_day=4))
truth = env.true_ate()


def trial(name, seed=101, **kw):
    base = dict(d_model=16, n_heads=2, n_layers=2, d_ff=64, epochs=150,
                episodes_per_epoch=16, grad_steps_per_epoch=8, batch_size=48,
                base_lr=1e-3, epsilon=0.1, alpha=0.8, warmup_days=7, gamma_rl=0.9,
                replay_capacity=60000, norm_episodes=4)
    base.update(kw)
    cfg = TrlConfig(**base)
    t0 = time.time()
    res = train(env, cfg, substream(seed, "trl"), ate_mc=truth)
    dt = time.time() - t0
    out = bench.run_grid(env, [DesignSpec("TRL", "learned", {"policy": res.policy})],
                         80, 777, truth)
    mse = bench.summarize(out)[0].mse_mean
    rets = [r.mean_return for r in res.log]
    print(f"{name:>30}: MSE {mse:.5f}  ({dt:.0f}s)  "
          f"ret_first10={np.mean(rets[:10]):.4f} ret_last10={np.mean(rets[-10:]):.4f}", flush=True)
    return mse


trial("K1 2400ep base")
trial("K2 4800ep", epochs=300)
trial("K3 4800ep lr2e-3", epochs=300, base_lr=2e-3)
trial("K4 9600ep", epochs=600)
trial("K5 4800ep gamma1.0", epochs=300, gamma_rl=1.0)
trial("K6 4800ep seed202", epochs=300, seed=202)
