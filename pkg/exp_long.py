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
    print(f"{name:>26}: MSE {mse:.5f}  ({dt:.0f}s)  "
          f"ret[0:10]={np.mean(rets[:10]):.4f} ret[-10:]={np.mean(rets[-10:]):.4f}", flush=True)
    return mse


trial("L1 d16 2400ep g0.9")
trial("L2 d16 2400ep g1.0", gamma_rl=1.0)
trial("L3 d16 4800ep g0.9", epochs=300)
trial("L4 d32 2400ep g0.9", d_model=32, n_heads=4, d_ff=128)
