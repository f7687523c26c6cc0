"""Pre-flight: one step + one eval for each canonical spec, tiny run_seed."""
import shutil
import time
from pathlib import Path

from pathstar import experiments as ex
from pathstar.model import Adam, Transformer
from pathstar.training import make_batch, run_seed, train_step, evaluate_model

for make in ex.ALL:
    spec = make()
    model = Transformer(spec.model_config(), seed=0)
    opt = Adam(model.params, lr=spec.lr, betas=(spec.beta1, spec.beta2), eps=spec.adam_eps)
    t0 = time.time()
    batch = make_batch(spec, 0, seed=0)
    metrics = train_step(model, opt, batch, spec)
    t1 = time.time()
    spec.eval_samples = 256
    spec.eval_chunk = 256
    tf, gen = evaluate_model(model, spec, seed=0, round_=0)
    t2 = time.time()
    print(
        f"{spec.name}: loss={metrics['loss']:.3f} aux={metrics['aux_loss']:.3f} "
        f"step={t1 - t0:.2f}s eval={t2 - t1:.2f}s "
        f"tf_seq={tf.seq_acc:.3f} gen_seq={gen.seq_acc:.3f}"
    )

root = Path("/tmp/smoke_runs")
shutil.rmtree(root, ignore_errors=True)
spec = ex.causal_wise()
spec.dim = 16
spec.ff_dim = 32
spec.layers = 2
spec.batch_size = 64
spec.total_samples = 512
spec.eval_every = 256
spec.eval_samples = 64
spec.eval_chunk = 64
rec = ex.run_cached(spec, 0, root=root, log=print)
print("record:", rec.samples_seen, rec.completed, len(rec.points))
rec2 = ex.load_cached(spec, 0, root=root)
print("cache hit:", rec2 is not None and rec2.points == rec.points)
spec.lr = 1e-3  # digest change must invalidate the cache
print("digest invalidates:", ex.load_cached(spec, 0, root=root) is None)
