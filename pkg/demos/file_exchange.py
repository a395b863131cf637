"""
Workers and combiner in separate processes
==========================================

Each worker writes its summary as JSON into a shared directory; the
combiner only ever reads those files.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from wonder import SynthSpec, WonderConfig, generate, partition
from wonder.protocol import combine_isotropic, read_summaries

WORKER = """
import sys, numpy as np
from wonder.protocol import Shard, local_worker, write_summary
X, Y = np.load(sys.argv[1]), np.load(sys.argv[2])
shard = Shard(X=X, Y=Y, shard_id=int(sys.argv[3]))
lam = X.shape[1] / X.shape[0]   # gamma_i / alpha2 with alpha2 = 1 known
write_summary(local_worker(shard, lam), sys.argv[4])
"""

data = generate(SynthSpec(n=3000, p=150, seed=3))
shards = partition(data, WonderConfig(k=4))

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    inbox = tmp / "inbox"
    for s in shards:
        np.save(tmp / f"x{s.shard_id}.npy", s.X)
        np.save(tmp / f"y{s.shard_id}.npy", s.Y)
        subprocess.run(
            [sys.executable, "-c", WORKER, str(tmp / f"x{s.shard_id}.npy"), str(tmp / f"y{s.shard_id}.npy"),
             str(s.shard_id), str(inbox)],
            check=True,
        )
    print(sorted(p.name for p in inbox.iterdir()))
    summaries = read_summaries(inbox)

beta, weights = combine_isotropic(summaries, alpha2=1.0)
print("weights", np.round(weights, 4))
print("estimation error", float(np.sum((beta - data.beta) ** 2)))
