"""
Compiling and choosing a backend
================================

Lower a ring circuit onto restricted hardware, check the result against
the source unitary, then rank the bundled backend registry for it.
"""

import numpy as np

from qnnbridge import BUILTIN_PROFILES, CircuitDag, ScoreWeights, gate, transpile, verify
from qnnbridge.hal import load_registry, score_breakdown, select_best

ops = [gate("ry", q, param=0.3 * (q + 1)) for q in range(4)]
ops += [gate("cnot", q, (q + 1) % 4) for q in range(4)]
ring = CircuitDag(4, tuple(ops), "ring4")

##############################################################################
# Transpile for each profile
# --------------------------
# Heavy-hex has no 4-cycle, so the closing CNOT needs SWAPs. The result
# is verified against the source unitary up to a global phase.

for name, profile in BUILTIN_PROFILES.items():
    out = transpile(ring, profile)
    check = verify(ring, out)
    print(f"{name:>20}: swaps={out.report.swap_count} ops={len(out.circuit.ops):3d} "
          f"layout={out.layout} residual={check.residual:.1e}")

##############################################################################
# Score the registry
# ------------------
# Score = alpha * fidelity + beta * connectivity - gamma * queue hours.

registry = load_registry()
weights = ScoreWeights(1.0, 1.0, 0.1)
rows = sorted(((score_breakdown(b, ring, weights), b.name) for b in registry.values()),
              key=lambda r: -r[0].score)
for s, name in rows:
    print(f"{name:>24} {s.score:7.4f}  fid={s.fidelity:.4f} conn={s.connectivity:.2f} "
          f"queue={s.queue_norm:.2f}h")

print("selected:", select_best(registry, ring, weights).name)

##############################################################################
# Rescaling all three weights never changes the winner.

assert select_best(registry, ring, ScoreWeights(10, 10, 1)).name == \
    select_best(registry, ring, weights).name
print(np.round([r[0].score for r in rows], 3))
