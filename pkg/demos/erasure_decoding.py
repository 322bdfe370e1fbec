"""Lose two parallel x-edges, show the merged bundle rate, then run a few lossy decoding trials."""
import numpy as np

from forge.decoder import TrialEngine
from forge.error_model import ErrorModelParams, effective_rates
from forge.lattice import build_rhg, merge_superchecks, primal_syndrome

g = primal_syndrome(build_rhg(6))
q = effective_rates(ErrorModelParams.uniform(0.003)).axis
print("face-type rates q_x, q_y, q_z:", np.round(q, 5))

lost = [g.edge_index(0, g.vertex(0, 0, 0)), g.edge_index(0, g.vertex(0, 1, 0))]
m = merge_superchecks(g, lost, q)
b = m.edge_bundle[g.edge_index(1, g.vertex(0, 0, 0))]
print(f"{g.n_vertices} checks -> {m.n_super} superchecks")
print(f"bundle multiplicities {tuple(int(x) for x in m.bundle_n[b])}, rate {m.p_l[b]:.6f} = 2 q_y (1 - q_y)")

for p_loss in (0.05, 0.15, 0.3):
    eng = TrialEngine(6, ErrorModelParams.uniform(0.003, p_loss))
    out = [eng.trial(s).status for s in range(200)]
    counts = {k: out.count(k) for k in sorted(set(out))}
    print(f"p_loss={p_loss}: {counts}")
