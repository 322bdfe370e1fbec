"""Compile the depth-4 tree protocol, list its delay-loop collisions and check the final state."""
from forge.protocols import compile_tree, verify_collisions, verify_protocol_seeds

schedule, timing = compile_tree(4, 1)
print(f"{schedule.emitted} photons, delay loop = {timing.Delta} (units of tau1 of the first layer)")
for n in range(4):
    print(f"  layer {n}: tau1={timing.tau1[n]} tau2={timing.tau2[n]} start={timing.t_init[n]}")

report = verify_collisions(schedule)
print("collisions ok:", report.ok)
for o in report.overlaps:
    print(f"  photon {o.left + 1} ({o.left_bin}) meets photon {o.right + 1} ({o.right_bin})")

ok = verify_protocol_seeds(schedule, range(20))
print(f"state check over 20 measurement-outcome seeds: {sum(ok)}/20")
