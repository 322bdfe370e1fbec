"""Optimal cluster size vs fiber loss from the exponential ansatz, plus the maximum fiber length."""
from forge.analysis import eta_from_db, optimal_L
from forge.error_model import l_max, loss_per_qubit_db

alpha, beta, p = -0.0053 / 0.249, 0.0053, 1e-3
for db in (1e-3, 3e-3, 5.7e-3, 1e-2):
    L, p_opt = optimal_L(eta_from_db(db), p, alpha, beta)
    print(f"{db:.1e} dB/qubit: L_opt = {L:6.2f}, p_logic = {p_opt:.2e}")

print("loss per qubit for 3.5 dB/km fiber, 7.6 ns per qubit:",
      f"{loss_per_qubit_db(3.5, 2.13e8, 7.6e-9):.2e} dB")
for tau in (50e-9, 1e-9, 1e-10):
    print(f"tau={tau:.0e} s: largest L below the percolation bound = {l_max(0.2, 2.13e8, tau):.1f}")
