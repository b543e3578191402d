"""How many candidate completions are worth sampling? Tabulate the trade-off."""
from __future__ import annotations

from align_retrieve.theory import SamplingTheoryParams, cumulative_error, optimal_n, p_at_least_one, utility

params = SamplingTheoryParams(0.5, 0.0, 1.0, 0.05, 0.05)
print("n   P(>=1 correct)  error  utility")
for n in range(1, 9):
    print(f"{n}   {p_at_least_one(params, n):.4f}          {cumulative_error(params, n):.3f}  {utility(params, n):+.4f}")
print(f"continuous optimum n* = {optimal_n(params):.3f}")

# correlated samples carry less information than independent ones
for rho in (0.0, 0.2, 0.5):
    p = SamplingTheoryParams(0.5, rho)
    print(f"rho={rho}: P(>=1 correct in 2) = {p_at_least_one(p, 2):.4f}, in 4 = {p_at_least_one(p, 4):.4f}")
