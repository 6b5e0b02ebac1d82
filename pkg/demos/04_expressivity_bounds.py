"""The closed-form size and expressivity bounds, evaluated exactly.

These quantities blow up fast: the width sufficient for a uniform
eps-approximation is a power tower, and the input-dimension threshold
beyond which width cannot buy universality is in the tens of billions.
Everything is carried in exact integer or log-space arithmetic, so the
numbers below are exact, not float approximations.
"""

from densecap.bounds import (
    compression_hidden_dim,
    d0_threshold,
    lipschitz_constant,
    non_universality_check,
    vc_lower_bound,
    wrl_hidden_dim,
)

print("amplification of L message-passing rounds, (2B)^L:")
for B, L in ((4, 2), (5, 3), (8, 10)):
    print(f"  B={B}, L={L}: {lipschitz_constant(B, L)}")

print("\ncoarse-kernel width for accuracy eps (no output amplification):")
for eps in ("4", "1", "1/2"):
    print(f"  eps={eps}: {wrl_hidden_dim(eps, 2, 1, 1)}")

print("\nwidth sufficient for uniform eps-approximation of outputs:")
v = compression_hidden_dim(1, 4, 2, 1, 1)
print(f"  eps=1, B=4, L=2: {v}")

print("\nparameters forced by shattering a grid (VC route):")
for eps, d0 in (("1/6", 4), ("1/24", 2), ("1/8", 306)):
    print(f"  eps={eps}, d0={d0}: {vc_lower_bound(eps, d0)}")

print("\ninput-dimension threshold for non-universality:")
thr = d0_threshold(4, 2, 1)
print(f"  B=4, L=2, dL=1: {thr}")

print("\ngap check at the threshold and far below it:")
print(f"  {non_universality_check(4, 2, 1, thr.exact)}")
print(f"  {non_universality_check(4, 2, 1, 1)}")
