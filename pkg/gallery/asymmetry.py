"""Conditional independence with a non-stochastic regime input is one-sided.

In this model a is independent of b given (c, I_a), yet the reverse statement
fails: with (a, c, I_a) held fixed, b still moves with the other inputs
I_b and I_c. The checker reports a concrete violating triple.
"""

from tcid.cbn import observable_kernel
from tcid.instances import asymmetry_model
from tcid.tci import TransitionalSpace, tci_check

space = TransitionalSpace.from_coordinates(observable_kernel(asymmetry_model()))
forward = tci_check(space, "a", "b", ["c", "I_a"])
reverse = tci_check(space, "b", "a", ["c", "I_a"])
print("a ⫫ b | c, I_a :", forward.holds)
print("b ⫫ a | c, I_a :", reverse.holds)
z, (t1, y1), (t2, y2) = reverse.violation
print(f"violation at z = {z}: points {t1} and {t2} share y = {y1} but need different kernels")
