"""Back-door adjustment can be wrong once positivity breaks down.

Discrete part: a graph where adjusting for c is licensed, but some (a, c)
combination never occurs, so the adjusted kernel guesses on that row.
Continuous part: the two densities of the interventional and adjusted laws,
their masses and the L1 distance between them at several treatment values.
"""

from tcid.calculus import backdoor
from tcid.contkernel import demo_backdoor_failure
from tcid.instances import backdoor_failure_model

r = backdoor(backdoor_failure_model(), A={"b"}, B={"a"}, F={"c"})
print("graphical condition:", r.graphical_ok)
print("positivity         :", r.positivity_ok)
print("equal on support   :", r.support_equality, "| counterexample row:", r.counterexample)

print("\nx_a    mass(do)  mass(adj)  L1")
for x in (0.1, 0.25, 0.5, 0.75, 1.0):
    d = demo_backdoor_failure(x)
    print(f"{x:<5}  {d['integral_interventional']:.6f}  {d['integral_adjusted']:.6f}   {d['l1_distance']:.4f}")
