"""Why the bow graph (a -> b plus a hidden common cause) is not identifiable.

Two explicit models produce the same observable table P(a, b), yet they
disagree about what happens to b under do(a).
"""

from tcid.cbn import observable_kernel, oracle_do
from tcid.graph import latent_project
from tcid.identify import BOW, bow_witness, interventional_gap, one_line_identify

res = one_line_identify(latent_project(BOW), {"b"}, {"a"})
print("identification:", res.status, "| blocking district:", sorted(res.failing_district))

m1, m2 = bow_witness()
print("same observables:", observable_kernel(m1) == observable_kernel(m2))
for name, m in (("model 1", m1), ("model 2", m2)):
    k = oracle_do(m, {"a"})
    print(f"{name}: P(b=1 || do(a=0)) = {k.mass({'b': 1}, {'a': 0})}, P(b=1 || do(a=1)) = {k.mass({'b': 1}, {'a': 1})}")
print("largest interventional gap:", interventional_gap(m1, m2))
