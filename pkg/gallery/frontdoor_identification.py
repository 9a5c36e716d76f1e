"""Identify the effect of a on b when a and b share a hidden cause but the
whole effect passes through a mediator c.

Prints the fixing formula, evaluates it on a concrete binary model and
compares every cell with the ground truth obtained by intervening on the
full model (latent included).
"""

from tcid.cbn import observable_kernel, oracle_do
from tcid.identify import evaluate, one_line_identify
from tcid.instances import frontdoor, frontdoor_model
from tcid.kernel import marginalize

g = frontdoor()
res = one_line_identify(g, {"b"}, {"a"})
print("status :", res.status)
print("formula:", res.formula_string())

m = frontdoor_model()
got = evaluate(res.formula, observable_kernel(m), {"a"})
truth = marginalize(oracle_do(m, {"a"}), ["b"])
for a in (0, 1):
    for b in (0, 1):
        lhs, rhs = got.mass({"b": b}, {"a": a}), truth.mass({"b": b}, {"a": a})
        print(f"  P(b={b} || do(a={a})) formula {lhs}  truth {rhs}  {'ok' if lhs == rhs else 'MISMATCH'}")
