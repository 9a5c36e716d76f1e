"""Exact causal identification on finite models with input nodes.

The package is organised bottom-up: ``kernel`` (exact Markov kernels),
``graph`` (mixed graphs with input nodes), ``cbn`` (models and the
interventional oracle), ``tci`` (transitional conditional independence),
``calculus`` (Markov property and calculus rules), ``identify`` (fixing
and the one-line ID formula), ``contkernel`` (continuous counterexamples)
and ``cli``.
"""

from .calculus import RuleReport, backdoor, rule1, rule2, rule3, verify_markov
from .cbn import LiCbn, intervene_hard, intervene_soft, observable_kernel, oracle_do, q_factor_oracle
from .graph import (
    MixedGraph,
    NodeKind,
    fix_graph,
    fixable,
    graph,
    id_separated,
    latent_project,
    manipulate_hard,
    manipulate_soft,
    reachable_intrinsic,
    structural,
)
from .identify import bow_witness, emit_formula, evaluate, fix_kernel, one_line_identify
from .kernel import (
    FiniteKernel,
    FiniteSpace,
    absolutely_continuous,
    compose,
    disintegrate,
    marginalize,
    product,
    pushforward,
    strictly_positive,
)
from .tci import TransitionalSpace, tci_check, tci_symmetric

__version__ = "0.1.0"

__all__ = [
    "FiniteKernel",
    "FiniteSpace",
    "LiCbn",
    "MixedGraph",
    "NodeKind",
    "RuleReport",
    "TransitionalSpace",
    "absolutely_continuous",
    "backdoor",
    "bow_witness",
    "compose",
    "disintegrate",
    "emit_formula",
    "evaluate",
    "fix_graph",
    "fix_kernel",
    "fixable",
    "graph",
    "id_separated",
    "intervene_hard",
    "intervene_soft",
    "latent_project",
    "manipulate_hard",
    "manipulate_soft",
    "marginalize",
    "observable_kernel",
    "one_line_identify",
    "oracle_do",
    "product",
    "pushforward",
    "q_factor_oracle",
    "reachable_intrinsic",
    "rule1",
    "rule2",
    "rule3",
    "strictly_positive",
    "structural",
    "tci_check",
    "tci_symmetric",
    "verify_markov",
]
