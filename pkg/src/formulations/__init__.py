"""AC-OPF, its convex relaxations and the load-flow recovery problem as smooth NLPs."""

from src.formulations.ac import AC_TAG, LOAD_FLOW_TAG, build_ac_opf, build_load_flow
from src.formulations.envelopes import EnvelopeSet, McCormick, make_envelopes
from src.formulations.evaluation import FeasibilityReport, binding_census, evaluate_feasibility
from src.formulations.nlp import NlpBuilder, NlpProblem, Term
from src.formulations.relaxations import build_qc, build_sdp, build_socp, network_triangles
from src.formulations.solutions import (
    AcSolution,
    RelaxSolution,
    Solution,
    extract_ac_solution,
    extract_relax_solution,
    extract_solution,
    lift_to_w,
)

__all__ = [
    "AC_TAG",
    "LOAD_FLOW_TAG",
    "AcSolution",
    "EnvelopeSet",
    "FeasibilityReport",
    "McCormick",
    "NlpBuilder",
    "NlpProblem",
    "RelaxSolution",
    "Solution",
    "Term",
    "binding_census",
    "build_ac_opf",
    "build_load_flow",
    "build_qc",
    "build_sdp",
    "build_socp",
    "evaluate_feasibility",
    "extract_ac_solution",
    "extract_relax_solution",
    "extract_solution",
    "lift_to_w",
    "make_envelopes",
    "network_triangles",
]
