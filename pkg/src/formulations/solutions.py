"""Typed views of solver primal vectors and the AC-to-W lifting."""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from src import config
from src.errors import ProblemStructureError
from src.formulations.branch import branch_arrays, polar_flows
from src.formulations.nlp import NlpProblem
from src.network.model import Network

logger = config.LOGGER


@dataclass(frozen=True)
class AcSolution:
    """Polar operating point: voltages per bus, dispatch per generator, flows per branch."""
    vm: np.ndarray
    va: np.ndarray
    pg: np.ndarray
    qg: np.ndarray
    pf: np.ndarray
    qf: np.ndarray
    pt: np.ndarray
    qt: np.ndarray
    objective: float = math.nan

    @classmethod
    def from_voltages(
        cls, net: Network, vm: np.ndarray, va: np.ndarray, pg: np.ndarray, qg: np.ndarray, objective: float = math.nan
    ) -> AcSolution:
        """Operating point whose stated flows are the exact flows of the voltages."""
        vm, va = np.asarray(vm, dtype=float), np.asarray(va, dtype=float)
        pf, qf, pt, qt = polar_flows(branch_arrays(net), vm, va)
        return cls(vm, va, np.asarray(pg, dtype=float), np.asarray(qg, dtype=float), pf, qf, pt, qt, objective)


@dataclass(frozen=True)
class RelaxSolution:
    """
    Lifted operating point. ``wr``/``wi`` are per branch and oriented from
    the branch's from-bus to its to-bus, whatever orientation the bus pair
    was stored in.
    """
    w: np.ndarray
    wr: np.ndarray
    wi: np.ndarray
    pg: np.ndarray
    qg: np.ndarray
    pf: np.ndarray
    qf: np.ndarray
    pt: np.ndarray
    qt: np.ndarray
    objective: float = math.nan

    @property
    def vm(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.w, 0.0))


Solution = AcSolution | RelaxSolution


def _block(problem: NlpProblem, x: np.ndarray, name: str) -> np.ndarray:
    if name not in problem.layout:
        error = f"{problem.tag} problem has no '{name}' variable block"
        logger.error(error)
        raise ProblemStructureError(error)
    return np.asarray(x, dtype=float)[problem.layout[name]]


def _flows(problem: NlpProblem, x: np.ndarray) -> tuple[np.ndarray, ...]:
    return tuple(_block(problem, x, name) for name in ("pf", "qf", "pt", "qt"))


def extract_ac_solution(problem: NlpProblem, x: np.ndarray, objective: float | None = None) -> AcSolution:
    """Read an AC-OPF or load-flow primal vector."""
    pf, qf, pt, qt = _flows(problem, x)
    return AcSolution(
        vm=_block(problem, x, "vm"),
        va=_block(problem, x, "va"),
        pg=_block(problem, x, "pg"),
        qg=_block(problem, x, "qg"),
        pf=pf,
        qf=qf,
        pt=pt,
        qt=qt,
        objective=problem.objective(x) if objective is None else objective,
    )


def extract_relax_solution(problem: NlpProblem, x: np.ndarray, objective: float | None = None) -> RelaxSolution:
    """Read a SOCP, SDP or QC primal vector, orienting W_ft per branch."""
    branch_pair = np.asarray(problem.metadata["branch_pair"], dtype=np.int64)
    branch_sign = np.asarray(problem.metadata["branch_sign"], dtype=float)
    wr_pair = _block(problem, x, "wr")
    wi_pair = _block(problem, x, "wi")
    pf, qf, pt, qt = _flows(problem, x)
    return RelaxSolution(
        w=_block(problem, x, "w"),
        wr=wr_pair[branch_pair],
        wi=branch_sign * wi_pair[branch_pair],
        pg=_block(problem, x, "pg"),
        qg=_block(problem, x, "qg"),
        pf=pf,
        qf=qf,
        pt=pt,
        qt=qt,
        objective=problem.objective(x) if objective is None else objective,
    )


def extract_solution(problem: NlpProblem, x: np.ndarray, objective: float | None = None) -> Solution:
    if "w" in problem.layout:
        return extract_relax_solution(problem, x, objective)
    return extract_ac_solution(problem, x, objective)


def lift_to_w(problem: NlpProblem, net: Network, sol: AcSolution) -> np.ndarray:
    """
    Primal vector for a lifted problem at the image W = V V^H of ``sol``.

    Blocks the problem does not declare keep their initial values; QC
    auxiliaries (vv, cs, sn) are set to their exact products.
    """
    x = problem.x_init.copy()
    index = net.bus_index
    pairs = problem.metadata["pairs"]
    assert isinstance(pairs, tuple)
    i = np.array([index[a] for a, _ in pairs], dtype=np.int64)
    j = np.array([index[b] for _, b in pairs], dtype=np.int64)
    mag = sol.vm[i] * sol.vm[j]
    delta = sol.va[i] - sol.va[j]
    values = {
        "w": sol.vm * sol.vm,
        "wr": mag * np.cos(delta),
        "wi": mag * np.sin(delta),
        "vm": sol.vm,
        "va": sol.va,
        "vv": mag,
        "cs": np.cos(delta),
        "sn": np.sin(delta),
        "pg": sol.pg,
        "qg": sol.qg,
        "pf": sol.pf,
        "qf": sol.qf,
        "pt": sol.pt,
        "qt": sol.qt,
    }
    for name, cols in problem.layout.items():
        if name in values:
            x[cols] = values[name]
    return x
