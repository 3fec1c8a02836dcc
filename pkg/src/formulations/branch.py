"""
Pi-model branch coefficients.

An ideal transformer with ratio ``tap * exp(j * shift)`` sits at the
from-side in series with the pi-section; half of ``charge_b`` is attached at
each terminal. With ``Y = [[Yff, Yft], [Ytf, Ytt]]`` the terminal flows are

    S_f = conj(Yff) |V_f|^2 + conj(Yft) V_f conj(V_t)
    S_t = conj(Ytt) |V_t|^2 + conj(Ytf) V_t conj(V_f)

which in polar or lifted (W) coordinates become the real-valued
expressions in ``polar_flows`` and ``lifted_flows``.
"""

from __future__ import annotations

from dataclasses import dataclass
import cmath

import numpy as np

from src.network.model import Branch, Network, branch_admittance


@dataclass(frozen=True, slots=True)
class BranchCoefficients:
    g_ff: float
    b_ff: float
    g_ft: float
    b_ft: float
    g_tf: float
    b_tf: float
    g_tt: float
    b_tt: float


def branch_coefficients(branch: Branch) -> BranchCoefficients:
    y = branch_admittance(branch)
    y_sh = 0.5j * branch.charge_b
    ratio = branch.tap * cmath.exp(1j * branch.shift)
    y_ff = (y + y_sh) / (branch.tap * branch.tap)
    y_ft = -y / ratio.conjugate()
    y_tf = -y / ratio
    y_tt = y + y_sh
    return BranchCoefficients(
        y_ff.real, y_ff.imag, y_ft.real, y_ft.imag, y_tf.real, y_tf.imag, y_tt.real, y_tt.imag
    )


@dataclass(frozen=True)
class BranchArrays:
    """Column view of all branches, indexed by branch position."""
    f: np.ndarray
    t: np.ndarray
    g_ff: np.ndarray
    b_ff: np.ndarray
    g_ft: np.ndarray
    b_ft: np.ndarray
    g_tf: np.ndarray
    b_tf: np.ndarray
    g_tt: np.ndarray
    b_tt: np.ndarray
    s_max: np.ndarray
    angle_max: np.ndarray


def branch_arrays(net: Network) -> BranchArrays:
    coeffs = [branch_coefficients(br) for br in net.branches]

    def col(name: str) -> np.ndarray:
        return np.array([getattr(c, name) for c in coeffs], dtype=float)

    return BranchArrays(
        f=np.array([net.bus_index[br.from_bus] for br in net.branches], dtype=np.int64),
        t=np.array([net.bus_index[br.to_bus] for br in net.branches], dtype=np.int64),
        g_ff=col("g_ff"),
        b_ff=col("b_ff"),
        g_ft=col("g_ft"),
        b_ft=col("b_ft"),
        g_tf=col("g_tf"),
        b_tf=col("b_tf"),
        g_tt=col("g_tt"),
        b_tt=col("b_tt"),
        s_max=np.array([br.s_max for br in net.branches], dtype=float),
        angle_max=np.array([br.angle_max for br in net.branches], dtype=float),
    )


def polar_flows(arr: BranchArrays, vm: np.ndarray, va: np.ndarray) -> tuple[np.ndarray, ...]:
    """(p_f, q_f, p_t, q_t) for every branch from bus voltages."""
    vf, vt = vm[arr.f], vm[arr.t]
    delta = va[arr.f] - va[arr.t]
    return lifted_flows(arr, vf * vf, vt * vt, vf * vt * np.cos(delta), vf * vt * np.sin(delta))


def lifted_flows(
    arr: BranchArrays, w_f: np.ndarray, w_t: np.ndarray, wr: np.ndarray, wi: np.ndarray
) -> tuple[np.ndarray, ...]:
    """(p_f, q_f, p_t, q_t) from W_ff, W_tt and W_ft = wr + j wi."""
    p_f = arr.g_ff * w_f + arr.g_ft * wr + arr.b_ft * wi
    q_f = -arr.b_ff * w_f + arr.g_ft * wi - arr.b_ft * wr
    p_t = arr.g_tt * w_t + arr.g_tf * wr - arr.b_tf * wi
    q_t = -arr.b_tt * w_t - arr.g_tf * wi - arr.b_tf * wr
    return p_f, q_f, p_t, q_t
