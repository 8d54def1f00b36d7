"""Sampled PINN loss on a linear readout of feature jets, with adjoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .pde import build_rowmap


@dataclass
class LossParts:
    total: float
    boundary: float   # mean squared boundary misfit
    physics: float    # mean squared interior residual
    coef_grad: np.ndarray
    jets_bar: np.ndarray


class PinnLoss:
    """``mean(|B u - g|^2) + lam * mean(|F u - f|^2)`` for ``u = features . coef``.

    Works for both the vanilla readout (features = last hidden layer) and the
    extended basis. Feature jets must be evaluated at ``self.points``.
    """

    def __init__(self, problem, colloc, lam, order=None):
        self.problem = problem
        self.rowmap = build_rowmap(problem, colloc, order)
        self.lam = float(lam)

    @property
    def points(self):
        return self.rowmap.points

    @property
    def order(self):
        return self.rowmap.order

    def residuals(self, J, coef):
        rm = self.rowmap
        U = J.reshape(-1, J.shape[2]) @ coef
        rb = rm.SB @ U - rm.G
        rf = rm.SR @ U - rm.F
        if not self.problem.linear:
            opr = self.problem.interior_op
            P, Nf = J.shape[1], rm.N_f
            rf = rf + opr.nonlinearity * U[:Nf] * U[(1 + opr.x_axis) * P:(1 + opr.x_axis) * P + Nf]
        return U, rb, rf

    def __call__(self, J, coef, lam=None, need_jets_bar=True):
        lam = self.lam if lam is None else lam
        rm = self.rowmap
        U, rb, rf = self.residuals(J, coef)
        bnd = float(rb @ rb) / len(rb)
        phys = float(rf @ rf) / len(rf)
        total = bnd + lam * phys
        if not np.isfinite(total):
            bad = np.flatnonzero(~np.isfinite(rf))
            raise NumericError("non-finite PINN loss",
                               index=int(bad[0]) if bad.size else None)
        fb = (2.0 * lam / len(rf)) * rf
        Ub = rm.SB.T @ ((2.0 / len(rb)) * rb) + rm.SR.T @ fb
        if not self.problem.linear:
            opr = self.problem.interior_op
            P, Nf = J.shape[1], rm.N_f
            xo = (1 + opr.x_axis) * P
            Ub[:Nf] += opr.nonlinearity * fb * U[xo:xo + Nf]
            Ub[xo:xo + Nf] += opr.nonlinearity * fb * U[:Nf]
        Jf = J.reshape(-1, J.shape[2])
        coef_grad = Jf.T @ Ub
        jets_bar = np.outer(Ub, coef).reshape(J.shape) if need_jets_bar else None
        return LossParts(total, bnd, phys, coef_grad, jets_bar)
