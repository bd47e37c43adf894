"""Flatten a system's descriptor trees into arrays the integration kernels walk.

Node row layout is ``(kind, i0, i1, 0)``; the meaning of ``i0``/``i1`` per
kind is listed next to the constants.  The same codes are hard-wired in
``_kernel.pyx`` and ``_kernel_py.py``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .funcdesc import (
    DividedBy,
    GaussBump,
    LienardF,
    Negated,
    Polynomial,
    Product,
    Quotient,
    Scaled,
    ShiftedArg,
    SpecialForm,
    Sum,
)

POLY = 0  # params offset, n coeffs
GAUSS = 1  # params offset (c, d, e)
NEG = 2  # child
SUM = 3  # children offset, count
PROD = 4  # children offset, count
SHIFT = 5  # child, params offset
QUOT = 6  # num child, den child
BV_SPECIAL = 10  # psi1 node, psi2 node
BV_LIENARD = 11  # f node
BV_SCALED = 12  # bivariate child, params offset
BV_DIVY = 13  # bivariate child, alpha node


@dataclass(frozen=True)
class Tape:
    nodes: np.ndarray  # int32 (n, 4)
    params: np.ndarray  # float64
    children: np.ndarray  # int32
    phi: int
    g: int
    F: int


class _Builder:
    def __init__(self):
        self.nodes = []
        self.params = []
        self.children = []

    def _add(self, kind, i0=0, i1=0):
        self.nodes.append((kind, i0, i1, 0))
        return len(self.nodes) - 1

    def _par(self, *vals):
        off = len(self.params)
        self.params.extend(float(v) for v in vals)
        return off

    def _kids(self, idxs):
        off = len(self.children)
        self.children.extend(idxs)
        return off

    def fn(self, fd):
        if isinstance(fd, Polynomial):
            return self._add(POLY, self._par(*fd.coeffs), len(fd.coeffs))
        if isinstance(fd, GaussBump):
            return self._add(GAUSS, self._par(fd.c, fd.d, fd.e))
        if isinstance(fd, Negated):
            return self._add(NEG, self.fn(fd.inner))
        if isinstance(fd, (Sum, Product)):
            items = fd.terms if isinstance(fd, Sum) else fd.factors
            idx = [self.fn(t) for t in items]
            return self._add(SUM if isinstance(fd, Sum) else PROD, self._kids(idx), len(idx))
        if isinstance(fd, ShiftedArg):
            child = self.fn(fd.inner)
            return self._add(SHIFT, child, self._par(fd.offset))
        if isinstance(fd, Quotient):
            num = self.fn(fd.num)
            return self._add(QUOT, num, self.fn(fd.den))
        raise TypeError(f"no tape encoding for {type(fd).__name__}")

    def bv(self, F):
        if isinstance(F, SpecialForm):
            p1 = self.fn(F.psi1)
            return self._add(BV_SPECIAL, p1, self.fn(F.psi2))
        if isinstance(F, LienardF):
            return self._add(BV_LIENARD, self.fn(F.f))
        if isinstance(F, Scaled):
            child = self.bv(F.inner)
            return self._add(BV_SCALED, child, self._par(F.k))
        if isinstance(F, DividedBy):
            child = self.bv(F.inner)
            return self._add(BV_DIVY, child, self.fn(F.alpha))
        raise TypeError(f"no tape encoding for {type(F).__name__}")


@lru_cache(maxsize=128)
def compile_system(sys) -> Tape:
    b = _Builder()
    phi = b.fn(sys.phi)
    g = b.fn(sys.g)
    F = b.bv(sys.F)
    return Tape(
        nodes=np.ascontiguousarray(np.array(b.nodes, dtype=np.int32).reshape(-1, 4)),
        params=np.ascontiguousarray(np.array(b.params or [0.0], dtype=np.float64)),
        children=np.ascontiguousarray(np.array(b.children or [0], dtype=np.int32)),
        phi=phi,
        g=g,
        F=F,
    )
