"""Band-pass graph filters from rescaled Beta densities.

The frequency response over the Laplacian spectrum [0, 2] is
f*(x) = 1/2 * B(alpha, beta) * (x/2)^(alpha-1) * (1 - x/2)^(beta-1), with
B the Beta normalization constant from integer factorials. A low-pass
filter uses (alpha, beta); the matching high-pass filter swaps the
parameters. Integer parameters make the response an exact polynomial,
applied by Horner's scheme with sparse matvecs so filtering stays
differentiable and never materializes powers of the Laplacian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import SparseOperator


class FilterError(ValueError):
    """Raised for invalid filter orders."""


@dataclass(frozen=True)
class FilterSpec:
    """Filter order pair; kind selects the low- or high-pass instance."""

    alpha: int
    beta: int
    kind: str = "low"  # "low" or "high"

    def __post_init__(self):
        if self.kind not in ("low", "high"):
            raise FilterError(f"kind must be 'low' or 'high', got {self.kind!r}")

    def swapped(self) -> "FilterSpec":
        return FilterSpec(self.alpha, self.beta,
                          "high" if self.kind == "low" else "low")


@dataclass(frozen=True)
class FilterPolynomial:
    """Exact coefficients c_0..c_k of the frequency response on x in [0, 2]."""

    coeffs: tuple[float, ...]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        acc = np.zeros_like(x)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc


def beta_poly(spec: FilterSpec, allow_zero_order: bool = False) -> FilterPolynomial:
    """Expand the rescaled Beta response into polynomial coefficients.

    Orders must be positive integers. With allow_zero_order, alpha = 0 is
    accepted for sweep experiments by treating the (alpha - 1) exponent as
    max(alpha - 1, 0), which reproduces the alpha = 1 response.
    """
    a, b = int(spec.alpha), int(spec.beta)
    if spec.kind == "high":
        a, b = b, a
    if a < 1:
        if a == 0 and allow_zero_order:
            a = 1
        else:
            raise FilterError(f"alpha must be a positive integer, got {a}")
    if b < 1:
        # a zero lands here when the high-pass swap moves alpha = 0 into
        # the second shape slot
        if b == 0 and allow_zero_order:
            b = 1
        else:
            raise FilterError(f"beta must be a positive integer, got {b}")
    norm = math.factorial(a + b - 1) / (math.factorial(a - 1) * math.factorial(b - 1))
    # 1/2 * norm * (x/2)^(a-1) * sum_j C(b-1, j) (-x/2)^j
    degree = a + b - 2
    coeffs = [0.0] * (degree + 1)
    base = 0.5 * norm / 2 ** (a - 1)
    for j in range(b):
        coeffs[a - 1 + j] = base * math.comb(b - 1, j) * (-0.5) ** j
    return FilterPolynomial(tuple(coeffs))


def apply_filter(poly: FilterPolynomial, lap: SparseOperator, h: Tensor) -> Tensor:
    """Evaluate sum_i c_i L^i H by Horner's scheme; linear and differentiable in H."""
    if h.shape[0] != lap.dim:
        raise FilterError(
            f"Laplacian dim {lap.dim} does not match tensor shape {h.shape}")
    coeffs = poly.coeffs
    out = ad.scale(h, coeffs[-1])
    for c in reversed(coeffs[:-1]):
        out = ad.sparse_apply(lap, out)
        if c != 0.0:
            out = ad.add(out, ad.scale(h, c))
    return out


@dataclass
class FilterBankOutput:
    """Low/high-pass responses on the split subgraphs and the full graph."""

    low_split: Tensor    # low-pass on the homophilic subgraph Laplacian
    high_split: Tensor   # high-pass on the heterophilic subgraph Laplacian
    low_orig: Tensor     # low-pass on the full relation Laplacian
    high_orig: Tensor    # high-pass on the full relation Laplacian


def filter_bank(lap_homo: SparseOperator, lap_heter: SparseOperator,
                lap_orig: SparseOperator, h: Tensor,
                spec: FilterSpec, allow_zero_order: bool = False) -> FilterBankOutput:
    """Apply the low-pass filter to the homophilic subgraph, the high-pass
    filter to the heterophilic subgraph, and both to the original graph.

    Empty subgraphs are legal: their Laplacians degenerate to identity rows
    and the filtered output stays finite.
    """
    low = beta_poly(FilterSpec(spec.alpha, spec.beta, "low"), allow_zero_order)
    high = beta_poly(FilterSpec(spec.alpha, spec.beta, "high"), allow_zero_order)
    return FilterBankOutput(
        low_split=apply_filter(low, lap_homo, h),
        high_split=apply_filter(high, lap_heter, h),
        low_orig=apply_filter(low, lap_orig, h),
        high_orig=apply_filter(high, lap_orig, h),
    )
