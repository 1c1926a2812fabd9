"""
Neumann-Laplacian eigenbasis on a 1D interval or 2D rectangle

The basis is the tensor cosine family e_k(x) = prod_j c_k sqrt(1/L_j) cos(k_j pi x_j / L_j)
with c_0 = 1 and c_k = sqrt(2) otherwise. Nonlinear terms are evaluated on the
midpoint grid x_m = (m + 1/2) L / M, where the type-II cosine transform is the
exact quadrature of the L^2 projection as long as the integrand stays below
degree 2M per axis.
"""

import logging
from functools import lru_cache
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy import fft

from models.domain_model import DomainSpec, EigenBasis
from models.field_model import SpectralField, PhysicalField, N_COMPONENTS
from utils.errors import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)


def build_basis(spec: DomainSpec) -> EigenBasis:
    """Eigenvalues and flat ordering of the truncated tensor cosine basis

    Modes are sorted by eigenvalue, ties broken lexicographically by multi-index.
    """
    spec.check()
    d = spec.dimension
    multi = np.indices(spec.n_modes).reshape(d, -1).T
    lam = np.zeros(multi.shape[0])
    for j in range(d):
        lam = lam + (multi[:, j] * np.pi / spec.lengths[j]) ** 2
    keys = tuple(multi[:, j] for j in reversed(range(d))) + (lam,)
    order = np.lexsort(keys)
    return EigenBasis(spec=spec, eigenvalues=lam[order], mode_index=multi[order])


class SpectralSpace:
    """Transforms, differential operators and norms on one truncation S_n"""

    def __init__(self, spec: DomainSpec):
        spec.check()
        self.spec = spec
        self.basis = build_basis(spec)
        self.eigenvalues = self.basis.eigenvalues
        d = spec.dimension
        self._axes = tuple(range(-d, 0))
        self._grid_index = tuple(self.basis.mode_index[:, j] for j in range(d))
        self._analysis_scale = float(np.prod([
            np.sqrt(L / M) for L, M in zip(spec.lengths, spec.quad_points)
        ]))
        self._synthesis_scale = 1.0 / self._analysis_scale
        self.cell_volume = float(np.prod([
            L / M for L, M in zip(spec.lengths, spec.quad_points)
        ]))
        self.axes_points = [
            (np.arange(M) + 0.5) * L / M for L, M in zip(spec.lengths, spec.quad_points)
        ]
        logger.debug(
            "Spectral space: d=%d, modes=%s, grid=%s", d, spec.n_modes, spec.quad_points
        )

    @property
    def n(self) -> int:
        return self.basis.size

    @property
    def lambda_max(self) -> float:
        return self.basis.lambda_max

    # Transforms on raw arrays (leading dimensions are carried through)

    def analyze_array(self, values: np.ndarray) -> np.ndarray:
        """Grid samples (..., *grid) -> coefficients (..., n)"""
        if values.shape[-self.spec.dimension:] != self.spec.grid_shape:
            raise DimensionError(
                f"grid shape {values.shape[-self.spec.dimension:]} != {self.spec.grid_shape}"
            )
        full = fft.dctn(values, type=2, norm='ortho', axes=self._axes)
        return full[(Ellipsis,) + self._grid_index] * self._analysis_scale

    def synthesize_array(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients (..., n) -> grid samples (..., *grid)"""
        if coeffs.shape[-1] != self.n:
            raise DimensionError(f"{coeffs.shape[-1]} coefficients for {self.n} modes")
        padded = np.zeros(coeffs.shape[:-1] + self.spec.grid_shape)
        padded[(Ellipsis,) + self._grid_index] = coeffs
        return fft.idctn(padded, type=2, norm='ortho', axes=self._axes) * self._synthesis_scale

    def gradient_array(self, coeffs: np.ndarray) -> np.ndarray:
        """Partial derivatives on the grid, shape (d, ..., *grid)

        The derivative of a cosine mode is a sine mode of the same index;
        along the differentiated axis the samples come from the inverse
        type-II sine transform, whose index 0 is the first sine.
        """
        d = self.spec.dimension
        out = np.empty((d,) + coeffs.shape[:-1] + self.spec.grid_shape)
        for j in range(d):
            k = self._grid_index[j]
            active = k > 0
            factor = -k[active] * np.pi / self.spec.lengths[j]
            index = list(self._grid_index)
            index = tuple(idx[active] for idx in index)
            index = index[:j] + (index[j] - 1,) + index[j + 1:]
            padded = np.zeros(coeffs.shape[:-1] + self.spec.grid_shape)
            padded[(Ellipsis,) + index] = coeffs[..., active] * factor
            axis_j = self._axes[j]
            values = fft.idst(padded, type=2, norm='ortho', axis=axis_j)
            for other in self._axes:
                if other != axis_j:
                    values = fft.idct(values, type=2, norm='ortho', axis=other)
            out[j] = values * self._synthesis_scale
        return out

    def closed_axes_points(self) -> List[np.ndarray]:
        """Midpoint grid of each axis with both endpoints added"""
        return [np.concatenate(([0.0], pts, [L]))
                for pts, L in zip(self.axes_points, self.spec.lengths)]

    def tabulate(self, coeffs: np.ndarray, axes_points: Sequence[np.ndarray]
                 ) -> Tuple[np.ndarray, np.ndarray]:
        """Values (..., *points) and gradients (d, ..., *points) at arbitrary axis points

        Direct cosine evaluation, used where grid maxima must see the boundary.
        """
        d = self.spec.dimension
        padded = np.zeros(coeffs.shape[:-1] + tuple(self.spec.n_modes))
        padded[(Ellipsis,) + self._grid_index] = coeffs
        cos_tables, sin_tables = [], []
        for N, L, x in zip(self.spec.n_modes, self.spec.lengths, axes_points):
            k = np.arange(N)[:, np.newaxis]
            norm = np.where(k == 0, 1.0, np.sqrt(2.0)) / np.sqrt(L)
            phase = k * np.pi * np.asarray(x)[np.newaxis, :] / L
            cos_tables.append(norm * np.cos(phase))
            sin_tables.append(-norm * (k * np.pi / L) * np.sin(phase))
        values = self._contract(padded, cos_tables)
        grads = np.stack([
            self._contract(padded, cos_tables[:j] + [sin_tables[j]] + cos_tables[j + 1:])
            for j in range(d)
        ])
        return values, grads

    def _contract(self, padded: np.ndarray, tables: Sequence[np.ndarray]) -> np.ndarray:
        out = padded
        first = padded.ndim - self.spec.dimension
        for j, table in enumerate(tables):
            out = np.moveaxis(np.tensordot(out, table, axes=([first + j], [0])), -1, first + j)
        return out

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Midpoint quadrature over the box, reducing the grid axes"""
        return values.sum(axis=self._axes) * self.cell_volume

    # Operators on coefficient arrays

    def laplacian_array(self, coeffs: np.ndarray) -> np.ndarray:
        return -self.eigenvalues * coeffs

    def dealiased(self, op: Callable[..., np.ndarray], *coeffs: np.ndarray,
                  degree: int = 3) -> np.ndarray:
        """Pi_n(op(u, w, ...)) with op applied pointwise on the grid"""
        self.check_capacity(degree)
        values = [self.synthesize_array(c) for c in coeffs]
        return self.analyze_array(op(*values))

    def check_capacity(self, degree: int) -> None:
        """Products of `degree` fields, tested against a mode, must stay exact"""
        for N, M in zip(self.spec.n_modes, self.spec.quad_points):
            if (degree + 1) * (N - 1) >= 2 * M:
                raise ConfigurationError(
                    f"grid of {M} points cannot resolve degree {degree} products of {N} modes",
                    key="domain.quad_points"
                )

    def weights(self, beta: float) -> np.ndarray:
        return (1.0 + self.eigenvalues) ** (2.0 * beta)

    def project_from(self, field: SpectralField) -> SpectralField:
        """Move coefficients from another truncation of the same box"""
        source = field.domain
        if source == self.spec:
            return field.copy()
        if source.dimension != self.spec.dimension or not np.allclose(
                source.lengths, self.spec.lengths):
            raise ConfigurationError("projection between different boxes", key="domain")
        source_basis = get_space(source).basis
        out = np.zeros((N_COMPONENTS, self.n))
        for flat, multi in enumerate(self.basis.mode_index):
            src = source_basis.flat_index(multi)
            if src is not None:
                out[:, flat] = field.coeffs[:, src]
        return SpectralField(out, self.spec)


@lru_cache(maxsize=64)
def get_space(spec: DomainSpec) -> SpectralSpace:
    """Shared, immutable transform tables per DomainSpec"""
    return SpectralSpace(spec)


def analyze(f: PhysicalField) -> SpectralField:
    """Pi_n of grid-sampled data"""
    f.check_shape()
    space = get_space(f.domain)
    return SpectralField(space.analyze_array(f.values), f.domain)


def synthesize(c: SpectralField) -> PhysicalField:
    """Samples of a spectral field on the dealiased grid"""
    c.check_shape()
    space = get_space(c.domain)
    return PhysicalField(space.synthesize_array(c.coeffs), c.domain)


def laplacian(c: SpectralField) -> SpectralField:
    space = get_space(c.domain)
    return c.like(space.laplacian_array(c.coeffs))


def sobolev_norm(c: SpectralField, beta: float) -> float:
    """||(I + A)^beta u||_{L^2}"""
    if beta < -1:
        raise ConfigurationError(f"beta must be >= -1, got {beta}")
    space = get_space(c.domain)
    return float(np.sqrt(np.sum(space.weights(beta) * c.coeffs ** 2)))


def grad_norm_sq(c: SpectralField) -> float:
    """||grad u||^2_{L^2} by Parseval"""
    space = get_space(c.domain)
    return float(np.sum(space.eigenvalues * c.coeffs ** 2))


def dealiased_pointwise(op: Callable[..., np.ndarray], *inputs: SpectralField,
                        degree: int = 3) -> SpectralField:
    """Synthesize, apply op pointwise on R^3 vectors (axis 0), analyze back"""
    if not inputs:
        raise DimensionError("at least one input field is required")
    domain = inputs[0].domain
    if any(c.domain != domain for c in inputs):
        raise DimensionError("inputs live on different domains")
    space = get_space(domain)
    return SpectralField(space.dealiased(op, *(c.coeffs for c in inputs), degree=degree), domain)


def project(c: SpectralField, target: DomainSpec) -> SpectralField:
    """Coefficients of c on another truncation (zero-pad or truncate by multi-index)"""
    return get_space(target).project_from(c)


def gradient_values(c: SpectralField) -> np.ndarray:
    """d_j u on the grid, shape (d, 3, *grid)"""
    return get_space(c.domain).gradient_array(c.coeffs)


def inner(a: SpectralField, b: SpectralField) -> float:
    """L^2 inner product"""
    if a.domain != b.domain:
        raise DimensionError("fields live on different domains")
    return float(np.sum(a.coeffs * b.coeffs))


def lp_norm(c: SpectralField, p: float) -> float:
    """(int |u|^p dx)^(1/p) by midpoint quadrature, |.| Euclidean on R^3"""
    space = get_space(c.domain)
    modulus = np.sqrt(np.sum(space.synthesize_array(c.coeffs) ** 2, axis=0))
    return float(space.integrate(modulus ** p) ** (1.0 / p))


def linf_norm(c: SpectralField) -> float:
    """Grid maximum of |u|"""
    values = get_space(c.domain).synthesize_array(c.coeffs)
    return float(np.sqrt(np.max(np.sum(values ** 2, axis=0))))


def mode_field(spec: DomainSpec, multi: Sequence[int], component: int,
               amplitude: float = 1.0) -> SpectralField:
    """amplitude * e_k in the given component (0-based)"""
    space = get_space(spec)
    flat = space.basis.flat_index(multi)
    if flat is None:
        raise ConfigurationError(f"mode {tuple(multi)} outside truncation {spec.n_modes}")
    field = SpectralField.zeros(spec)
    field.coeffs[component, flat] = amplitude
    return field


def random_field(spec: DomainSpec, rng: np.random.Generator, h1_radius: float = 1.0,
                 decay: float = 2.0, band: Tuple[int, ...] = ()) -> SpectralField:
    """Band-limited random field scaled to a given H^1 graph norm"""
    space = get_space(spec)
    coeffs = rng.standard_normal((N_COMPONENTS, space.n)) / (1.0 + space.eigenvalues) ** (decay / 2)
    if band:
        outside = np.any(space.basis.mode_index >= np.asarray(band), axis=1)
        coeffs[:, outside] = 0.0
    field = SpectralField(coeffs, spec)
    norm = sobolev_norm(field, 0.5)
    if norm > 0:
        field = field * (h1_radius / norm)
    return field
