"""
Galerkin right-hand side of the stochastic Landau-Lifshitz-Bloch equation

    du = (k1 Lap u + g u x Lap u - k2 (1 + mu|u|^2) u) dt
         + sum_k (g u x h_k + k1 h_k) o dW_k

All maps return elements of S_n; products are evaluated on the dealiased grid.
"""

import logging
from typing import Optional

import numpy as np

from models.domain_model import DomainSpec
from models.field_model import SpectralField
from models.params_model import ModelParams, NoiseBasis, DriftBreakdown
from services.spectral_core import get_space, project
from utils.errors import ConfigurationError, RegimeError, SummabilityError

logger = logging.getLogger(__name__)

DEFAULT_NOISE_AMPLITUDE = 0.1
DEFAULT_NOISE_DECAY = 2.0
MIN_NOISE_DECAY = 1.5


def cross_components(a: np.ndarray, b: np.ndarray, axis: int = 0) -> np.ndarray:
    """Cross product of R^3 vectors stored along `axis`"""
    return np.cross(a, b, axisa=axis, axisb=axis, axisc=axis)


def derive_params(T: float, Tc: float, chi: float, kappa1: float, gamma: float,
                  strat_gamma: bool = True) -> ModelParams:
    """kappa2 = kappa1 / chi_parallel and mu = 3T / (5 (T - Tc))"""
    if not T > Tc:
        raise RegimeError(f"above-Curie model only: T={T} must exceed Tc={Tc}")
    if Tc <= 0:
        raise ConfigurationError(f"Tc must be positive, got {Tc}", key="model.curie_temperature")
    if chi <= 0:
        raise ConfigurationError(f"chi_parallel must be positive, got {chi}", key="model.chi_parallel")
    if kappa1 <= 0 or gamma <= 0:
        raise ConfigurationError("kappa1 and gamma must be positive", key="model")
    return ModelParams(
        kappa1=kappa1,
        kappa2=kappa1 / chi,
        gamma=gamma,
        mu=3.0 * T / (5.0 * (T - Tc)),
        strat_gamma=strat_gamma,
        temperature=T,
        curie_temperature=Tc,
        chi_parallel=chi
    )


def w1inf_norm_sq(h: SpectralField) -> float:
    """(||h||_{L^inf} + ||grad h||_{L^inf})^2 from maxima over the grid and the boundary"""
    space = get_space(h.domain)
    values, grads = space.tabulate(h.coeffs, space.closed_axes_points())
    sup = np.sqrt(np.max(np.sum(values ** 2, axis=0)))
    grad_sup = np.sqrt(np.max(np.sum(grads ** 2, axis=(0, 1))))
    return float((sup + grad_sup) ** 2)


def build_noise(fields, recipe: Optional[dict] = None) -> NoiseBasis:
    """NoiseBasis from explicit fields, filling the bound ledger"""
    fields = list(fields)
    if not fields:
        raise ConfigurationError("explicit noise list is empty", key="noise")
    domain = fields[0].domain
    return NoiseBasis(
        domain=domain,
        fields=fields,
        w1inf_bounds=[w1inf_norm_sq(h) for h in fields],
        recipe=dict(recipe or {'kind': 'explicit'})
    )


def build_default_noise(spec: DomainSpec, K: int, amplitude: float = DEFAULT_NOISE_AMPLITUDE,
                        decay: float = DEFAULT_NOISE_DECAY) -> NoiseBasis:
    """h_k = a k^(-s) e_k in component (k-1 mod 3), k = 1..K (flat mode order)"""
    if decay <= MIN_NOISE_DECAY:
        raise SummabilityError(
            f"decay s={decay} must exceed {MIN_NOISE_DECAY} so that "
            "sum_k ||h_k||^2_{W^{1,inf}} stays finite",
            key="noise.decay"
        )
    if K < 0:
        raise ConfigurationError(f"K must be non-negative, got {K}", key="noise.K")
    space = get_space(spec)
    if K > space.n - 1:
        raise ConfigurationError(
            f"K={K} noise modes need {K + 1} resolved modes, truncation has {space.n}",
            key="noise.K"
        )
    recipe = {'kind': 'default', 'K': K, 'amplitude': amplitude, 'decay': decay}
    fields = []
    for k in range(1, K + 1):
        h = SpectralField.zeros(spec)
        h.coeffs[(k - 1) % 3, k] = amplitude * k ** (-decay)
        fields.append(h)
    nb = NoiseBasis(
        domain=spec,
        fields=fields,
        w1inf_bounds=[w1inf_norm_sq(h) for h in fields],
        recipe=recipe
    )
    logger.debug("Noise basis: K=%d, total W1inf bound %.6g", K, nb.total_bound)
    return nb


def project_noise(nb: NoiseBasis, spec: DomainSpec) -> NoiseBasis:
    """Same family on another truncation; every h_k must be resolved there"""
    if nb.domain == spec:
        return nb
    fields = []
    for k, h in enumerate(nb.fields):
        moved = project(h, spec)
        if not np.isclose(np.sum(moved.coeffs ** 2), np.sum(h.coeffs ** 2), rtol=1e-12, atol=0.0):
            raise ConfigurationError(
                f"noise mode {k + 1} is not resolved by truncation {spec.n_modes}",
                key="noise"
            )
        fields.append(moved)
    return NoiseBasis(domain=spec, fields=fields, w1inf_bounds=list(nb.w1inf_bounds),
                      recipe=dict(nb.recipe))


def noise_grid(nb: NoiseBasis) -> np.ndarray:
    """Samples of all h_k, shape (K, 3, *grid)"""
    return nb.grid_values


def noise_gradients(nb: NoiseBasis) -> np.ndarray:
    """d_j h_k on the grid, shape (d, K, 3, *grid)"""
    return nb.grid_gradients


def f1_laplacian(u: SpectralField) -> SpectralField:
    return u.like(get_space(u.domain).laplacian_array(u.coeffs))


def f2_cross_term(u: SpectralField) -> SpectralField:
    """Pi_n(u x Lap u)"""
    space = get_space(u.domain)
    lap = space.laplacian_array(u.coeffs)
    return u.like(space.dealiased(cross_components, u.coeffs, lap, degree=2))


def _cubic(values: np.ndarray, mu: float) -> np.ndarray:
    return (1.0 + mu * np.sum(values ** 2, axis=0)) * values


def f3_cubic_term(u: SpectralField, mu: float) -> SpectralField:
    """Pi_n((1 + mu |u|^2) u)"""
    space = get_space(u.domain)
    return u.like(space.dealiased(lambda v: _cubic(v, mu), u.coeffs, degree=3))


def noise_operators(u: SpectralField, nb: NoiseBasis, p: ModelParams) -> np.ndarray:
    """G_k(u) = Pi_n(g u x h_k + k1 h_k) for all k, shape (K, 3, n)"""
    if nb.size == 0:
        return np.zeros((0,) + u.coeffs.shape)
    space = get_space(u.domain)
    values = space.synthesize_array(u.coeffs)
    crossed = cross_components(values[np.newaxis], noise_grid(nb), axis=1)
    return p.gamma * space.analyze_array(crossed) + p.kappa1 * nb.coeff_stack


def noise_operator(u: SpectralField, k: int, nb: NoiseBasis, p: ModelParams) -> SpectralField:
    """G(u) for the noise field nb.fields[k]

    k is 0-based: k = 0 is h_1, the first field of the family, and
    k = nb.size - 1 is h_K.
    """
    if not 0 <= k < nb.size:
        raise IndexError(f"noise index {k} outside 0..{nb.size - 1}")
    space = get_space(u.domain)
    h = nb.fields[k]
    crossed = space.dealiased(cross_components, u.coeffs, h.coeffs, degree=2)
    return u.like(p.gamma * crossed + p.kappa1 * h.coeffs)


def noise_increment(u: SpectralField, nb: NoiseBasis, p: ModelParams,
                    dW_row: np.ndarray) -> np.ndarray:
    """sum_k G_k(u) dW_k, using linearity in h: one cross product with sum_k h_k dW_k"""
    if nb.size == 0:
        return np.zeros_like(u.coeffs)
    space = get_space(u.domain)
    h_dw = np.tensordot(dW_row, nb.coeff_stack, axes=(0, 0))
    crossed = space.dealiased(cross_components, u.coeffs, h_dw, degree=2)
    return p.gamma * crossed + p.kappa1 * h_dw


def strat_correction(u: SpectralField, nb: NoiseBasis, p: ModelParams) -> SpectralField:
    """(g/2) sum_k Pi_n(G_k(u) x h_k); the factor g can be switched off in ModelParams"""
    if nb.size == 0:
        return SpectralField.zeros(u.domain)
    space = get_space(u.domain)
    G = noise_operators(u, nb, p)
    G_values = space.synthesize_array(G)
    crossed = cross_components(G_values, noise_grid(nb), axis=1).sum(axis=0)
    return u.like(p.correction_factor * space.analyze_array(crossed))


def drift_strat(u: SpectralField, p: ModelParams) -> SpectralField:
    """Stratonovich drift k1 F1 + g F2 - k2 F3 (no correction)"""
    f1 = f1_laplacian(u)
    f2 = f2_cross_term(u)
    f3 = f3_cubic_term(u, p.mu)
    return u.like(p.kappa1 * f1.coeffs + p.gamma * f2.coeffs - p.kappa2 * f3.coeffs)


def drift_ito(u: SpectralField, nb: NoiseBasis, p: ModelParams) -> DriftBreakdown:
    """Ito drift F_n split into its parts"""
    f1 = f1_laplacian(u)
    f2 = f2_cross_term(u)
    f3 = f3_cubic_term(u, p.mu)
    corr = strat_correction(u, nb, p)
    total = p.kappa1 * f1.coeffs + p.gamma * f2.coeffs - p.kappa2 * f3.coeffs + corr.coeffs
    return DriftBreakdown(f1=f1, f2=f2, f3=f3, strat_correction=corr, total=u.like(total))


def effective_field(u: SpectralField, p: ModelParams) -> SpectralField:
    """Pi_n H_eff = Lap u - (1/chi)(1 + mu|u|^2) u with 1/chi = k2/k1"""
    f1 = f1_laplacian(u)
    f3 = f3_cubic_term(u, p.mu)
    return u.like(f1.coeffs - (p.kappa2 / p.kappa1) * f3.coeffs)
