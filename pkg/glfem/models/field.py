"""Complex P1 fields stored as paired real/imaginary nodal arrays."""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Tuple

import numpy as np

from glfem.core.exceptions import AlignmentUndefined, MeshMismatchError, NonFiniteFieldError
from glfem.models import geometry
from glfem.models.mesh import Mesh2D, prolongation_matrix, restriction_indices
from glfem.schemas.field import NormReport

logger = logging.getLogger(__name__)

LP_EXPONENTS = (3, 4, 6)


@dataclass(frozen=True, eq=False)
class ComplexField:
    mesh: Mesh2D
    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = np.array(self.re, dtype=float)
        im = np.array(self.im, dtype=float)
        size = self.mesh.num_nodes
        if re.shape != (size,) or im.shape != (size,):
            raise ValueError(
                f"Nodal arrays must have length {size}, got {re.shape} and {im.shape}"
            )
        if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
            raise NonFiniteFieldError("Field contains NaN or infinite nodal values")
        re.setflags(write=False)
        im.setflags(write=False)
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @classmethod
    def zeros(cls, mesh: Mesh2D) -> "ComplexField":
        return cls(mesh, np.zeros(mesh.num_nodes), np.zeros(mesh.num_nodes))

    @classmethod
    def from_coefficients(cls, mesh: Mesh2D, coefficients: np.ndarray) -> "ComplexField":
        """Build a field from the stacked ``[re; im]`` coefficient vector."""
        size = mesh.num_nodes
        return cls(mesh, coefficients[:size], coefficients[size:2 * size])

    @classmethod
    def from_complex(cls, mesh: Mesh2D, values: np.ndarray) -> "ComplexField":
        return cls(mesh, np.real(values), np.imag(values))

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([self.re, self.im])

    @property
    def values(self) -> np.ndarray:
        return self.re + 1j * self.im

    @property
    def modulus(self) -> np.ndarray:
        return np.hypot(self.re, self.im)

    def times_i(self) -> "ComplexField":
        return ComplexField(self.mesh, -self.im, self.re)

    def rotate(self, theta: float) -> "ComplexField":
        """The gauge-transformed field ``exp(i*theta) * u``."""
        return ComplexField.from_complex(self.mesh, np.exp(1j * theta) * self.values)

    def _same_mesh(self, other: "ComplexField") -> None:
        if other.mesh is not self.mesh and other.mesh.n != self.mesh.n:
            raise MeshMismatchError(f"Fields live on different meshes (n={self.mesh.n} and n={other.mesh.n})")

    def __add__(self, other: "ComplexField") -> "ComplexField":
        self._same_mesh(other)
        return ComplexField(self.mesh, self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        self._same_mesh(other)
        return ComplexField(self.mesh, self.re - other.re, self.im - other.im)

    def scale(self, factor: complex) -> "ComplexField":
        return ComplexField.from_complex(self.mesh, factor * self.values)


def interpolate(f: Callable, mesh: Mesh2D) -> ComplexField:
    """Nodal interpolant of ``f(x, y)``; ``f`` is called once on the node arrays."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    values = np.broadcast_to(np.asarray(f(x, y), dtype=complex), x.shape)
    if not np.all(np.isfinite(values)):
        raise NonFiniteFieldError("Interpolated function returned non-finite values")
    return ComplexField.from_complex(mesh, values)


def constant(value: complex, mesh: Mesh2D) -> ComplexField:
    return interpolate(lambda x, y: value, mesh)


def prolong(u: ComplexField, fine: Mesh2D) -> ComplexField:
    if fine.n == u.mesh.n:
        return ComplexField(fine, u.re, u.im)
    matrix = prolongation_matrix(u.mesh, fine)
    return ComplexField(fine, matrix @ u.re, matrix @ u.im)


def restrict_interpolate(u_fine: ComplexField, coarse: Mesh2D) -> ComplexField:
    idx = restriction_indices(coarse, u_fine.mesh)
    return ComplexField(coarse, u_fine.re[idx], u_fine.im[idx])


def inner(u: ComplexField, v: ComplexField) -> complex:
    """Complex L2 inner product ``∫ u conj(v) dx``."""
    u._same_mesh(v)
    m = geometry.cached_mass(u.mesh)
    mv_re, mv_im = m @ v.re, m @ v.im
    return complex(u.re @ mv_re + u.im @ mv_im, u.im @ mv_re - u.re @ mv_im)


def real_inner(u: ComplexField, v: ComplexField) -> float:
    """The real L2 product ``m(u, v) = Re ∫ u conj(v) dx``."""
    return inner(u, v).real


def norms(u: ComplexField, kappa: float, exponents: Iterable[int] = LP_EXPONENTS) -> NormReport:
    m = geometry.cached_mass(u.mesh)
    k = geometry.cached_stiffness(u.mesh)
    l2_sq = u.re @ (m @ u.re) + u.im @ (m @ u.im)
    h1_sq = u.re @ (k @ u.re) + u.im @ (k @ u.im)
    l2 = float(np.sqrt(max(l2_sq, 0.0)))
    h1 = float(np.sqrt(max(h1_sq, 0.0)))

    geo = geometry.default_geometry(u.mesh)
    modulus = np.hypot(
        geometry.at_quadrature(geo, u.mesh, u.re),
        geometry.at_quadrature(geo, u.mesh, u.im),
    )
    lp = {p: float(np.sum(geo.weights * modulus ** p) ** (1.0 / p)) for p in exponents}

    return NormReport(
        kappa=kappa,
        l2=l2,
        h1_semi=h1,
        hk1=float(np.sqrt(h1 ** 2 + kappa ** 2 * l2 ** 2)),
        lp=lp,
    )


def align_phase(u: ComplexField, v_ref: ComplexField) -> Tuple[float, ComplexField]:
    """Rotate ``u`` so that ``m(e^{iφ}u, i v_ref) = 0`` and ``m(e^{iφ}u, v_ref) >= 0``.

    The rotation angle is ``φ = -arg ∫ u conj(v_ref) dx``, the root of the
    orthogonality condition closest to ``v_ref`` in L2.
    """
    c = inner(u, v_ref)
    scale = np.sqrt(abs(inner(u, u)) * abs(inner(v_ref, v_ref)))
    if scale == 0.0 or abs(c) <= 1e-14 * scale:
        raise AlignmentUndefined("Field is orthogonal to the reference in the complex L2 product")
    phi = -float(np.angle(c))
    logger.debug("phase alignment angle %.6e", phi)
    return phi, u.rotate(phi)
