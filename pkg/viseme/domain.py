"""
Domain Descriptors
------------------
Generalized moments of a shape domain up to order 3 and the features derived
from them: gravity center, inertia axes, orientation and the eccentricity and
asymmetries that are invariant to translation, rotation and homothety.
"""

import logging
import math
from dataclasses import dataclass, fields
from typing import Tuple

import numpy as np

from .segmenter import cov_eigen

logger = logging.getLogger(__name__)

# Relative tolerance on M(u1^3), scaled by S^2, below which a shape counts as symmetric
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class RawMoments:
    """Exact integer sums of x^p y^q over the domain, p + q <= 3."""
    m0: int
    mx: int
    my: int
    mx2: int
    mxy: int
    my2: int
    mx3: int
    mx2y: int
    mxy2: int
    my3: int

    def __add__(self, other: "RawMoments") -> "RawMoments":
        return RawMoments(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def as_tuple(self) -> Tuple[int, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))


@dataclass(frozen=True)
class CentralMoments:
    s: int
    x_g: float
    y_g: float
    mx2: float
    mxy: float
    my2: float
    mx3: float
    mx2y: float
    mxy2: float
    my3: float


@dataclass(frozen=True)
class PrincipalMoments:
    mu1sq: float
    mu2sq: float
    theta: float
    mu1_3: float
    mu1sq_u2: float
    mu1_u2sq: float
    mu2_3: float
    isotropic: bool = False
    degenerate: bool = False


@dataclass(frozen=True)
class DomainDescriptor:
    """
    Pose and invariants of a domain.

    The asymmetries divide each principal order-3 moment by S * sigma1^3,
    where sigma1 = sqrt(M(u1^2) / S) is the major inertia length.
    """
    x_g: float
    y_g: float
    theta: float
    scale: float
    area: int
    eccentricity: float
    asymmetries: Tuple[float, float, float, float]
    isotropic: bool = False
    degenerate: bool = False

    def invariant_vector(self) -> np.ndarray:
        return np.array([self.eccentricity, *self.asymmetries], dtype=float)

    @property
    def length(self) -> float:
        """Major inertia length sqrt(M(u1^2) / S)."""
        return math.sqrt(self.scale / self.area) if self.area else 0.0


def raw_moments(xs: np.ndarray, ys: np.ndarray) -> RawMoments:
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.size == 0:
        raise ValueError("Cannot compute moments of an empty domain")
    x2, y2 = xs * xs, ys * ys
    sums = (
        xs.size, xs.sum(), ys.sum(),
        x2.sum(), (xs * ys).sum(), y2.sum(),
        (x2 * xs).sum(), (x2 * ys).sum(), (xs * y2).sum(), (y2 * ys).sum(),
    )
    return RawMoments(*(int(v) for v in sums))


def center_moments(m: RawMoments) -> CentralMoments:
    """
    Central moments from exact integer numerators, so that translating the
    domain leaves every value bit-identical.
    """
    s = m.m0
    if s <= 0:
        raise ValueError("Moments of an empty domain")
    mx, my = m.mx, m.my
    s2 = s * s
    return CentralMoments(
        s=s,
        x_g=mx / s,
        y_g=my / s,
        mx2=(s * m.mx2 - mx * mx) / s,
        mxy=(s * m.mxy - mx * my) / s,
        my2=(s * m.my2 - my * my) / s,
        mx3=(s2 * m.mx3 - 3 * s * mx * m.mx2 + 2 * mx ** 3) / s2,
        mx2y=(s2 * m.mx2y - s * my * m.mx2 - 2 * s * mx * m.mxy + 2 * mx * mx * my) / s2,
        mxy2=(s2 * m.mxy2 - s * mx * m.my2 - 2 * s * my * m.mxy + 2 * my * my * mx) / s2,
        my3=(s2 * m.my3 - 3 * s * my * m.my2 + 2 * my ** 3) / s2,
    )


def rotate_third_order(c: CentralMoments, theta: float) -> Tuple[float, float, float, float]:
    """Order-3 moments in axes u1 = x cos + y sin, u2 = -x sin + y cos."""
    co, si = math.cos(theta), math.sin(theta)
    mu1_3 = co ** 3 * c.mx3 + 3 * co * co * si * c.mx2y + 3 * co * si * si * c.mxy2 + si ** 3 * c.my3
    mu1sq_u2 = (-co * co * si * c.mx3 + (co ** 3 - 2 * co * si * si) * c.mx2y
                + (2 * co * co * si - si ** 3) * c.mxy2 + si * si * co * c.my3)
    mu1_u2sq = (si * si * co * c.mx3 + (si ** 3 - 2 * si * co * co) * c.mx2y
                + (co ** 3 - 2 * si * si * co) * c.mxy2 + si * co * co * c.my3)
    mu2_3 = -si ** 3 * c.mx3 + 3 * si * si * co * c.mx2y - 3 * si * co * co * c.mxy2 + co ** 3 * c.my3
    return mu1_3, mu1sq_u2, mu1_u2sq, mu2_3


def principal_moments(c: CentralMoments) -> PrincipalMoments:
    """
    Inertia values, orientation and order-3 moments in the principal frame.

    The orientation is disambiguated by making M(u1^3) non-negative; shapes
    for which it vanishes keep theta in [0, pi).
    """
    mu1sq, mu2sq, theta = cov_eigen(c.mx2, c.mxy, c.my2)
    isotropic = c.mxy == 0.0 and math.isclose(c.mx2, c.my2, rel_tol=1e-12, abs_tol=0.0)
    if isotropic:
        theta = 0.0
    degenerate = mu2sq <= 1e-9 * max(mu1sq, 1.0)
    if degenerate:
        return PrincipalMoments(mu1sq, max(mu2sq, 0.0), theta, 0.0, 0.0, 0.0, 0.0,
                                isotropic=True, degenerate=True)

    third = rotate_third_order(c, theta)
    tol = SYMMETRY_TOL * c.s * c.s
    if third[0] < -tol:
        theta += math.pi
        third = tuple(-v for v in third)
    elif abs(third[0]) <= tol:
        third = (0.0,) + tuple(third[1:])
    return PrincipalMoments(mu1sq, mu2sq, theta % (2 * math.pi), *third, isotropic=isotropic)


def descriptor_from_moments(m: RawMoments) -> DomainDescriptor:
    c = center_moments(m)
    p = principal_moments(c)
    if p.degenerate:
        return DomainDescriptor(c.x_g, c.y_g, p.theta, p.mu1sq, c.s, 0.0, (0.0, 0.0, 0.0, 0.0),
                                isotropic=True, degenerate=True)
    sigma1 = math.sqrt(p.mu1sq / c.s)
    divisor = c.s * sigma1 ** 3
    asymmetries = (p.mu1_3 / divisor, p.mu1sq_u2 / divisor, p.mu1_u2sq / divisor, p.mu2_3 / divisor)
    return DomainDescriptor(
        x_g=c.x_g,
        y_g=c.y_g,
        theta=p.theta,
        scale=p.mu1sq,
        area=c.s,
        eccentricity=min(max(p.mu2sq / p.mu1sq, 0.0), 1.0),
        asymmetries=asymmetries,
        isotropic=p.isotropic,
    )


def domain_descriptor(xs: np.ndarray, ys: np.ndarray) -> DomainDescriptor:
    """Descriptor of the pixel set {(xs[i], ys[i])}."""
    return descriptor_from_moments(raw_moments(xs, ys))


def to_principal(x_g: float, y_g: float, theta: float, xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    co, si = math.cos(theta), math.sin(theta)
    dx = np.asarray(xs, dtype=float) - x_g
    dy = np.asarray(ys, dtype=float) - y_g
    return dx * co + dy * si, -dx * si + dy * co


def own_frame(d: DomainDescriptor, xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Image coordinates to principal-axis coordinates (u1, u2) in pixels."""
    return to_principal(d.x_g, d.y_g, d.theta, xs, ys)


def image_frame(d: DomainDescriptor, u1: np.ndarray, u2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    co, si = math.cos(d.theta), math.sin(d.theta)
    return d.x_g + u1 * co - u2 * si, d.y_g + u1 * si + u2 * co
