"""Exact phase-field geometry for the circle-in-circle domain.

The computational domain is the annulus D = {r_inner < |x| < r_outer}
embedded in a bounding box.  All geometric quantities (signed distance,
phase field, interface weights, closest boundary points, constant-normal
extensions) are evaluated analytically from the radii; nothing is ever
interpolated from a mesh.

Conventions:
    d(x)      signed distance to the annulus boundary, negative inside D
    phi(x)    = S(-d/eps), piecewise-linear sigmoid profile
    omega(x)  = (1 + phi)/2, smeared indicator of D
    |grad omega| = 1/(2 eps) on the open band {|d| < eps}, 0 elsewhere

The two interface bands (around r_inner and r_outer) are kept disjoint by
an admissibility cap on eps.  The weights gamma_H / gamma_B are sharp
radial indicators split at ``split_radius``; they are exact here because
neither band can reach the split radius for admissible eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Hard cap keeping both bands clear of the split radius with margin.
EPS_MAX = 0.25


class BandError(ValueError):
    """Raised for points outside the interface band or inadmissible eps."""


@dataclass(frozen=True)
class AnnulusGeometry:
    """Circle-in-circle domain: annulus between two concentric circles."""

    r_inner: float = 0.3
    r_outer: float = 1.0
    split_radius: float = 0.65

    def __post_init__(self):
        if not (0.0 < self.r_inner < self.split_radius < self.r_outer):
            raise ValueError(
                f"need 0 < r_inner < split_radius < r_outer, got "
                f"({self.r_inner}, {self.split_radius}, {self.r_outer})"
            )

    @property
    def eps_admissible(self) -> float:
        """Largest admissible eps: the bands must stay clear of the split
        radius, with a safety margin (0.25 for the default radii)."""
        cap = EPS_MAX * (self.r_outer - self.r_inner) / 0.7
        return min(
            self.split_radius - self.r_inner,
            self.r_outer - self.split_radius,
            cap,
        )

    def signed_distance(self, points) -> np.ndarray:
        """max(r_inner - |x|, |x| - r_outer); negative inside the annulus."""
        pts = np.asarray(points, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        return np.maximum(self.r_inner - r, r - self.r_outer)

    def boundary_weight(self, which: str, points) -> np.ndarray:
        """Sharp indicator gamma_H (inner side) or gamma_B (outer side)."""
        pts = np.asarray(points, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        inner = (r < self.split_radius).astype(float)
        if which == "H":
            return inner
        if which == "B":
            return 1.0 - inner
        raise ValueError(f"which must be 'H' or 'B', got {which!r}")


def sigmoid_profile(t) -> np.ndarray:
    """Piecewise-linear sigmoid: identity on (-1, 1), clipped to +-1 outside."""
    return np.clip(np.asarray(t, dtype=float), -1.0, 1.0)


@dataclass(frozen=True)
class PhaseField:
    """Phase-field representation phi = S(-d/eps) of an annulus."""

    geometry: AnnulusGeometry = field(default_factory=AnnulusGeometry)
    epsilon: float = 0.125

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise BandError(f"eps must be positive, got {self.epsilon}")
        if self.epsilon > self.geometry.eps_admissible:
            raise BandError(
                f"eps = {self.epsilon} exceeds admissible bound "
                f"{self.geometry.eps_admissible}; interface bands would "
                f"overlap the split radius"
            )

    def phase_and_weights(self, points):
        """Evaluate (phi, omega, |grad omega|) at the given points.

        The band indicator is exact: |grad omega| is 1/(2 eps) strictly
        inside {|d| < eps} and 0 outside, with no smoothing of the edge.
        """
        d = self.geometry.signed_distance(points)
        phi = sigmoid_profile(-d / self.epsilon)
        omega = 0.5 * (1.0 + phi)
        gradmag = np.where(np.abs(d) < self.epsilon, 0.5 / self.epsilon, 0.0)
        return phi, omega, gradmag

    def in_band(self, points) -> np.ndarray:
        d = self.geometry.signed_distance(points)
        return np.abs(d) < self.epsilon

    def closest_boundary_point(self, points):
        """Project band points radially onto the nearest boundary circle.

        Returns (xbar, d) with xbar on the inner or outer circle and
        x = xbar + d * n(xbar), n the outward normal of D.  Raises
        BandError for points outside the band or at the origin.
        """
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        r = np.hypot(pts[:, 0], pts[:, 1])
        if np.any(r < 1e-300):
            raise BandError("closest boundary point undefined at the origin")
        geo = self.geometry
        d = np.maximum(geo.r_inner - r, r - geo.r_outer)
        if np.any(np.abs(d) >= self.epsilon):
            bad = np.flatnonzero(np.abs(d) >= self.epsilon)
            raise BandError(
                f"{bad.size} point(s) outside the band |d| < {self.epsilon}; "
                f"first offender {pts[bad[0]]}"
            )
        # nearest circle by the split radius (bands never straddle it)
        radius = np.where(r < geo.split_radius, geo.r_inner, geo.r_outer)
        xbar = pts * (radius / r)[:, None]
        if single:
            return xbar[0], float(d[0])
        return xbar, d

    def extend_constant(self, boundary_values, which: str, points):
        """Constant-normal extension E_H / E_B of a boundary function.

        ``boundary_values`` is a callable of the polar angle theta.  Points
        must lie in the band where the matching weight gamma_which is one.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        gamma = self.geometry.boundary_weight(which, pts)
        if np.any(gamma == 0.0):
            raise BandError(f"point(s) outside the gamma_{which} = 1 region")
        xbar, _ = self.closest_boundary_point(pts)
        theta = np.arctan2(xbar[:, 1], xbar[:, 0])
        vals = np.asarray(boundary_values(theta), dtype=float)
        if np.asarray(points).ndim == 1:
            return float(vals[0])
        return vals


@dataclass(frozen=True)
class ConductivityTensor:
    """Anisotropic conductivity M = sigma_t * t t^T + sigma_r * n n^T.

    t and n are the unit tangential/radial directions of the polar frame,
    so the boundary normal is an eigenvector of M everywhere (radial
    eigenvalue sigma_r).  Ellipticity constant m = min(sigma) when
    max(sigma) <= 1/min(sigma).
    """

    sigma_t: float = 1.0
    sigma_r: float = 0.3

    def __post_init__(self):
        if self.sigma_t <= 0 or self.sigma_r <= 0:
            raise ValueError("eigenvalues of M must be positive")

    @classmethod
    def identity(cls) -> "ConductivityTensor":
        return cls(sigma_t=1.0, sigma_r=1.0)

    @property
    def ellipticity(self) -> float:
        return min(self.sigma_t, self.sigma_r, 1.0 / max(self.sigma_t, self.sigma_r))

    @property
    def anisotropy_exponent(self) -> float:
        """Mode-k separable solutions behave like r^(+-k * this)."""
        return float(np.sqrt(self.sigma_t / self.sigma_r))

    def evaluate(self, points) -> np.ndarray:
        """Tensor components at points, shape (..., 2, 2).

        At the origin the frame is undefined; the isotropic average is
        returned there (always multiplied by omega = 0 in assemblies).
        """
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        r2 = x * x + y * y
        safe = np.where(r2 > 0.0, r2, 1.0)
        c2 = np.where(r2 > 0.0, x * x / safe, 0.5)
        s2 = np.where(r2 > 0.0, y * y / safe, 0.5)
        cs = np.where(r2 > 0.0, x * y / safe, 0.0)
        m = np.empty(pts.shape[:-1] + (2, 2))
        m[..., 0, 0] = self.sigma_t * s2 + self.sigma_r * c2
        m[..., 1, 1] = self.sigma_t * c2 + self.sigma_r * s2
        m[..., 0, 1] = (self.sigma_r - self.sigma_t) * cs
        m[..., 1, 0] = m[..., 0, 1]
        return m


# ---------------------------------------------------------------------------
# Reference quadratures in polar coordinates.  These integrate the *actual*
# weight functions of a PhaseField to near machine precision and serve as
# the independent oracle for all mesh-based integrals.
# ---------------------------------------------------------------------------


def band_integral(field: PhaseField, g, which: str, n_theta: int = 256,
                  n_radial: int = 24) -> float:
    """Quadrature of int g(x) |grad omega| gamma_which dx over one band.

    Tensor-product rule in polar coordinates: Gauss-Legendre across the
    band width, trapezoid (spectrally accurate for periodic integrands)
    in the angle.  ``g`` maps an (n, 2) array of points to values.
    """
    geo = field.geometry
    radius = geo.r_inner if which == "H" else geo.r_outer
    eps = field.epsilon
    gl_t, gl_w = np.polynomial.legendre.leggauss(n_radial)
    rr = radius + eps * gl_t
    wr = eps * gl_w
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    wt = 2.0 * np.pi / n_theta
    R, T = np.meshgrid(rr, theta, indexing="ij")
    pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
    _, _, gradmag = field.phase_and_weights(pts)
    gamma = geo.boundary_weight(which, pts)
    vals = np.asarray(g(pts), dtype=float)
    integrand = (vals * gradmag * gamma).reshape(len(rr), n_theta)
    # polar area element r dr dtheta
    return float(np.einsum("i,ij,ij->", wr, integrand, R) * wt)


def bulk_integral(field: PhaseField, g, n_theta: int = 256,
                  n_radial: int = 24) -> float:
    """Quadrature of int g(x) omega(x) dx over the support of omega.

    The radial axis is split at every kink of omega (band edges) so each
    piece is smooth; Gauss-Legendre is applied per piece.
    """
    geo = field.geometry
    eps = field.epsilon
    breaks = np.array([
        geo.r_inner - eps, geo.r_inner + eps,
        geo.r_outer - eps, geo.r_outer + eps,
    ])
    gl_t, gl_w = np.polynomial.legendre.leggauss(n_radial)
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    wt = 2.0 * np.pi / n_theta
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        rr = 0.5 * (hi + lo) + 0.5 * (hi - lo) * gl_t
        wr = 0.5 * (hi - lo) * gl_w
        R, T = np.meshgrid(rr, theta, indexing="ij")
        pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
        _, omega, _ = field.phase_and_weights(pts)
        vals = np.asarray(g(pts), dtype=float)
        integrand = (vals * omega).reshape(len(rr), n_theta)
        total += float(np.einsum("i,ij,ij->", wr, integrand, R) * wt)
    return total


def ring_diffuse_integral(field: PhaseField, g, r_lo: float, r_hi: float,
                          n_theta: int = 256, n_radial: int = 24) -> float:
    """Quadrature of int g omega dx restricted to the ring r_lo < r < r_hi.

    Splits the radial axis at the band kinks of omega so each Gauss piece
    is smooth.  Used to isolate the one-sided band defect of a single
    interface (the two-sided defects of this geometry cancel exactly).
    """
    geo = field.geometry
    eps = field.epsilon
    kinks = [geo.r_inner - eps, geo.r_inner + eps,
             geo.r_outer - eps, geo.r_outer + eps]
    breaks = sorted({r_lo, r_hi, *[k for k in kinks if r_lo < k < r_hi]})
    gl_t, gl_w = np.polynomial.legendre.leggauss(n_radial)
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    wt = 2.0 * np.pi / n_theta
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        rr = 0.5 * (hi + lo) + 0.5 * (hi - lo) * gl_t
        wr = 0.5 * (hi - lo) * gl_w
        R, T = np.meshgrid(rr, theta, indexing="ij")
        pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
        _, omega, _ = field.phase_and_weights(pts)
        vals = np.asarray(g(pts), dtype=float)
        integrand = (vals * omega).reshape(len(rr), n_theta)
        total += float(np.einsum("i,ij,ij->", wr, integrand, R) * wt)
    return total


def annulus_integral(geometry: AnnulusGeometry, g, n_theta: int = 256,
                     n_radial: int = 48, r_lo: float = None,
                     r_hi: float = None) -> float:
    """Quadrature of int g dx over the exact (sharp) annulus, optionally
    restricted to a sub-ring."""
    gl_t, gl_w = np.polynomial.legendre.leggauss(n_radial)
    lo = geometry.r_inner if r_lo is None else max(r_lo, geometry.r_inner)
    hi = geometry.r_outer if r_hi is None else min(r_hi, geometry.r_outer)
    rr = 0.5 * (hi + lo) + 0.5 * (hi - lo) * gl_t
    wr = 0.5 * (hi - lo) * gl_w
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    wt = 2.0 * np.pi / n_theta
    R, T = np.meshgrid(rr, theta, indexing="ij")
    pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
    vals = np.asarray(g(pts), dtype=float).reshape(len(rr), n_theta)
    return float(np.einsum("i,ij,ij->", wr, vals, R) * wt)


def circle_integral(radius: float, g_theta, n_theta: int = 512) -> float:
    """Line integral over a circle of a function of the angle."""
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    vals = np.asarray(g_theta(theta), dtype=float)
    return float(vals.sum() * (2.0 * np.pi / n_theta) * radius)
