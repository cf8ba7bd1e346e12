"""Pinhole cameras: world-to-pixel projection and its Jacobian."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

Array = np.ndarray


@dataclass(frozen=True)
class Camera:
    """Look-at pinhole camera with a vertical field of view in radians."""

    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float]
    fov: float
    width: int
    height: int

    def __post_init__(self):
        if not (0.0 < self.fov < np.pi):
            raise DomainError(f"fov must lie in (0, pi), got {self.fov}")
        fwd = np.asarray(self.look_at, float) - np.asarray(self.position, float)
        if np.linalg.norm(fwd) == 0.0:
            raise DomainError("look direction is zero")

    @property
    def focal(self) -> float:
        """Focal length in pixels (vertical)."""
        return 0.5 * self.height / np.tan(0.5 * self.fov)

    def basis(self) -> tuple[Array, Array, Array]:
        """Right / down / forward unit vectors of the camera frame.

        The image v axis grows downward, so the second basis vector points
        opposite the true up direction.
        """
        pos = np.asarray(self.position, float)
        fwd = np.asarray(self.look_at, float) - pos
        fwd = fwd / np.linalg.norm(fwd)
        up = np.asarray(self.up, float)
        right = np.cross(fwd, up)
        norm = np.linalg.norm(right)
        if norm < 1e-12:
            raise DomainError("up vector is parallel to the view direction")
        right = right / norm
        down = np.cross(fwd, right)
        down = down / np.linalg.norm(down)
        return right, down, fwd


def camera_project(cam: Camera, points: Array) -> tuple[Array, Array, Array, Array]:
    """Project world points to pixel coordinates.

    Returns ``(u, v, depth, valid)`` where depth is the distance along the
    view axis and ``valid`` is False for points at or behind the camera
    plane. Projection of invalid points is left at 0 rather than raising.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    right, down, fwd = cam.basis()
    rel = pts - np.asarray(cam.position, float)
    x_c = rel @ right
    y_c = rel @ down
    z_c = rel @ fwd
    valid = z_c > 1e-12
    f = cam.focal
    safe_z = np.where(valid, z_c, 1.0)
    u = np.where(valid, 0.5 * cam.width + f * x_c / safe_z, 0.0)
    v = np.where(valid, 0.5 * cam.height + f * y_c / safe_z, 0.0)
    depth = np.where(valid, z_c, 0.0)
    if np.asarray(points).ndim == 1:
        return u[0], v[0], depth[0], valid[0]
    return u, v, depth, valid


def in_frame(cam: Camera, u: Array, v: Array, valid: Array) -> Array:
    """True where a projected point lands inside the image rectangle."""
    return valid & (u >= 0.0) & (u < cam.width) & (v >= 0.0) & (v < cam.height)


def orbit_camera(azimuth_deg: float, elevation_deg: float = 15.0,
                 radius: float = 3.2, fov: float = 0.7,
                 width: int = 64, height: int = 64,
                 target: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> Camera:
    """Camera on an orbit around ``target``; azimuth 0 looks down -z toward it."""
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    pos = (
        target[0] + radius * np.cos(el) * np.sin(az),
        target[1] + radius * np.sin(el),
        target[2] + radius * np.cos(el) * np.cos(az),
    )
    return Camera(pos, target, (0.0, 1.0, 0.0), fov, width, height)
