"""
Obstacle Service
================
Gauge-ball obstacles, their unions and the voxelized DomainMask.

A node is OBSTACLE iff its coordinates satisfy the obstacle predicate (the
node is the centre of its dual cell, so this is the cell-centre rule);
nodes on the box faces are OUTER_BOUNDARY; every other node is INTERIOR.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from heis_imcf.api.errors import ConfigError, EmptyObstacleError, InvalidParameterError
from heis_imcf.models.geometry_models import GroupPoint
from heis_imcf.models.grid_models import Box, DomainMask, NodeLabel
from heis_imcf.services.group_geometry import (
    dilate, gauge_distance_arrays, koranyi_norm, recenter,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaugeBall:
    """Closed Korányi ball B_r(c) in H^1"""
    center: Tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParameterError('radius', self.radius, 'a positive radius')
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))

    def contains(self, x, y, t) -> np.ndarray:
        return gauge_distance_arrays(self.center, x, y, t) <= self.radius

    def level(self, x, y, t) -> np.ndarray:
        return gauge_distance_arrays(self.center, x, y, t) / self.radius

    def dilated(self, lam: float) -> 'GaugeBall':
        c = dilate(lam, GroupPoint.from_array(self.center))
        return GaugeBall((float(c.x[0]), float(c.y[0]), c.t), lam * self.radius)

    def reference_radii(self, center) -> Tuple[float, float]:
        """(R*, Rbar) with B_R*(center) inside and B_Rbar(center) containing the ball"""
        d = koranyi_norm(recenter(GroupPoint.from_array(center), GroupPoint.from_array(self.center)))
        return max(self.radius - d, 0.0), self.radius + d

    def to_dict(self) -> dict:
        return {'gauge_ball': {'center': list(self.center), 'radius': self.radius}}


@dataclass(frozen=True)
class GaugeBallUnion:
    balls: Tuple[GaugeBall, ...]

    def __post_init__(self):
        if not self.balls:
            raise EmptyObstacleError("Obstacle union has no member")

    @property
    def center(self) -> Tuple[float, float, float]:
        return self.balls[0].center

    def contains(self, x, y, t) -> np.ndarray:
        inside = np.zeros(np.shape(x), dtype=bool)
        for ball in self.balls:
            inside |= ball.contains(x, y, t)
        return inside

    def level(self, x, y, t) -> np.ndarray:
        return np.min([ball.level(x, y, t) for ball in self.balls], axis=0)

    def dilated(self, lam: float) -> 'GaugeBallUnion':
        return GaugeBallUnion(tuple(b.dilated(lam) for b in self.balls))

    def reference_radii(self, center) -> Tuple[float, float]:
        # Korányi norm satisfies the triangle inequality
        radii = [b.reference_radii(center) for b in self.balls]
        return max(r for r, _ in radii), max(R for _, R in radii)

    def to_dict(self) -> dict:
        return {'union': [b.to_dict() for b in self.balls]}


def parse_obstacle(data: dict):
    """{'gauge_ball': {center, radius}} or {'union': [...]}"""
    if 'gauge_ball' in data:
        ball = data['gauge_ball']
        return GaugeBall(tuple(ball.get('center', (0.0, 0.0, 0.0))), ball['radius'])
    if 'union' in data:
        members: List[GaugeBall] = []
        for item in data['union']:
            parsed = parse_obstacle(item)
            members.extend(parsed.balls if isinstance(parsed, GaugeBallUnion) else [parsed])
        return GaugeBallUnion(tuple(members))
    raise ConfigError("Obstacle must be a gauge_ball or a union", field='obstacle')


def build_domain_mask(box: Box, obstacle) -> DomainMask:
    """
    Voxelize the obstacle.

    Raises:
        EmptyObstacleError: no node inside, or the obstacle reaches the faces
        ConfigError: INTERIOR is not connected
    """
    inside = obstacle.contains(*box.coords)

    faces = np.zeros(box.shape, dtype=bool)
    faces[[0, -1], :, :] = True
    faces[:, [0, -1], :] = True
    faces[:, :, [0, -1]] = True

    if not np.any(inside):
        raise EmptyObstacleError(details={'box': box.metadata()})
    if np.any(inside & faces):
        raise EmptyObstacleError("Obstacle is not strictly inside the box",
                                 details={'box': box.metadata()})

    labels = np.full(box.shape, int(NodeLabel.INTERIOR), dtype=np.int8)
    labels[faces] = NodeLabel.OUTER_BOUNDARY
    labels[inside] = NodeLabel.OBSTACLE

    _, components = ndimage.label(labels == NodeLabel.INTERIOR)
    if components != 1:
        raise ConfigError(f"INTERIOR splits into {components} components", field='obstacle')

    center = obstacle.center
    r_inner, r_outer = obstacle.reference_radii(center)
    mask = DomainMask(box, labels, center, r_inner, r_outer, level=obstacle.level(*box.coords))
    logger.info("Built domain mask", extra={'extra_data': mask.counts()})
    return mask


def dilate_mask(mask: DomainMask, lam: float) -> DomainMask:
    """
    Image of the mask under delta_lam.

    The dilated box with the same node counts carries nodes exactly at the
    dilated positions, so labels and the level function are unchanged.
    """
    c = dilate(lam, GroupPoint.from_array(mask.center))
    return DomainMask(
        mask.box.scaled(lam), mask.labels.copy(),
        (float(c.x[0]), float(c.y[0]), c.t),
        None if mask.r_inner is None else lam * mask.r_inner,
        None if mask.r_outer is None else lam * mask.r_outer,
        level=mask.level,
    )
