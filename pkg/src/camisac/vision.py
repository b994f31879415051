"""Camera geometry for user localization and a synthetic activity detector.

The detector stands in for a video activity-recognition model: it renders
each user as a fronto-parallel box through a pinhole camera, perturbs the
box with Gaussian image-plane noise and mislabels the activity with a fixed
probability.
"""

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TIERS_BPS = (1e6, 5e6, 20e6, 50e6)


@dataclass
class BoundingBox:
    b_x: float
    b_y: float
    b_h: float
    b_w: float
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(8))

    def __post_init__(self):
        if not (self.b_h > 0 and self.b_w > 0):
            raise ValueError("bounding box height and width must be positive")


@dataclass(frozen=True)
class CameraPose:
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    focal_length: float = 0.004
    position: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.focal_length > 0:
            raise ValueError("focal_length must be positive")


@dataclass(frozen=True)
class ActivityProfile:
    activities: np.ndarray
    n_classes: int = 60

    def __post_init__(self):
        a = np.asarray(self.activities)
        if a.size and (a.min() < 1 or a.max() > self.n_classes):
            raise ValueError(f"activity classes must lie in 1..{self.n_classes}")


@dataclass(frozen=True)
class DetectorNoise:
    pixel_std: float = 0.0
    activity_error: float = 0.05
    fov_half_angle: float = math.radians(80.0)


def rotation_matrix(roll, pitch, yaw):
    """World-to-camera rotation ``Rx(roll) @ Ry(pitch) @ Rz(yaw)``."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, sr], [0.0, -sr, cr]])
    ry = np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])
    rz = np.array([[cy, sy, 0.0], [-sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return rx @ ry @ rz


def transform_matrix(pose):
    """Homogeneous 4x4 transform [[R, t], [0, 1]]; t = 0 for a static scene."""
    T = np.eye(4)
    T[:3, :3] = rotation_matrix(pose.roll, pose.pitch, pose.yaw)
    return T


def camera_coords(world_point, pose):
    R = rotation_matrix(pose.roll, pose.pitch, pose.yaw)
    return R @ (np.asarray(world_point, dtype=float) - np.asarray(pose.position, dtype=float))


def project_to_image(world_point, pose):
    """Pinhole projection of a world point to image-plane coordinates (b_x, b_y)."""
    pc = camera_coords(world_point, pose)
    if pc[2] <= 0:
        raise ValueError("point is behind the camera")
    fl = pose.focal_length
    return fl * pc[0] / pc[2], fl * pc[1] / pc[2]


def render_box(center, height, width, pose):
    """Box of a fronto-parallel target of physical size ``height`` x ``width``."""
    pc = camera_coords(center, pose)
    if pc[2] <= 0:
        raise ValueError("point is behind the camera")
    fl = pose.focal_length
    b_h = fl * height / pc[2]
    b_w = fl * width / pc[2]
    hx, hy = b_w / 2, b_h / 2
    offsets = np.array([-hx, -hy, hx, -hy, hx, hy, -hx, hy])
    return BoundingBox(fl * pc[0] / pc[2], fl * pc[1] / pc[2], b_h, b_w, offsets)


def estimate_distance(box, focal_length, true_height):
    """Depth of the target from the box height: Y * fl / b_h."""
    if not box.b_h > 0:
        raise ValueError("box height must be positive")
    if not (focal_length > 0 and true_height > 0):
        raise ValueError("focal length and target height must be positive")
    return true_height * focal_length / box.b_h


def estimate_angles(box, focal_length):
    """Bearing angles (alpha, beta, gamma) of the box center off the optical axis."""
    if not focal_length > 0:
        raise ValueError("focal length must be positive")
    alpha = math.atan(box.b_x / focal_length)
    beta = math.atan(box.b_y / focal_length)
    gamma = math.atan(math.hypot(box.b_x, box.b_y) / focal_length)
    return alpha, beta, gamma


def estimate_range(box, focal_length, true_height):
    """Straight-line distance from the optical center to the target center."""
    depth = estimate_distance(box, focal_length, true_height)
    return depth * math.sqrt(1.0 + (box.b_x ** 2 + box.b_y ** 2) / focal_length ** 2)


def in_field_of_view(world_point, pose, fov_half_angle):
    pc = camera_coords(world_point, pose)
    if pc[2] <= 0:
        return False
    return math.atan2(math.hypot(pc[0], pc[1]), pc[2]) <= fov_half_angle


def detect_activities(centers, true_activities, pose, noise, rng, heights=1.7, widths=0.5, n_classes=60):
    """Synthetic detector output for every user.

    Returns ``(boxes, profile, detected)``; ``boxes[n]`` is None for a user
    outside the camera's field of view. Mislabelled activities are drawn
    uniformly from the other classes.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    n = centers.shape[0]
    if n < 1:
        raise ValueError("scene has no users")
    heights = np.broadcast_to(np.asarray(heights, dtype=float), (n,))
    widths = np.broadcast_to(np.asarray(widths, dtype=float), (n,))
    truth = np.asarray(true_activities, dtype=int)

    # draw all randomness up front so the stream does not depend on visibility
    pix = rng.standard_normal((n, 4)) * noise.pixel_std
    flip = rng.random(n) < noise.activity_error
    shift = rng.integers(1, n_classes, size=n) if n_classes > 1 else np.zeros(n, dtype=int)

    boxes = []
    detected = np.zeros(n, dtype=bool)
    for i in range(n):
        if not in_field_of_view(centers[i], pose, noise.fov_half_angle):
            boxes.append(None)
            continue
        box = render_box(centers[i], heights[i], widths[i], pose)
        if noise.pixel_std > 0:
            b_h = max(box.b_h + pix[i, 2], 1e-3 * box.b_h)
            b_w = max(box.b_w + pix[i, 3], 1e-3 * box.b_w)
            box = BoundingBox(box.b_x + pix[i, 0], box.b_y + pix[i, 1], b_h, b_w, box.offsets)
        boxes.append(box)
        detected[i] = True

    observed = truth.copy()
    # a non-zero shift modulo G always lands on a different class
    observed[flip] = (truth[flip] - 1 + shift[flip]) % n_classes + 1
    return boxes, ActivityProfile(observed, n_classes), detected


def default_rate_table(n_classes=60, tiers=DEFAULT_TIERS_BPS):
    """Minimum rate per class, tiers assigned round-robin: class a -> tiers[(a-1) % len]."""
    return np.array([tiers[(a - 1) % len(tiers)] for a in range(1, n_classes + 1)], dtype=float)


def min_rate_for_activity(activity, table):
    a = int(activity)
    if not 1 <= a <= len(table):
        raise ValueError(f"activity class {a} outside 1..{len(table)}")
    return float(table[a - 1])


def load_rate_table(path, n_classes=60):
    """Read ``class_id = min_rate_bps`` lines; every class must be present."""
    table = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'class_id = min_rate_bps'")
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                cls, rate = int(key), float(value)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {line!r}") from None
            if not 1 <= cls <= n_classes:
                raise ValueError(f"{path}:{lineno}: class {cls} outside 1..{n_classes}")
            if rate < 0:
                raise ValueError(f"{path}:{lineno}: negative rate")
            table[cls] = rate
    missing = sorted(set(range(1, n_classes + 1)) - table.keys())
    if missing:
        raise ValueError(f"{path}: missing classes {missing[:5]}{'...' if len(missing) > 5 else ''}")
    return np.array([table[a] for a in range(1, n_classes + 1)])
