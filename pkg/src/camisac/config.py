"""Flat ``key = value`` run configuration with dotted namespaces.

Resolution order is built-in defaults, then the config file, then
``--set`` overrides. Every key has a typed default; unknown keys, malformed
values and violated invariants raise :class:`ConfigError`.
"""

import hashlib
import math
from dataclasses import dataclass, fields

from . import vision
from .baselines import PolicyKind
from .channel import ChannelParams
from .ddpg import Hyperparams
from .environment import Scenario
from .sensing import SensingConfig

PRECODERS = ("ddpg", "matched_filter")

_CHANNEL_KEYS = ("wavelength", "n_paths", "antenna_spacing", "pathloss_exponent", "reference_distance",
                 "noise_power", "channel_variance", "symbols_per_slot", "pilot_symbols")

DEFAULTS = {
    "scenario.n_users": 10,
    "scenario.n_antennas": 16,
    "scenario.p_max": 1.0,
    "scenario.mi_min": 90.0,
    "scenario.p_block": 0.2,
    "scenario.area_radius": 100.0,
    "scenario.mm_coverage_radius": 80.0,
    "scenario.mm_outage": True,
    "scenario.episode_length": 50,
    "scenario.interference_exponent": 2,
    "scenario.sinr_floor_db": -200.0,
    "scenario.total_bandwidth": 1e8,
    "scenario.user_height": 1.7,
    "scenario.user_width": 0.5,
    "scenario.radar_noise_std": 0.0,
    "channel.mm.wavelength": 0.002,
    "channel.mm.n_paths": 5,
    "channel.lte.wavelength": 0.1,
    "channel.lte.n_paths": 9,
    "sensing.noise_variance": 1.0,
    "sensing.ofdm_symbols": 128,
    "sensing.rice_factor": 3.0,
    "camera.roll": math.pi,
    "camera.pitch": 0.0,
    "camera.yaw": 0.0,
    "camera.focal_length": 0.004,
    "camera.x": 0.0,
    "camera.y": 0.0,
    "camera.z": 25.0,
    "detector.pixel_std": 0.0,
    "detector.activity_error": 0.05,
    "detector.fov_half_angle_deg": 80.0,
    "activity.n_classes": 60,
    "activity.rate_table": "",
    # accepted and echoed to meta.txt only; nothing reads them
    "echo.symbol_period": 5e-5,
    "echo.radar_cross_section": 100.0,
    "run.n_seeds": 1,
    "run.eval_episodes": 10,
    "run.policy": "Proposed",
    "run.precoder": "ddpg",
    "run.plot": True,
    "run.save_checkpoint": True,
    "sweep.mi_values": (90.0, 95.0, 100.0),
    "sweep.mi_fractions": (),
    "sweep.probe_samples": 10_000,
    "sweep.users": (6, 7, 8, 9, 10),
    "sweep.policies": tuple(k.value for k in PolicyKind),
}
_channel_defaults = ChannelParams()
for _rat in ("mm", "lte"):
    for _k in _CHANNEL_KEYS:
        DEFAULTS.setdefault(f"channel.{_rat}.{_k}", getattr(_channel_defaults, _k))
for _f in fields(Hyperparams):
    DEFAULTS[f"ddpg.{_f.name}"] = _f.default

# keys whose default is None take this type
_OPTIONAL_TYPES = {f"channel.{r}.antenna_spacing": float for r in ("mm", "lte")}
_TUPLE_TYPES = {"sweep.mi_values": float, "sweep.mi_fractions": float, "sweep.users": int,
                "sweep.policies": str}


class ConfigError(ValueError):
    pass


def _convert(key, text):
    default = DEFAULTS[key]
    text = text.strip()
    try:
        if key in _TUPLE_TYPES:
            kind = _TUPLE_TYPES[key]
            return tuple(kind(v.strip()) for v in text.split(",") if v.strip())
        if default is None:
            if text.lower() in ("", "none", "auto"):
                return None
            return _OPTIONAL_TYPES[key](text)
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"expected a boolean, got {text!r}")
        if isinstance(default, int):
            value = float(text)
            if not value.is_integer():
                raise ValueError(f"expected an integer, got {text!r}")
            return int(value)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_assignments(lines, source="<config>"):
    """Parse ``key = value`` lines into a dict of typed values.

    Blank lines and ``#`` comments are skipped. Errors carry the line number.
    """
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _convert(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return out


def resolve(path=None, overrides=()):
    """Defaults, then the file at ``path``, then ``key=value`` overrides."""
    values = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(parse_assignments(text.splitlines(), str(path)))
    values.update(parse_assignments(list(overrides), "--set"))
    cfg = RunConfig(values)
    cfg.validate()
    return cfg


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def dump(self):
        """Resolved config in the same ``key = value`` format it was read from."""
        return "".join(f"{k} = {_format(self.values[k])}\n" for k in sorted(self.values))

    def seeds(self, base):
        return list(range(base, base + self["run.n_seeds"]))

    def derived(self, n_users=None):
        n = n_users or self["scenario.n_users"]
        bn = self["scenario.total_bandwidth"] / n
        return {"bandwidth_per_user_hz": bn, "rms_bandwidth_hz": math.sqrt(12.0) * bn}

    def hyperparams(self):
        try:
            return Hyperparams(**{f.name: self[f"ddpg.{f.name}"] for f in fields(Hyperparams)})
        except ValueError as exc:
            raise ConfigError(f"ddpg: {exc}") from None

    def policies(self):
        try:
            return [PolicyKind.parse(p) for p in self["sweep.policies"]]
        except ValueError as exc:
            raise ConfigError(f"sweep.policies: {exc}") from None

    def policy(self):
        try:
            return PolicyKind.parse(self["run.policy"])
        except ValueError as exc:
            raise ConfigError(f"run.policy: {exc}") from None

    def _rate_table(self):
        path = self["activity.rate_table"]
        n = self["activity.n_classes"]
        if not path:
            return vision.default_rate_table(n)
        try:
            return vision.load_rate_table(path, n)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"activity.rate_table: {exc}") from None

    def scenario(self, n_users=None, mi_min=None):
        """Scenario for ``n_users`` users, each given total_bandwidth / N."""
        n = n_users or self["scenario.n_users"]
        m = self["scenario.n_antennas"]
        bn = self.derived(n)["bandwidth_per_user_hz"]
        try:
            mm, lte = (ChannelParams(n_antennas=m, bandwidth=bn,
                                     **{k: self[f"channel.{rat}.{k}"] for k in _CHANNEL_KEYS})
                       for rat in ("mm", "lte"))
            sensing = SensingConfig(noise_variance=self["sensing.noise_variance"],
                                    ofdm_symbols=self["sensing.ofdm_symbols"],
                                    rice_factor=self["sensing.rice_factor"], n_antennas=m)
            camera = vision.CameraPose(roll=self["camera.roll"], pitch=self["camera.pitch"],
                                       yaw=self["camera.yaw"], focal_length=self["camera.focal_length"],
                                       position=(self["camera.x"], self["camera.y"], self["camera.z"]))
            detector = vision.DetectorNoise(pixel_std=self["detector.pixel_std"],
                                            activity_error=self["detector.activity_error"],
                                            fov_half_angle=math.radians(self["detector.fov_half_angle_deg"]))
            scalar = {k: self[f"scenario.{k}"] for k in (
                "p_max", "p_block", "area_radius", "mm_coverage_radius", "mm_outage", "episode_length",
                "interference_exponent", "sinr_floor_db", "user_height", "user_width", "radar_noise_std")}
            return Scenario(n_users=n, n_antennas=m, mm=mm, lte=lte, sensing=sensing,
                            mi_min=self["scenario.mi_min"] if mi_min is None else mi_min,
                            rate_table=self._rate_table(), n_activities=self["activity.n_classes"],
                            camera=camera, detector=detector, **scalar)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid scenario: {exc}") from None

    def validate(self):
        """Check every invariant before any run starts."""
        for key in ("scenario.total_bandwidth", "sweep.probe_samples"):
            if not self[key] > 0:
                raise ConfigError(f"{key} must be positive")
        for key in ("run.n_seeds", "run.eval_episodes"):
            if self[key] < 1:
                raise ConfigError(f"{key} must be >= 1")
        if self["run.precoder"] not in PRECODERS:
            raise ConfigError(f"run.precoder must be one of {PRECODERS}")
        if not self["sweep.users"] or min(self["sweep.users"]) < 1:
            raise ConfigError("sweep.users must list positive user counts")
        if not self["sweep.mi_values"] and not self["sweep.mi_fractions"]:
            raise ConfigError("sweep.mi_values or sweep.mi_fractions must be non-empty")
        if any(v < 0 for v in self["sweep.mi_values"] + self["sweep.mi_fractions"]):
            raise ConfigError("sweep MI values must be >= 0")
        if not self["sweep.policies"]:
            raise ConfigError("sweep.policies must be non-empty")
        self.policies()
        self.policy()
        self.hyperparams()
        for n in {self["scenario.n_users"], *self["sweep.users"]}:
            self.scenario(n)


def version_hash(version):
    """Git blob id of ``version``: sha1 over ``b"blob <len>\\0" + content``."""
    data = version.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
