"""Machine description for the simulated GPU.

The default profile is an Ampere RTX 3080 Ti class part: 80 SMs with 48
warps each, 128 KB of L1D/shared memory per SM, 24 memory partitions and
6 MB of L2.  Associativities, line sizes and latencies are not published
for that part; the defaults below are modelling choices, not measurements.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, fields

KiB = 1024
MiB = 1024 * 1024


class ConfigError(ValueError):
    """Raised for malformed or inconsistent machine descriptions."""


@dataclass(frozen=True)
class GpuConfig:
    # clocks (MHz); mem_clock is reported only, there is a single clock domain
    core_clock_mhz: int = 1365
    mem_clock_mhz: int = 9500

    # SM array
    num_sms: int = 80
    warps_per_sm: int = 48
    sub_cores_per_sm: int = 4
    max_ctas_per_sm: int = 32

    # L1D / shared pool, modelled entirely as L1D
    l1d_size_bytes: int = 128 * KiB
    l1d_assoc: int = 4
    l1d_line_bytes: int = 128

    # L2, split evenly over every sub-partition
    l2_total_size_bytes: int = 6 * MiB
    l2_assoc: int = 16
    l2_line_bytes: int = 128

    num_mem_partitions: int = 24
    sub_partitions_per_partition: int = 2

    icnt_latency_cycles: int = 8
    icnt_bw_per_dest_per_cycle: int = 1
    l2_inbox_capacity: int = 8

    l1_hit_latency: int = 4
    l2_hit_latency: int = 40
    dram_latency: int = 120
    dram_queue_capacity: int = 16

    def __post_init__(self) -> None:
        validate(self)

    @property
    def num_sub_partitions(self) -> int:
        return self.num_mem_partitions * self.sub_partitions_per_partition

    @property
    def l2_slice_bytes(self) -> int:
        return self.l2_total_size_bytes // self.num_sub_partitions


@dataclass(frozen=True)
class CacheGeometry:
    num_sub_partitions: int
    l2_slice_bytes: int
    l1d_sets: int
    l2_slice_sets: int
    warps_per_sub_core: int


_NONNEGATIVE = {"icnt_latency_cycles"}
_POW2 = {"l1d_line_bytes", "l2_line_bytes"}
FIELD_NAMES = tuple(f.name for f in fields(GpuConfig))


def validate(cfg: GpuConfig) -> None:
    for name in FIELD_NAMES:
        value = getattr(cfg, name)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        if name in _NONNEGATIVE:
            if value < 0:
                raise ConfigError(f"{name} must be nonnegative")
        elif value <= 0:
            raise ConfigError(f"{name} must be positive")
        if name in _POW2 and value & (value - 1):
            raise ConfigError(f"{name} must be a power of two")

    if cfg.warps_per_sm % cfg.sub_cores_per_sm:
        raise ConfigError(
            "invariant violated: warps_per_sm divisible by sub_cores_per_sm "
            f"({cfg.warps_per_sm} % {cfg.sub_cores_per_sm} != 0)"
        )
    nsub = cfg.num_mem_partitions * cfg.sub_partitions_per_partition
    if cfg.l2_total_size_bytes % nsub:
        raise ConfigError(
            "invariant violated: l2_total_size_bytes divisible by "
            f"num_mem_partitions x sub_partitions_per_partition ({nsub})"
        )
    _check_cache("l1d", cfg.l1d_size_bytes, cfg.l1d_assoc, cfg.l1d_line_bytes)
    _check_cache("l2 slice", cfg.l2_total_size_bytes // nsub, cfg.l2_assoc, cfg.l2_line_bytes)


def _check_cache(label: str, size: int, assoc: int, line: int) -> None:
    way_bytes = assoc * line
    if size % way_bytes or size // way_bytes < 1:
        raise ConfigError(
            f"invariant violated: {label} size {size} divisible by assoc x line "
            f"({assoc} x {line}) with at least one set"
        )


def derived_geometry(cfg: GpuConfig) -> CacheGeometry:
    return CacheGeometry(
        num_sub_partitions=cfg.num_sub_partitions,
        l2_slice_bytes=cfg.l2_slice_bytes,
        l1d_sets=cfg.l1d_size_bytes // (cfg.l1d_assoc * cfg.l1d_line_bytes),
        l2_slice_sets=cfg.l2_slice_bytes // (cfg.l2_assoc * cfg.l2_line_bytes),
        warps_per_sub_core=cfg.warps_per_sm // cfg.sub_cores_per_sm,
    )


def default_config() -> GpuConfig:
    return GpuConfig()


_SIZE_RE = re.compile(r"^(0x[0-9a-fA-F]+|\d+)\s*(KiB|MiB)?$")
_UNITS = {None: 1, "KiB": KiB, "MiB": MiB}


def _parse_int(key: str, raw: str) -> int:
    m = _SIZE_RE.match(raw.strip())
    if not m:
        raise ConfigError(f"{key}: cannot parse value {raw!r}")
    return int(m.group(1), 0) * _UNITS[m.group(2)]


def parse_config(text: str) -> GpuConfig:
    """Parse a ``key = value`` document; absent keys keep their defaults."""
    values: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in FIELD_NAMES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_int(key, raw)
    return GpuConfig(**values)


def render_config(cfg: GpuConfig) -> str:
    return "".join(f"{name} = {getattr(cfg, name)}\n" for name in FIELD_NAMES)


def load_config(path: str | None) -> GpuConfig:
    if path is None:
        return default_config()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def replace(cfg: GpuConfig, **changes: int) -> GpuConfig:
    return dataclasses.replace(cfg, **changes)
