"""Plain-text field dumps, CSV tables and the case configuration file.

Field dump layout::

    # ivr-rom field dump
    nx = 64
    ny = 64
    t = 6.2831853071795862
    variant = high_peclet
    <one node value per line, row-major (x fastest), 17 significant digits>

The configuration file is INI-style with a single ``[case]`` section and a
``schema_version`` key; every key mirrors a :class:`CaseConfig` field.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..pod import TruncationPolicy
from .cases import CaseConfig, ErrorReport

__all__ = [
    "CSV_COLUMNS",
    "CONFIG_SCHEMA_VERSION",
    "FieldDump",
    "write_field_dump",
    "read_field_dump",
    "report_row",
    "write_reports_csv",
    "read_reports_csv",
    "load_config",
    "save_config",
]

CSV_COLUMNS = ("coupling", "N_R_left", "N_R_right", "avg_N_R", "eps", "eps0", "online_cpu", "offline_cpu")
CONFIG_SCHEMA_VERSION = 1
_DUMP_MAGIC = "# ivr-rom field dump"


@dataclasses.dataclass
class FieldDump:
    values: np.ndarray
    nx: int
    ny: int
    t: float
    variant: str


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_field_dump(path, values, nx: int, ny: int, t: float, variant: str) -> Path:
    values = np.asarray(values, dtype=float).ravel()
    if values.size != (nx + 1) * (ny + 1):
        raise ConfigurationError(f"dump has {values.size} values, expected {(nx + 1) * (ny + 1)}")
    path = Path(path)
    lines = [_DUMP_MAGIC, f"nx = {nx}", f"ny = {ny}", f"t = {_fmt(t)}", f"variant = {variant}"]
    lines.extend(_fmt(v) for v in values)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field_dump(path) -> FieldDump:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _DUMP_MAGIC:
        raise ConfigurationError(f"{path} is not a field dump")
    header = dict(line.split(" = ", 1) for line in lines[1:5])
    nx, ny = int(header["nx"]), int(header["ny"])
    values = np.array([float(v) for v in lines[5:]])
    if values.size != (nx + 1) * (ny + 1):
        raise ConfigurationError(f"{path}: expected {(nx + 1) * (ny + 1)} values, found {values.size}")
    return FieldDump(values, nx, ny, float(header["t"]), header["variant"])


def report_row(report: ErrorReport) -> dict:
    return {
        "coupling": report.coupling,
        "N_R_left": report.n_modes_left,
        "N_R_right": report.n_modes_right,
        "avg_N_R": report.avg_n_modes,
        "eps": report.eps,
        "eps0": report.eps0,
        "online_cpu": report.online_cpu_seconds,
        "offline_cpu": report.offline_cpu_seconds,
    }


def write_reports_csv(path, reports) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for report in reports:
            row = report if isinstance(report, dict) else report_row(report)
            writer.writerow({k: row[k] if k == "coupling" else _fmt(row[k]) for k in CSV_COLUMNS})
    return path


def read_reports_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        parsed = {"coupling": row["coupling"]}
        for key in CSV_COLUMNS[1:]:
            parsed[key] = float(row[key]) if row[key] != "" else None
        out.append(parsed)
    return out


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(CaseConfig)}


def _convert(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigurationError(f"unknown configuration key {key!r}")
    if key in ("nx", "ny"):
        return int(raw)
    if key in ("dt", "final_time"):
        return float(raw)
    if key == "sample_dt":
        return None if raw.lower() in ("", "none") else float(raw)
    if key.startswith("truncation_"):
        return TruncationPolicy.parse(raw)
    if key in ("output_dir", "basis_dir"):
        return raw or None
    return raw


def load_config(path, **overrides) -> CaseConfig:
    """Read a case file; keyword ``overrides`` that are not ``None`` win over file values."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigurationError(f"cannot read configuration file {path}")
    if "case" not in parser:
        raise ConfigurationError(f"{path}: missing [case] section")
    section = dict(parser["case"])
    version = int(section.pop("schema_version", CONFIG_SCHEMA_VERSION))
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigurationError(f"{path}: unsupported schema_version {version}")
    values = {key: _convert(key, raw) for key, raw in section.items()}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return CaseConfig(**values)


def save_config(path, config: CaseConfig) -> Path:
    parser = configparser.ConfigParser()
    parser["case"] = {"schema_version": str(CONFIG_SCHEMA_VERSION)}
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        parser["case"][f.name] = "" if value is None else (_fmt(value) if isinstance(value, float) else str(value))
    path = Path(path)
    with path.open("w") as fh:
        parser.write(fh)
    return path
