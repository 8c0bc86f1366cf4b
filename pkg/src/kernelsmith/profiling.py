"""Parsers for profiler exports: per-kernel metric CSVs and run summaries.

Two inputs feed the evidence pipeline:

    - the detailed kernel profiler's long-format CSV (one row per
      launch/metric pair, header-driven column discovery)
    - the system profiler's kernel summary CSV (one row per kernel symbol)

Malformed rows never abort a parse.  Each bad row becomes a
:class:`ParseFault` in the result's ``skipped`` list, with its line number
and what was wrong, and parsing continues; only a structurally unusable
document (missing header columns, empty file) raises.

Aggregation rule, applied both across launches of one kernel and across
kernels of one profile: percentage metrics average (weighted by launch
duration when the duration metric is present, equally otherwise) and all
other metrics sum.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .errors import MalformedDocument

DURATION_METRIC = "gpu__time_duration.sum"

NCU_REQUIRED = ("Kernel Name", "Metric Name", "Metric Unit", "Metric Value")
NSYS_REQUIRED = ("Total Time (ns)", "Instances", "Name")


@dataclass(frozen=True)
class ParseFault:
    line: int
    detail: str


@dataclass(frozen=True)
class KernelProfile:
    kernel_name: str
    launch_count: int
    metrics: Dict[str, float]  # aggregated across this kernel's launches
    units: Dict[str, str]
    metric_lines: Dict[str, Tuple[int, ...]]  # provenance: source CSV lines


@dataclass(frozen=True)
class RawProfile:
    kernels: Tuple[KernelProfile, ...]
    skipped: Tuple[ParseFault, ...]

    def kernel(self, name: str) -> Optional[KernelProfile]:
        for k in self.kernels:
            if k.kernel_name == name:
                return k
        return None

    def aggregate(self) -> Dict[str, float]:
        """One metric dict for the whole profile.

        Percentages combine as duration-weighted means across kernels; when
        no kernel reports the duration metric the mean is unweighted.
        Everything else sums.
        """
        out: Dict[str, float] = {}
        names: Dict[str, str] = {}
        for k in self.kernels:
            for metric, unit in k.units.items():
                names[metric] = unit
        for metric, unit in names.items():
            holders = [k for k in self.kernels if metric in k.metrics]
            if not holders:
                continue
            if unit == "%":
                weights = [k.metrics.get(DURATION_METRIC, 0.0) for k in holders]
                if sum(weights) <= 0:
                    weights = [1.0] * len(holders)
                total = sum(weights)
                out[metric] = sum(
                    k.metrics[metric] * w for k, w in zip(holders, weights)
                ) / total
            else:
                out[metric] = sum(k.metrics[metric] for k in holders)
        return out


@dataclass(frozen=True)
class RunFeatures:
    values: Dict[str, object]
    skipped: Tuple[ParseFault, ...]


# --- shared csv plumbing ---------------------------------------------------


def _reader(text: str, required: Tuple[str, ...], what: str):
    """Header-driven CSV reader; yields (line_number, row_dict)."""
    stream = io.StringIO(text)
    reader = csv.reader(stream)
    header = None
    for row in reader:
        if row and any(cell.strip() for cell in row):
            header = [cell.strip() for cell in row]
            break
    if header is None:
        raise MalformedDocument(what, "empty document")
    missing = [col for col in required if col not in header]
    if missing:
        raise MalformedDocument(what, f"header lacks required columns: {', '.join(missing)}")
    index = {name: i for i, name in enumerate(header)}

    def rows():
        for row in reader:
            if not row or not any(cell.strip() for cell in row):
                continue
            yield reader.line_num, row, index

    return rows()


def _number(cell: str) -> float:
    """Numeric cell value; tolerates digit-group commas ("1,234,567")."""
    text = cell.strip()
    if text.count(",") and text.replace(",", "").replace(".", "").replace("-", "").isdigit():
        text = text.replace(",", "")
    return float(text)


# --- detailed kernel profiler csv ------------------------------------------


def parse_ncu_csv(text: str, what: str = "<ncu-csv>") -> RawProfile:
    """Long-format metric rows -> per-kernel aggregated profiles.

    Launches are grouped by the ID column when present (falling back to a
    single launch per kernel name); within a kernel, percentage metrics are
    duration-weighted means over launches and other metrics sum.
    """
    rows = _reader(text, NCU_REQUIRED, what)
    skipped: List[ParseFault] = []
    # (kernel, launch id) -> {metric: value}; insertion order preserved
    launches: Dict[Tuple[str, str], Dict[str, float]] = {}
    units: Dict[str, str] = {}
    lines: Dict[str, Dict[str, List[int]]] = {}
    for line_num, row, index in rows:
        try:
            kernel = row[index["Kernel Name"]].strip()
            metric = row[index["Metric Name"]].strip()
            unit = row[index["Metric Unit"]].strip()
            raw_value = row[index["Metric Value"]]
            launch_id = (
                row[index["ID"]].strip() if "ID" in index and index["ID"] < len(row) else "0"
            )
        except IndexError:
            skipped.append(ParseFault(line_num, "row shorter than header"))
            continue
        if not kernel or not metric:
            skipped.append(ParseFault(line_num, "missing kernel or metric name"))
            continue
        try:
            value = _number(raw_value)
        except (ValueError, IndexError):
            skipped.append(
                ParseFault(line_num, f"unparseable metric value {raw_value.strip()!r}")
            )
            continue
        bucket = launches.setdefault((kernel, launch_id), {})
        if metric in bucket:
            skipped.append(
                ParseFault(line_num, f"duplicate metric {metric!r} for launch {launch_id}")
            )
            continue
        bucket[metric] = value
        units[metric] = unit
        lines.setdefault(kernel, {}).setdefault(metric, []).append(line_num)

    kernels: List[KernelProfile] = []
    for kernel in dict.fromkeys(k for k, _ in launches):
        mine = [launches[key] for key in launches if key[0] == kernel]
        metrics: Dict[str, float] = {}
        metric_names = dict.fromkeys(m for launch in mine for m in launch)
        for metric in metric_names:
            holders = [launch for launch in mine if metric in launch]
            if units.get(metric) == "%":
                weights = [launch.get(DURATION_METRIC, 0.0) for launch in holders]
                if sum(weights) <= 0:
                    weights = [1.0] * len(holders)
                total = sum(weights)
                metrics[metric] = sum(
                    launch[metric] * w for launch, w in zip(holders, weights)
                ) / total
            else:
                metrics[metric] = sum(launch[metric] for launch in holders)
        kernels.append(
            KernelProfile(
                kernel_name=kernel,
                launch_count=len(mine),
                metrics=metrics,
                units={m: units[m] for m in metrics},
                metric_lines={
                    m: tuple(lines.get(kernel, {}).get(m, ())) for m in metrics
                },
            )
        )
    return RawProfile(kernels=tuple(kernels), skipped=tuple(skipped))


# --- system profiler kernel summary ----------------------------------------


def parse_nsys_summary(text: str, what: str = "<nsys-summary>") -> RunFeatures:
    """Kernel summary rows -> run-level features.

    Produces ``kernel_launch_count`` (instances summed),
    ``total_gpu_time_ms`` (total ns summed, scaled), and
    ``distinct_kernel_count`` (usable rows).
    """
    rows = _reader(text, NSYS_REQUIRED, what)
    skipped: List[ParseFault] = []
    launch_count = 0
    total_ns = 0.0
    distinct = 0
    for line_num, row, index in rows:
        try:
            name = row[index["Name"]].strip()
            instances_raw = row[index["Instances"]]
            total_raw = row[index["Total Time (ns)"]]
        except IndexError:
            skipped.append(ParseFault(line_num, "row shorter than header"))
            continue
        if not name:
            skipped.append(ParseFault(line_num, "missing kernel name"))
            continue
        try:
            instances = int(_number(instances_raw))
            total = _number(total_raw)
        except ValueError:
            skipped.append(ParseFault(line_num, "unparseable instance or time value"))
            continue
        if instances < 0 or total < 0:
            skipped.append(ParseFault(line_num, "negative instance or time value"))
            continue
        launch_count += instances
        total_ns += total
        distinct += 1
    return RunFeatures(
        values={
            "kernel_launch_count": launch_count,
            "total_gpu_time_ms": total_ns * 1e-6,
            "distinct_kernel_count": distinct,
        },
        skipped=tuple(skipped),
    )
