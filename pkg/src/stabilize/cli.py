"""Configuration, orchestration, and report/geometry emission.

Exit codes: 0 success, 2 necessity violation, 3 not unimodular,
4 numerical tolerance failure, 5 IO or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .blaschke import load_zero_file
from .errors import ConfigError, GeometryError
from .pipeline import DEFAULT_TOLERANCES, run_pipeline

EXIT_SUCCESS = 0
EXIT_NECESSITY = 2
EXIT_NOT_UNIMODULAR = 3
EXIT_TOLERANCE = 4
EXIT_IO = 5

_STATUS_EXIT = {
    "success": EXIT_SUCCESS,
    "necessity_violated": EXIT_NECESSITY,
    "not_unimodular": EXIT_NOT_UNIMODULAR,
    "tolerance_failure": EXIT_TOLERANCE,
}


@dataclass
class RunConfig:
    f1_path: str
    f2_path: str
    epsilon: float
    delta_prime: float | None = None
    resolution: int = 512
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out_dir: str = "."
    emit_report: bool = True
    emit_fields: bool = False
    emit_svg: bool = False
    seed: int = 42

    def validate(self):
        if not self.f1_path or not self.f2_path:
            raise ConfigError("both zero-set paths are required")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError(f"epsilon out of range: {self.epsilon}")
        n = self.resolution
        if n < 128 or n > 4096 or (n & (n - 1)) != 0:
            raise ConfigError(
                f"resolution must be a power of two in [128, 4096], got {n}")
        if self.delta_prime is not None and self.delta_prime <= 0:
            raise ConfigError("delta_prime must be positive")
        return self


def parse_config(text: str) -> RunConfig:
    """Parse a JSON configuration, applying defaults and range checks."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {"f1", "f2", "epsilon", "delta_prime", "resolution",
             "tolerances", "out_dir", "emit", "seed"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown configuration fields: {sorted(unknown)}")
    for req in ("f1", "f2", "epsilon"):
        if req not in raw:
            raise ConfigError(f"missing required field {req!r}")
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(raw.get("tolerances", {}))
    emit = {"report": True, "fields": False, "svg": False}
    emit.update(raw.get("emit", {}))
    cfg = RunConfig(
        f1_path=str(raw["f1"]),
        f2_path=str(raw["f2"]),
        epsilon=float(raw["epsilon"]),
        delta_prime=(None if raw.get("delta_prime") is None
                     else float(raw["delta_prime"])),
        resolution=int(raw.get("resolution", 512)),
        tolerances=tolerances,
        out_dir=str(raw.get("out_dir", ".")),
        emit_report=bool(emit["report"]),
        emit_fields=bool(emit["fields"]),
        emit_svg=bool(emit["svg"]),
        seed=int(raw.get("seed", 42)),
    )
    return cfg.validate()


def emit_config(cfg: RunConfig) -> str:
    """Serialize a configuration so that parse_config round-trips it."""
    return json.dumps({
        "f1": cfg.f1_path,
        "f2": cfg.f2_path,
        "epsilon": cfg.epsilon,
        "delta_prime": cfg.delta_prime,
        "resolution": cfg.resolution,
        "tolerances": cfg.tolerances,
        "out_dir": cfg.out_dir,
        "emit": {"report": cfg.emit_report, "fields": cfg.emit_fields,
                 "svg": cfg.emit_svg},
        "seed": cfg.seed,
    }, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# emission


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "elapsed"}
    if isinstance(obj, (list, tuple)):
        return [_strip_timing(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def report_json(report) -> str:
    """Deterministic report text (timings stripped, keys sorted)."""
    return json.dumps(_strip_timing(report.to_dict()), sort_keys=True,
                      indent=2, allow_nan=True)


def write_field_dump(field_obj, path: str):
    """Text dump: header 'X Y nx ny', then one 're im' line per node."""
    g = field_obj.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{float(g.x[-1])!r} {float(g.y[-1])!r} "
                 f"{len(g.x)} {len(g.y)}\n")
        for row in field_obj.values:
            for v in row:
                fh.write(f"{float(v.real)!r} {float(v.imag)!r}\n")


def read_field_dump(path: str):
    from .fields import Grid, GridField
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        X, Y, nx, ny = float(header[0]), float(header[1]), int(header[2]), \
            int(header[3])
        flat = np.array([complex(float(a), float(b))
                         for a, b in (line.split() for line in fh)])
    x = np.linspace(-X, X, nx)
    x = 0.5 * (x - x[::-1])
    y = np.linspace(Y / ny, Y, ny)
    return GridField(Grid(x, y), flat.reshape(ny, nx))


def render_svg(report, artifacts) -> str:
    """Geometry rendering: regions, slits, discs, axis sublevel intervals."""
    system = artifacts.get("system")
    deco = artifacts.get("deco")
    grid = artifacts.get("grid")
    span = 1.0 if grid is None else float(grid.x[-1])
    height = span
    svg = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "version": "1.1",
        "viewBox": f"{-span} {-height} {2 * span} {height}",
    })

    def yflip(y):
        return -y

    ET.SubElement(svg, "line", {
        "x1": str(-span), "y1": "0", "x2": str(span), "y2": "0",
        "stroke": "black", "stroke-width": str(span / 400)})
    ET.SubElement(svg, "line", {
        "x1": "0", "y1": "0", "x2": "0", "y2": str(yflip(height)),
        "stroke": "gray", "stroke-width": str(span / 800),
        "stroke-dasharray": str(span / 100)})

    if deco is not None:
        for r in deco.regions:
            pts = []
            for (x0, y0), (x1, y1) in r.boundary_segments(include_base=True):
                pts.append(f"{x0},{yflip(y0)}")
                pts.append(f"{x1},{yflip(y1)}")
            ET.SubElement(svg, "polygon", {
                "points": " ".join(pts), "fill": "#cfe2ff",
                "stroke": "#1f4aa8", "stroke-width": str(span / 600)})
    if system is not None:
        for s in system.all_slits():
            d = []
            for (x0, y0), (x1, y1) in s.segments:
                d.append(f"M {x0} {yflip(y0)} L {x1} {yflip(y1)}")
            ET.SubElement(svg, "path", {
                "d": " ".join(d), "stroke": "#a83232", "fill": "none",
                "stroke-width": str(span / 600),
                "class": f"slit-{s.kind}"})
        for center, radius in system.all_discs():
            ET.SubElement(svg, "circle", {
                "cx": str(center.real), "cy": str(yflip(center.imag)),
                "r": str(radius), "fill": "none", "stroke": "#2e7d32",
                "stroke-width": str(span / 600)})
    for lo, hi in report.diagnostics.get("sublevel_intervals_epsilon", []):
        ET.SubElement(svg, "line", {
            "x1": "0", "y1": str(yflip(lo)), "x2": "0",
            "y2": str(yflip(hi)), "stroke": "#ff9800",
            "stroke-width": str(span / 200)})
    return ET.tostring(svg, encoding="unicode")


def emit_outputs(report, artifacts, cfg: RunConfig) -> list:
    """Write the requested artifacts; returns the list of paths written."""
    written = []
    os.makedirs(cfg.out_dir, exist_ok=True)
    if cfg.emit_report:
        path = os.path.join(cfg.out_dir, "report.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report_json(report))
        written.append(path)
    if cfg.emit_svg:
        path = os.path.join(cfg.out_dir, "geometry.svg")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render_svg(report, artifacts))
        written.append(path)
    if cfg.emit_fields:
        for name in ("V", "kappa", "g1_grid", "g2_grid"):
            if name in artifacts:
                path = os.path.join(cfg.out_dir, f"{name}.txt")
                write_field_dump(artifacts[name], path)
                written.append(path)
        deco = artifacts.get("deco")
        system = artifacts.get("system")
        if deco is not None:
            path = os.path.join(cfg.out_dir, "decomposition.json")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(deco.to_json())
            written.append(path)
        if system is not None:
            path = os.path.join(cfg.out_dir, "slits.json")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(system.to_json())
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# orchestration


def run(cfg: RunConfig, stream=None):
    """Execute the full pipeline for a configuration.

    Returns (exit_code, report, artifacts).  Input and configuration
    problems yield exit code 5 without raising.
    """
    out = stream or sys.stdout
    try:
        cfg.validate()
        f1, rep1 = load_zero_file(cfg.f1_path)
        f2, rep2 = load_zero_file(cfg.f2_path)
    except (OSError, ConfigError, GeometryError) as exc:
        print(f"error: {exc}", file=out)
        return EXIT_IO, None, {}
    for name, rep in (("f1", rep1), ("f2", rep2)):
        for a in rep["completed"]:
            print(f"note: completed symmetric partner {a} in {name}",
                  file=out)

    report, artifacts = run_pipeline(
        f1, f2, cfg.epsilon, delta_prime=cfg.delta_prime,
        resolution=cfg.resolution, seed=cfg.seed,
        tolerances=cfg.tolerances,
        keep_fields=cfg.emit_fields or cfg.emit_svg)
    report.diagnostics["completed_zeros"] = {
        "f1": [[a.real, a.imag] for a in rep1["completed"]],
        "f2": [[a.real, a.imag] for a in rep2["completed"]],
    }

    code = _STATUS_EXIT.get(report.status, EXIT_TOLERANCE)
    try:
        written = emit_outputs(report, artifacts, cfg)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=out)
        return EXIT_IO, report, artifacts
    failing = ""
    if report.status != "success" and report.stages:
        failing = f" (after stage {report.stages[-1]['stage']})"
    hint = ""
    if report.status == "tolerance_failure":
        hint = " hint: raise the resolution or shrink delta_prime"
    print(f"status: {report.status}{failing}"
          f" residual={report.residual:.3g}{hint}", file=out)
    for path in written:
        print(f"wrote {path}", file=out)
    return code, report, artifacts


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stabilize",
        description="Construct an invertible corona solution for two "
                    "real-symmetric finite Blaschke products.")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--f1", help="zero-set file of f1")
    parser.add_argument("--f2", help="zero-set file of f2")
    parser.add_argument("--epsilon", type=float,
                        help="sign-condition level in (0, 1)")
    parser.add_argument("--delta-prime", type=float, default=None)
    parser.add_argument("--grid", type=int, default=None,
                        help="grid resolution (power of two in [128, 4096])")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--svg", action="store_true")
    parser.add_argument("--fields", action="store_true")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                cfg = parse_config(fh.read())
        else:
            if not (args.f1 and args.f2 and args.epsilon is not None):
                parser.print_usage(sys.stderr)
                print("error: --f1, --f2 and --epsilon are required "
                      "without --config", file=sys.stderr)
                return EXIT_IO
            cfg = RunConfig(args.f1, args.f2, args.epsilon)
        if args.delta_prime is not None:
            cfg.delta_prime = args.delta_prime
        if args.grid is not None:
            cfg.resolution = args.grid
        if args.out is not None:
            cfg.out_dir = args.out
        if args.svg:
            cfg.emit_svg = True
        if args.fields:
            cfg.emit_fields = True
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    code, _, _ = run(cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
