"""Pipeline orchestration: configuration, staged runs, reports, exports.

Stages: solve the two half-strips and the Green square, assemble the
glued potential, transport to the annulus, then run the named-check suite
and emit a JSON report plus serialized models.  All sampling randomness
is seeded from a hash of the configuration, so identical configs produce
byte-identical reports (timing lives in a separate file).

Exit codes: 0 all checks pass; 1 configuration or input error; 2 solver
non-convergence; 3 at least one check failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import S_HALF_SIDE
from .laplace import Field, GreenField, SolverError
from .corners import CornerMode
from .assembler import GluedPotential, HalfStripModel, build_glued
from .verify import CheckRecord, DecayTable, run_suite
from .annulus import (
    AnnulusPotential,
    build_annulus,
    check_annulus_submean,
    check_arc_strip_consistency,
    check_components,
    check_arc_mass_decay,
)

__all__ = ["RunConfig", "ConfigError", "ChecksumError", "run_pipeline", "verify_only", "export_field", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECKS = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class ChecksumError(RuntimeError):
    pass


@dataclass
class RunConfig:
    """Flat run configuration; see ``validate`` for the invariants."""

    h: Fraction = Fraction(1, 512)
    n_max: int = 4
    tol: float = 1e-9
    epsilon: float = 0.4
    line_samples: int = 256
    radii_samples: int = 50
    slack: float = 0.1
    sample_count: int = 12000
    method: str = "auto"
    max_cycles: int = 40

    @property
    def p(self) -> int:
        return self.h.denominator.bit_length() - 1

    def validate(self) -> list[str]:
        errors = []
        if self.h.numerator != 1 or self.h.denominator & (self.h.denominator - 1):
            errors.append(f"h = {self.h} is not a reciprocal power of two")
        if self.n_max < 0:
            errors.append("n_max must be nonnegative")
        resolution = S_HALF_SIDE * Fraction(1, 2**self.n_max) / 4
        if self.h > resolution:
            errors.append(
                f"h = {self.h} too coarse for n_max = {self.n_max}: level-{self.n_max} "
                f"squares need h <= (3/10) 2^-{self.n_max} / 4 = {resolution} "
                "(eight cells across the side)"
            )
        if not (0.0 < self.epsilon < math.pi / 4):
            errors.append("epsilon must lie in (0, pi/4)")
        else:
            window = (4.0 / (3.0 * self.epsilon)) * math.log(2.0)
            if window < 1.5:
                errors.append(f"strip window {window:.3f} shorter than 1.5 periods")
        if not self.tol > 0:
            errors.append("tol must be positive")
        if self.line_samples < 1 or self.radii_samples < 2:
            errors.append("need at least one line and two radii")
        if not (-1.0 < self.slack < 1.0):
            errors.append("slack must lie in (-1, 1)")
        if self.method not in ("auto", "amg", "sor"):
            errors.append(f"unknown solver method {self.method!r}")
        if self.max_cycles < 1:
            errors.append("max_cycles must be positive")
        return errors

    def canonical(self) -> dict:
        return {
            "h": f"1/{self.h.denominator}",
            "n_max": self.n_max,
            "tol": self.tol,
            "epsilon": self.epsilon,
            "line_samples": self.line_samples,
            "radii_samples": self.radii_samples,
            "slack": self.slack,
            "sample_count": self.sample_count,
            "method": self.method,
            "max_cycles": self.max_cycles,
        }

    def seed(self) -> int:
        digest = hashlib.sha256(
            json.dumps(self.canonical(), sort_keys=True).encode()
        ).digest()
        return int.from_bytes(digest[:8], "big")

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        cfg = cls()
        known = set(cfg.canonical())
        for key, raw in data.items():
            if key not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            if key == "h":
                cfg.h = _parse_fraction(raw)
            elif key in ("n_max", "line_samples", "radii_samples", "sample_count", "max_cycles"):
                setattr(cfg, key, int(raw))
            elif key in ("tol", "epsilon", "slack"):
                setattr(cfg, key, float(raw))
            else:
                setattr(cfg, key, str(raw))
        return cfg

    @classmethod
    def from_file(cls, path: Path) -> "RunConfig":
        data = {}
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in body.split("=", 1))
            data[key] = value
        return cls.from_mapping(data)


def _parse_fraction(raw) -> Fraction:
    if isinstance(raw, Fraction):
        return raw
    text = str(raw).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(float(text))


# ---------------------------------------------------------------------------
# check phase (shared by run and verify)


def _radii_set(rng: np.random.Generator, count: int) -> np.ndarray:
    strat = 1.0 + (np.arange(count - 2) + rng.uniform(0.0, 1.0, count - 2)) / (count - 2)
    return np.concatenate([[1.0], np.sort(strat), [2.0]])


def check_phase(
    glued: GluedPotential, pot: AnnulusPotential, config: RunConfig
) -> tuple[list[CheckRecord], DecayTable, dict]:
    """Deterministic check suite: strip records, decay table, annulus
    records, and the constants block."""
    rng = np.random.default_rng(config.seed())
    records, table = run_suite(
        glued,
        rng,
        line_count=config.line_samples,
        slack=config.slack,
        sample_count=config.sample_count,
        majorant_levels=(1, 2, 3),
        solver_tol=config.tol,
        method=config.method,
    )
    records.append(check_annulus_submean(pot, rng, count=max(2000, config.sample_count // 3)))
    radii = _radii_set(rng, config.radii_samples)
    for n in range(1, glued.n_max + 1):
        records.append(check_components(pot, rng, n, count=2000))
        records.append(check_arc_mass_decay(pot, table.c, radii, n, slack=config.slack))
    records.append(check_arc_strip_consistency(pot, math.sqrt(2.0), 1))
    w_inf, w_sup = pot.bounds()
    consts = glued.constants()
    consts.update(
        {
            "c": table.c,
            "a_out": pot.outer_amplitude,
            "lambda": pot.sector_exponent,
            "w_inf": w_inf,
            "w_sup": w_sup,
            "w_sup_analytic": pot.analytic_sup(),
            "M_tilde": table.m_tilde,
            "beta_tilde": table.beta_tilde,
        }
    )
    return records, table, consts


def _report_dict(config, records, table, consts) -> dict:
    return {
        "config": config.canonical(),
        "constants": {k: float(v) for k, v in consts.items()},
        "checks": [r.as_dict() for r in records],
        "decay": table.as_dict(),
        "pass": bool(all(r.passed for r in records)),
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# model store


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _corner_rows(field) -> list:
    rows = []
    for cm, c in zip(getattr(field, "corners", []), getattr(field, "coeffs", [])):
        rows.append(
            [cm.qx, cm.qy, cm.theta0, cm.r1, cm.r2, cm.fit_hi, bool(cm.guarded), float(c)]
        )
    return rows


def _field_meta(fld) -> dict:
    top_value = fld.top_value
    if isinstance(top_value, np.ndarray):
        raise ValueError("per-column top data is not serialized")
    return {
        "p": fld.p,
        "i0": fld.i0,
        "j0": fld.j0,
        "periodic": fld.periodic,
        "top": fld.top,
        "top_value": top_value,
        "residual": fld.residual,
        "problem": fld.problem,
    }


def save_models(out_dir: Path, glued: GluedPotential, pot: AnnulusPotential, config: RunConfig) -> None:
    mdir = out_dir / "models"
    mdir.mkdir(parents=True, exist_ok=True)
    meta: dict = {"config": config.canonical(), "epsilon": pot.eps, "outer_amplitude": pot.outer_amplitude}
    for name, model in (("upper", glued.upper), ("lower", glued.lower)):
        fld = model.field
        baked = fld.baked if hasattr(fld, "baked") else fld
        np.savez_compressed(
            mdir / f"strip_{name}.npz",
            values=baked.values,
            mask=baked.mask,
        )
        meta[name] = {
            "field": _field_meta(baked),
            "decay_ratio": model.decay_ratio,
            "green_scale": model.green_scale,
            "core_depth": model.core_depth,
            "x_offset": model.x_offset,
            "n_max": model.n_max,
            "orientation": model.orientation,
            "corners": _corner_rows(fld),
        }
    g = glued.upper.green
    np.savez_compressed(mdir / "green.npz", values=g.regular.values, mask=g.regular.mask)
    meta["green"] = {
        "field": _field_meta(g.regular),
        "pole": [g.pole.real, g.pole.imag],
        "center": [g.center.real, g.center.imag],
        "half_side": g.half_side,
    }
    _write_json(mdir / "meta.json", meta)
    manifest = {
        "files": {
            name: _sha256(mdir / name)
            for name in ("strip_upper.npz", "strip_lower.npz", "green.npz", "meta.json")
        }
    }
    _write_json(mdir / "manifest.json", manifest)


def _load_field(npz_path: Path, meta: dict) -> Field:
    data = np.load(npz_path)
    return Field(
        p=meta["p"],
        i0=meta["i0"],
        j0=meta["j0"],
        periodic=meta["periodic"],
        values=data["values"],
        mask=data["mask"],
        residual=meta["residual"],
        problem=meta["problem"],
        top=meta["top"],
        top_value=1.0 if meta["top_value"] is None else meta["top_value"],
    )


def load_models(models_dir: Path) -> tuple[GluedPotential, AnnulusPotential, RunConfig]:
    mdir = Path(models_dir)
    manifest_path = mdir / "manifest.json"
    if not manifest_path.exists():
        raise ChecksumError(f"missing manifest {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    for name, digest in manifest["files"].items():
        path = mdir / name
        if not path.exists():
            raise ChecksumError(f"missing model file {name}")
        actual = _sha256(path)
        if actual != digest:
            raise ChecksumError(f"checksum mismatch for {name}: {actual} != {digest}")
    meta = json.loads((mdir / "meta.json").read_text())
    config = RunConfig.from_mapping(meta["config"])

    gmeta = meta["green"]
    green = GreenField(
        regular=_load_field(mdir / "green.npz", gmeta["field"]),
        pole=complex(*gmeta["pole"]),
        center=complex(*gmeta["center"]),
        half_side=gmeta["half_side"],
    )
    halves = {}
    for name in ("upper", "lower"):
        m = meta[name]
        fld = _load_field(mdir / f"strip_{name}.npz", m["field"])
        corners = []
        coeffs = []
        for qx, qy, th0, r1, r2, fit_hi, guarded, c in m["corners"]:
            corners.append(CornerMode(qx, qy, th0, r1, r2, fit_hi, guarded))
            coeffs.append(c)
        # samplers look these up to keep clear of the datum-facing corners
        fld.corners = corners
        fld.coeffs = np.array(coeffs)
        halves[name] = HalfStripModel(
            orientation=m["orientation"],
            n_max=m["n_max"],
            p=m["field"]["p"],
            field=fld,
            green=green,
            decay_ratio=m["decay_ratio"],
            green_scale=m["green_scale"],
            core_depth=m["core_depth"],
            x_offset=m["x_offset"],
        )
    glued = GluedPotential(upper=halves["upper"], lower=halves["lower"])
    pot = AnnulusPotential(
        glued=glued, eps=meta["epsilon"], outer_amplitude=meta["outer_amplitude"]
    )
    return glued, pot, config


# ---------------------------------------------------------------------------
# subcommands


def run_pipeline(config: RunConfig, out_dir: Path) -> int:
    errors = config.validate()
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir.mkdir(parents=True, exist_ok=True)
    timing = {}
    t0 = time.perf_counter()
    try:
        glued = build_glued(
            p=config.p,
            n_max=config.n_max,
            tol=config.tol,
            method=config.method,
            max_cycles=config.max_cycles,
        )
        timing["solve_s"] = time.perf_counter() - t0
        t1 = time.perf_counter()
        pot = build_annulus(glued, config.epsilon)
        records, table, consts = check_phase(glued, pot, config)
        timing["checks_s"] = time.perf_counter() - t1
    except SolverError as err:
        print(f"solver failure: {err} (residual {err.residual:.3e})", file=sys.stderr)
        return EXIT_SOLVER
    report = _report_dict(config, records, table, consts)
    _write_json(out_dir / "report.json", report)
    timing["total_s"] = time.perf_counter() - t0
    _write_json(out_dir / "timing.json", timing)
    save_models(out_dir, glued, pot, config)
    for rec in records:
        print(f"[{'PASS' if rec.passed else 'FAIL'}] {rec.name}: margin {rec.margin:.3e} (tol {rec.tolerance:.2e})")
    print(f"report: {out_dir / 'report.json'}  pass={report['pass']}")
    return EXIT_OK if report["pass"] else EXIT_CHECKS


def verify_only(config: Optional[RunConfig], models_dir: Path, out_dir: Optional[Path]) -> int:
    try:
        glued, pot, stored_config = load_models(models_dir)
    except ChecksumError as err:
        print(f"model integrity error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = config or stored_config
    errors = cfg.validate()
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        records, table, consts = check_phase(glued, pot, cfg)
    except SolverError as err:
        print(f"solver failure: {err} (residual {err.residual:.3e})", file=sys.stderr)
        return EXIT_SOLVER
    report = _report_dict(cfg, records, table, consts)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "report.json", report)
    for rec in records:
        print(f"[{'PASS' if rec.passed else 'FAIL'}] {rec.name}: margin {rec.margin:.3e}")
    return EXIT_OK if report["pass"] else EXIT_CHECKS


def _fmt(v: float) -> str:
    return repr(float(v))


def export_field(models_dir: Path, which: str, out_path: Path) -> int:
    try:
        glued, pot, _ = load_models(models_dir)
    except ChecksumError as err:
        print(f"model integrity error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    rows = []
    if which in ("upper", "lower"):
        model = getattr(glued, which)
        fld = model.field
        xs = fld.node_x()
        ys = fld.node_y()
        header = "x,y,value"
        sign = 1.0 if which == "upper" else -1.0
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                rows.append(f"{_fmt(x)},{_fmt(sign * y)},{_fmt(fld.values[j, i])}")
    elif which == "glued":
        h = glued.h
        ny = glued.upper.field.values.shape[0] - 1
        nx = glued.upper.field.values.shape[1]
        header = "x,y,value"
        for j in range(-ny, ny + 1):
            y = j * h
            xs = np.arange(nx) * h
            vals = glued.evaluate_many(xs + 1j * y)
            for x, v in zip(xs, vals):
                rows.append(f"{_fmt(x)},{_fmt(y)},{_fmt(v)}")
    elif which == "annulus":
        header = "re,im,value"
        radii = np.linspace(1.0, 2.0, 64)
        thetas = np.linspace(-math.pi, math.pi, 512, endpoint=False)
        for r in radii:
            zs = r * np.exp(1j * thetas)
            vals = pot.evaluate_many(zs)
            for z, v in zip(zs, vals):
                rows.append(f"{_fmt(z.real)},{_fmt(z.imag)},{_fmt(v)}")
    else:
        print(f"unknown field {which!r}", file=sys.stderr)
        return EXIT_CONFIG
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(header + "\n" + "\n".join(rows) + "\n")
    print(f"wrote {len(rows)} rows to {out_path}")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="perfstrip",
        description="Construct and verify the self-similar subharmonic strip potential",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: solve, assemble, verify, report")
    p_run.add_argument("--config", type=Path, default=None)
    p_run.add_argument("--out", type=Path, default=Path("perfstrip-out"))

    p_verify = sub.add_parser("verify", help="re-run the check suite against stored models")
    p_verify.add_argument("--config", type=Path, default=None)
    p_verify.add_argument("--models", type=Path, required=True)
    p_verify.add_argument("--out", type=Path, default=None)

    p_export = sub.add_parser("export", help="export a field as CSV")
    p_export.add_argument("--models", type=Path, required=True)
    p_export.add_argument("--which", choices=("upper", "lower", "glued", "annulus"), required=True)
    p_export.add_argument("--out", type=Path, required=True)

    args = parser.parse_args(argv)
    try:
        config = RunConfig.from_file(args.config) if getattr(args, "config", None) else None
    except (ConfigError, OSError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "run":
        return run_pipeline(config or RunConfig(), args.out)
    if args.command == "verify":
        return verify_only(config, args.models, args.out)
    if args.command == "export":
        return export_field(args.models, args.which, args.out)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
