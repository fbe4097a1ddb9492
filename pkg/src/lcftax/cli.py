"""Command-line entry point: ``lcftax {simulate,convert,exit,identity,figure}``.

Every command reads a JSON config (``--config``); ``--out`` and ``--seed``
override the config's ``out`` and ``seed``. Exit codes: 0 success, 1 failed
self-check, 2 invalid config, 3 rate without a uniqueness certificate.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .errors import AdmissibilityError, ConfigError, DomainError
from .montecarlo import estimate_exit_transform
from .paths import (
    BrownianWithDrift,
    CramerLundberg,
    RngStream,
    first_passage,
    generate_brownian_drift,
    generate_cramer_lundberg,
    running_max,
)
from .rates import RateFunction, gamma_bar, latent_to_natural, natural_to_latent, solve_rate_ode, two_level_rate
from .scale import EXIT_TOLERANCE, ExitProblem, exit_transform, scale_function, survival_probability
from .taxation import TaxedPath, apply_latent_tax, apply_natural_tax, first_passage_taxed

_NUM = {"type": "number"}

MODEL_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "type": {"const": "cramer_lundberg"},
                "premium_rate": _NUM,
                "claim_intensity": _NUM,
                "claim_mean": _NUM,
            },
            "required": ["type", "premium_rate", "claim_intensity", "claim_mean"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"type": {"const": "brownian"}, "drift": _NUM, "volatility": _NUM},
            "required": ["type", "drift", "volatility"],
            "additionalProperties": False,
        },
    ]
}

RATE_SCHEMA = {
    "type": "object",
    "properties": {
        "domain_start": _NUM,
        "spec": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "constant": _NUM,
                "piecewise": {
                    "type": "object",
                    "properties": {
                        "thresholds": {"type": "array", "items": _NUM},
                        "values": {"type": "array", "items": _NUM},
                    },
                    "required": ["thresholds", "values"],
                    "additionalProperties": False,
                },
                "tabulated": {
                    "type": "object",
                    "properties": {
                        "knots": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                        },
                        "interpolation": {"enum": ["step", "linear"]},
                    },
                    "required": ["knots"],
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "admissibility": {
            "oneOf": [
                {"enum": ["none", "monotone"]},
                {
                    "type": "object",
                    "properties": {"lipschitz": _NUM},
                    "required": ["lipschitz"],
                    "additionalProperties": False,
                },
            ]
        },
    },
    "required": ["domain_start", "spec"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "model": MODEL_SCHEMA,
        "rate": RATE_SCHEMA,
        "x": _NUM,
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "a": _NUM,
        "q": {"type": "number", "minimum": 0},
        "n_paths": {"type": "integer", "minimum": 100},
        "step": {"type": "number", "exclusiveMinimum": 0},
        "grid_step": {"type": "number", "exclusiveMinimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "regime": {"enum": ["latent", "natural"]},
        "direction": {"enum": ["latent_to_natural", "natural_to_latent"]},
        "preset": {"enum": ["figureA"]},
        "variant": {"enum": [1, 2]},
    },
    "additionalProperties": False,
}

REQUIRED = {
    "simulate": ["model", "rate", "x", "horizon"],
    "convert": ["rate", "x", "direction"],
    "exit": ["model", "rate", "x", "a"],
    "identity": ["model", "rate", "x"],
    "figure": [],
}

FIGURE_A = {"alpha": 0.4, "beta": 0.9, "b": 20.0, "x": {1: 7.0, 2: 10.0}, "horizon": 40.0}


def validate_config(config: dict, command: str) -> dict:
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    missing = [k for k in REQUIRED[command] if k not in config]
    if missing:
        raise ConfigError(f"config for '{command}' is missing required key(s): {', '.join(missing)}")
    return config


def model_from_json(data: dict):
    kind = data["type"]
    if kind == "cramer_lundberg":
        return CramerLundberg(data["premium_rate"], data["claim_intensity"], data["claim_mean"])
    return BrownianWithDrift(data["drift"], data["volatility"])


def model_to_json(model) -> dict:
    if isinstance(model, CramerLundberg):
        return {
            "type": "cramer_lundberg",
            "premium_rate": model.premium_rate,
            "claim_intensity": model.claim_intensity,
            "claim_mean": model.claim_mean,
        }
    return {"type": "brownian", "drift": model.drift, "volatility": model.volatility}


def _num(v: float):
    """JSON-safe number; infinity becomes the string 'inf'."""
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _emit(payload: dict, out_dir: Path | None, name: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(text + "\n", encoding="utf-8", newline="\n")


def _simulate_path(model, x, horizon, seed, step):
    rng = RngStream(seed, 0)
    if isinstance(model, CramerLundberg):
        return generate_cramer_lundberg(model, x, horizon, rng)
    return generate_brownian_drift(model, x, horizon, step, rng)


def _markers(taxed: TaxedPath) -> dict:
    """Rate breakpoints in pre-tax coordinates and their images for the taxed process."""
    rate = taxed.rate.restrict(taxed.start_value)
    levels = rate.breakpoints()
    if taxed.regime == "latent":
        pre = levels
        post = np.asarray(taxed.level_map(levels)) if levels.size else levels
    else:
        post = levels
        pre = np.asarray(taxed.level_map.inverse(levels)) if levels.size else levels
    return {
        "regime": taxed.regime,
        "pre_tax_levels": [_num(v) for v in np.atleast_1d(pre)],
        "taxed_levels": [_num(v) for v in np.atleast_1d(post)],
        "taxed_ceiling": _num(taxed.ceiling),
    }


def cmd_simulate(config: dict, out_dir: Path) -> int:
    model = model_from_json(config["model"])
    rate = RateFunction.from_json(config["rate"])
    x, horizon = float(config["x"]), float(config["horizon"])
    path = _simulate_path(model, x, horizon, config.get("seed", 0), config.get("step", 0.01))
    regime = config.get("regime", "natural")
    taxed = apply_latent_tax(path, rate) if regime == "latent" else apply_natural_tax(path, rate)
    grid = None
    if "grid_step" in config:
        grid = np.arange(0.0, horizon, config["grid_step"])
    out_dir.mkdir(parents=True, exist_ok=True)
    path.to_csv(out_dir / "path.csv")
    taxed.to_csv(out_dir / "taxed.csv", grid)
    markers = _markers(taxed)
    (out_dir / "markers.json").write_text(json.dumps(markers, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    summary = {
        "breakpoints": len(path),
        "final_X": _num(path.right[-1]),
        "final_taxed": _num(taxed.values(horizon)),
        "total_tax": _num(taxed.total_tax(horizon)),
        "files": ["path.csv", "taxed.csv", "markers.json"],
        **markers,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_convert(config: dict, out_dir: Path | None) -> int:
    rate = RateFunction.from_json(config["rate"])
    x = float(config["x"])
    if config["direction"] == "latent_to_natural":
        converted = latent_to_natural(rate, x)
        payload = {"rate": converted.to_json(), "gamma_bar_limit": _num(gamma_bar(rate, x).limit)}
    else:
        converted = natural_to_latent(rate, x)
        payload = {"rate": converted.to_json(), "ode_limit": _num(solve_rate_ode(rate, x).limit)}
    payload["direction"] = config["direction"]
    _emit(payload, out_dir, "converted.json")
    return 0


def cmd_exit(config: dict, out_dir: Path | None) -> int:
    model = model_from_json(config["model"])
    rate = RateFunction.from_json(config["rate"])
    x, a, q = float(config["x"]), float(config["a"]), float(config.get("q", 0.0))
    try:
        problem = ExitProblem(x, a, q, rate)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    limit = solve_rate_ode(rate.restrict(x), x).limit
    value = exit_transform(problem, scale_function(model, q))
    record = {
        "model": model_to_json(model),
        "q": q,
        "x": x,
        "a": a,
        "rate": rate.to_json(),
        "value": value,
        "tolerance": EXIT_TOLERANCE,
        "degenerate": a >= limit,
    }
    payload = {"analytic": record, "monte_carlo": None}
    if "n_paths" in config:
        batch_csv = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            batch_csv = out_dir / "mc_batches.csv"
        est = estimate_exit_transform(
            model,
            x,
            a,
            q,
            rate,
            config["n_paths"],
            config.get("horizon", 500.0),
            config.get("seed", 0),
            workers=config.get("workers", 1),
            step=config.get("step", 0.01),
            batch_csv=batch_csv,
        )
        payload["monte_carlo"] = est.to_json()
    _emit(payload, out_dir, "exit.json")
    return 0


def cmd_identity(config: dict, out_dir: Path | None) -> int:
    model = model_from_json(config["model"])
    if model.mean_drift <= 0:
        raise ConfigError("the tax identity needs a model with positive drift psi'(0+) > 0")
    rate = RateFunction.from_json(config["rate"])
    x = float(config["x"])
    res = survival_probability(model, x, rate)
    ratio = None
    if 0 < res.value < 1 and 0 < res.phi_0 < 1:
        ratio = math.log(res.value) / math.log(res.phi_0)
    payload = {
        "phi_delta": res.value,
        "phi_0": res.phi_0,
        "ratio_check": ratio,
        "degenerate": res.degenerate,
        "x": x,
        "model": model_to_json(model),
    }
    _emit(payload, out_dir, "identity.json")
    return 0


def _polyline(points, sx, sy) -> str:
    return " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in points)


def render_svg(taxed: TaxedPath, levels: list[float], width: int = 800, height: int = 420) -> str:
    """Minimal SVG: pre-tax path dashed, taxed path solid, level markers dash-dot."""
    path = taxed.pre_tax
    grid = np.union1d(np.linspace(0, path.horizon, 1500), path.times)
    pre_pts, tax_pts = [], []
    for t, xl, xr, vl, vr in zip(
        grid, path.value_left(grid), path.value(grid), taxed.values(grid) + (path.value_left(grid) - path.value(grid)), taxed.values(grid)
    ):
        pre_pts += [(t, xl), (t, xr)]
        tax_pts += [(t, vl), (t, vr)]
    ys = [v for _, v in pre_pts] + [v for _, v in tax_pts] + list(levels)
    lo, hi = min(ys), max(ys)
    pad = 0.05 * (hi - lo or 1.0)
    lo, hi = lo - pad, hi + pad
    margin = 40

    def sx(t):
        return margin + (width - 2 * margin) * t / path.horizon

    def sy(v):
        return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for lv in levels:
        parts.append(
            f'<line x1="{margin}" y1="{sy(lv):.2f}" x2="{width - margin}" y2="{sy(lv):.2f}" '
            f'stroke="gray" stroke-dasharray="8,3,2,3"/>'
        )
        parts.append(f'<text x="{width - margin + 4}" y="{sy(lv) + 4:.2f}" font-size="11">{lv:g}</text>')
    parts.append(f'<polyline fill="none" stroke="black" stroke-dasharray="5,4" points="{_polyline(pre_pts, sx, sy)}"/>')
    parts.append(f'<polyline fill="none" stroke="black" stroke-width="1.5" points="{_polyline(tax_pts, sx, sy)}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def figure_a(variant: int, seed: int, out_dir: Path | None = None) -> dict:
    """Example paths for the two-level rate with alpha = 0.4, beta = 0.9, b = 20.

    The pre-tax model is Cramer-Lundberg (c = 2, lambda = 1, claim mean 1);
    it is illustrative only. The returned report records whether X passes b
    at the same time as the taxed process passes b'.
    """
    x = FIGURE_A["x"][variant]
    model = CramerLundberg(2.0, 1.0, 1.0)
    path = generate_cramer_lundberg(model, x, FIGURE_A["horizon"], RngStream(seed, 0))
    latent = two_level_rate(FIGURE_A["alpha"], FIGURE_A["beta"], FIGURE_A["b"], x)
    natural = latent_to_natural(latent, x)
    b = FIGURE_A["b"]
    b_prime = natural.spec.thresholds[0]
    taxed = apply_latent_tax(path, latent)
    tau_x = first_passage(path, b, "up")
    tau_taxed = first_passage_taxed(taxed, b_prime, "up")
    tau_natural = first_passage_taxed(apply_natural_tax(path, natural), b_prime, "up")
    report = {
        "variant": variant,
        "seed": seed,
        "x": x,
        "b": b,
        "b_prime": b_prime,
        "tau_X_above_b": _num(tau_x),
        "tau_taxed_above_b_prime": _num(tau_taxed),
        "tau_natural_above_b_prime": _num(tau_natural),
        "passage_times_equal": tau_x == tau_taxed,
        "max_X": _num(running_max(path, path.horizon)),
    }
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        path.to_csv(out_dir / "path.csv")
        taxed.to_csv(out_dir / "taxed.csv")
        (out_dir / "figure.svg").write_text(render_svg(taxed, [b, b_prime]), encoding="utf-8", newline="\n")
        (out_dir / "markers.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report


def cmd_figure(config: dict, out_dir: Path) -> int:
    report = figure_a(int(config.get("variant", 1)), int(config.get("seed", 0)), out_dir)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["passage_times_equal"] else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "convert": cmd_convert,
    "exit": cmd_exit,
    "identity": cmd_identity,
    "figure": cmd_figure,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcftax", description="Loss-carry-forward tax processes")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    parser.add_argument("--config", type=Path, dest="g_config", help=argparse.SUPPRESS)
    parser.add_argument("--out", type=Path, dest="g_out", help=argparse.SUPPRESS)
    parser.add_argument("--seed", type=int, dest="g_seed", help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "figure":
            sp.add_argument("--variant", type=int, choices=(1, 2))
    return parser


def load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config_path = args.config or args.g_config
    out = args.out or args.g_out
    seed = args.seed if args.seed is not None else args.g_seed
    try:
        config = load_config(config_path)
        if args.command == "figure":
            config.setdefault("preset", "figureA")
            if args.variant is not None:
                config["variant"] = args.variant
        if seed is not None:
            config["seed"] = seed
        validate_config(config, args.command)
        if out is None and "out" in config:
            out = Path(config["out"])
        if out is None and args.command in ("simulate", "figure"):
            out = Path("out")
        return COMMANDS[args.command](config, out)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AdmissibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
