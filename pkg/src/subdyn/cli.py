"""Batch experiment runner.

Subcommands:

* run    -- execute one seeded experiment from a JSON config, writing
            trace.csv and summary.json into the output directory;
* sweep  -- replay the same config over a seed range, one directory per
            seed, replicas run in parallel;
* audit  -- exhaustive oracle checks and numeric regret-bound verification
            on a small fixture.

Flag precedence is flags > config file > defaults.  Exit codes: 0 success,
2 config validation failure, 3 runtime failure inside an algorithm.
Verbosity comes from the SUBDYN_LOG environment variable (e.g. DEBUG).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from subdyn.core import AlgorithmError, ConfigurationError

log = logging.getLogger("subdyn.cli")

KINDS = ("synthetic", "demand_response", "network_reconfig")
ALGORITHMS = ("osga", "osgga", "ospgd")

# Which algorithm each synthetic stream exercises.
STREAM_ALGORITHM = {
    "swap_modular": "osga",
    "swap_sqrt": "osga",
    "unconstrained_modular": "osga",
    "generic_swap": "osgga",
    "drifting_submodular": "ospgd",
}


@dataclass
class ExperimentConfig:
    kind: str
    algorithm: str
    T: int
    seed: int
    delta: float
    alpha: float | None
    out: Path
    raw: dict

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "ExperimentConfig":
        doc: dict = {}
        if path is not None:
            try:
                with open(path) as fh:
                    doc = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        for key, value in overrides.items():
            if value is not None:
                doc[key] = value
        kind = doc.get("kind")
        if kind not in KINDS:
            raise ConfigurationError(f"kind must be one of {KINDS}, got {kind!r}")
        algorithm = doc.get("algorithm")
        if algorithm not in ALGORITHMS:
            raise ConfigurationError(
                f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}"
            )
        cfg = cls(
            kind=kind,
            algorithm=algorithm,
            T=int(doc.get("T", 100)),
            seed=int(doc.get("seed", 0)),
            delta=float(doc.get("delta", 1.0)),
            alpha=None if doc.get("alpha") is None else float(doc["alpha"]),
            out=Path(doc.get("out", "out")),
            raw=doc,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.T < 1:
            raise ConfigurationError(f"T must be >= 1, got {self.T}")
        if self.delta <= 0:
            raise ConfigurationError("delta must be positive")
        if self.alpha is not None and self.alpha < 1.0:
            raise ConfigurationError("alpha must be >= 1")
        if self.kind == "network_reconfig" and self.algorithm != "osga":
            raise ConfigurationError("network_reconfig pairs with the osga update")
        if self.kind == "demand_response" and self.algorithm != "ospgd":
            raise ConfigurationError("demand_response pairs with the ospgd update")
        if self.kind == "synthetic":
            stream = self.raw.get("stream", {})
            name = stream.get("name")
            if name not in STREAM_ALGORITHM:
                raise ConfigurationError(
                    f"synthetic stream must be one of {sorted(STREAM_ALGORITHM)}"
                )
            if STREAM_ALGORITHM[name] != self.algorithm:
                raise ConfigurationError(
                    f"stream {name!r} runs under {STREAM_ALGORITHM[name]}, "
                    f"not {self.algorithm}"
                )
        if self.kind == "network_reconfig" and "fixture" not in self.raw:
            raise ConfigurationError("network_reconfig config needs a fixture")


def _run_synthetic(cfg: ExperimentConfig):
    from subdyn.algorithms import run_online, write_trace_csv
    from subdyn.synthetic import instance_from_config

    stream_cfg = dict(cfg.raw.get("stream", {}))
    name = stream_cfg.pop("name")
    n = int(cfg.raw.get("n", 8))
    if name == "drifting_submodular":
        stream_cfg.setdefault("delta", cfg.delta)
    instance = instance_from_config(name, n=n, T=cfg.T, seed=cfg.seed, **stream_cfg)
    alpha = cfg.alpha if cfg.alpha is not None else instance.beta
    compute_optima = bool(cfg.raw.get("compute_optima", True))
    result = run_online(
        instance.stream,
        instance.make_learner,
        cfg.T,
        cfg.seed,
        optimum_oracle=instance.optimum_oracle if compute_optima else None,
        alpha=alpha,
    )
    summary = {
        "cumulative_loss": sum(row.loss for row in result.trace),
        "cumulative_alpha_regret": result.regret.cumulative_alpha_regret,
        "variation_V_T": result.variation.cumulative if compute_optima else None,
        "alpha": alpha,
    }
    return result.trace, summary, write_trace_csv


def _run_demand_response(cfg: ExperimentConfig):
    from subdyn.apps.demand_response import (
        load_fleet,
        random_fleet,
        run_dr_experiment,
        write_dr_trace_csv,
    )
    from subdyn.signals import SignalConfig

    fleet_cfg = cfg.raw.get("fleet", {"n": 15, "seed": cfg.seed})
    if isinstance(fleet_cfg, list):
        fleet = load_fleet(fleet_cfg)
    elif "path" in fleet_cfg:
        fleet = load_fleet(fleet_cfg["path"])
    else:
        fleet = random_fleet(int(fleet_cfg.get("n", 15)), int(fleet_cfg.get("seed", cfg.seed)))
    signal = SignalConfig(**cfg.raw.get("signal", {}))
    from subdyn.apps.demand_response import DEFAULT_DR_DELTA

    delta = cfg.delta if cfg.raw.get("delta") is not None else DEFAULT_DR_DELTA
    result = run_dr_experiment(
        fleet,
        signal,
        cfg.T,
        cfg.seed,
        dispatcher=cfg.raw.get("dispatcher", "ospgd"),
        delta=delta,
        compute_optima=bool(cfg.raw.get("compute_optima", True)),
    )
    summary = {
        "rmse": result.rmse,
        "cumulative_alpha_regret": result.regret.cumulative_alpha_regret,
        "variation_V_T": result.variation.cumulative,
        "dispatcher": result.dispatcher,
    }
    return result.trace, summary, write_dr_trace_csv


def _run_network_reconfig(cfg: ExperimentConfig):
    from subdyn.apps.network_reconfig import (
        PerturbConfig,
        fixture_path,
        load_network,
        run_nr_experiment,
        write_nr_trace_csv,
    )

    fixture = cfg.raw["fixture"]
    if not os.path.exists(fixture):
        fixture = fixture_path(fixture)
    network = load_network(fixture)
    perturb = PerturbConfig(**cfg.raw.get("perturbation", {}))
    result = run_nr_experiment(
        network,
        perturb,
        cfg.T,
        cfg.seed,
        policy=cfg.raw.get("policy", "osga"),
        big_M=float(cfg.raw.get("big_M", 1e6)),
        pf_tolerance=float(cfg.raw.get("pf_tolerance", 1e-8)),
    )
    summary = {
        "total_losses": result.total_losses,
        "cumulative_alpha_regret": result.regret.cumulative_alpha_regret,
        "variation_V_T": result.variation.cumulative,
        "all_radial": result.all_radial,
    }
    return result.trace, summary, write_nr_trace_csv


def run_experiment(cfg: ExperimentConfig, out_dir: Path) -> dict:
    """Execute one experiment and write trace.csv + summary.json."""
    started = time.perf_counter()
    if cfg.kind == "synthetic":
        trace, summary, writer = _run_synthetic(cfg)
    elif cfg.kind == "demand_response":
        trace, summary, writer = _run_demand_response(cfg)
    else:
        trace, summary, writer = _run_network_reconfig(cfg)
    summary["wall_time"] = time.perf_counter() - started
    summary["kind"] = cfg.kind
    summary["algorithm"] = cfg.algorithm
    summary["T"] = cfg.T
    summary["seed"] = cfg.seed
    out_dir.mkdir(parents=True, exist_ok=True)
    writer(out_dir / "trace.csv", trace)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    return summary


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(
        args.config,
        {
            "T": args.rounds,
            "seed": args.seed,
            "delta": args.delta,
            "alpha": args.alpha,
            "out": args.out,
        },
    )
    summary = run_experiment(cfg, cfg.out)
    log.info("run finished: %s", summary)
    print(json.dumps(summary, indent=1))
    return 0


def _parse_seed_range(spec: str) -> list[int]:
    try:
        a, b = spec.split("..")
        lo, hi = int(a), int(b)
    except ValueError as exc:
        raise ConfigurationError(f"bad seed range {spec!r}; expected A..B") from exc
    if hi < lo:
        raise ConfigurationError(f"empty seed range {spec!r}")
    return list(range(lo, hi + 1))


def _cmd_sweep(args) -> int:
    from subdyn.algorithms import sweep_seeds

    seeds = _parse_seed_range(args.seeds)
    base = ExperimentConfig.load(
        args.config,
        {
            "T": args.rounds,
            "delta": args.delta,
            "alpha": args.alpha,
            "out": args.out,
        },
    )

    def one(seed: int) -> dict:
        cfg = ExperimentConfig.load(
            args.config,
            {
                "T": args.rounds,
                "seed": seed,
                "delta": args.delta,
                "alpha": args.alpha,
                "out": args.out,
            },
        )
        return run_experiment(cfg, base.out / f"seed_{seed}")

    results = sweep_seeds(one, seeds, max_workers=args.workers)
    for seed, summary in zip(seeds, results):
        print(f"seed {seed}: {json.dumps(summary)}")
    return 0


def _audit_fixture(path: str | None) -> dict:
    if path is None:
        return {"type": "suite", "n": 8, "seed": 3}
    with open(path) as fh:
        return json.load(fh)


def _cmd_audit(args) -> int:
    import numpy as np

    from subdyn import audit as audit_mod
    from subdyn.core import GroundSet, modular_function, table_function
    from subdyn.oracle import (
        audit_beta_sandwich,
        check_submodular,
        exact_lipschitz_modulus,
    )
    from subdyn.rounding import SeededRng
    from subdyn.synthetic import (
        drifting_submodular_instance,
        generic_swap_instance,
        random_submodular_table,
        swap_modular_instance,
        swap_sqrt_instance,
        unconstrained_modular_instance,
    )

    spec = _audit_fixture(args.fixture)
    n = int(spec.get("n", 8))
    seed = int(spec.get("seed", 3))
    kind = spec.get("type", "suite")
    failed = False

    def show(line: str) -> None:
        print(line)

    if kind == "modular":
        weights = spec.get("weights") or list(
            2.0 * SeededRng(seed).uniforms(n) - 1.0
        )
        f = modular_function(GroundSet(len(weights)), weights)
    elif kind == "supermodular":
        ground = GroundSet(n)
        bits = np.arange(1 << n)
        card = np.zeros(1 << n)
        for i in range(n):
            card += (bits >> i) & 1
        f = table_function(ground, card**2, name="card_squared")
    elif kind in ("suite", "random_submodular"):
        ground = GroundSet(n)
        f = table_function(
            ground, random_submodular_table(n, SeededRng(seed)), name="random"
        )
    else:
        raise ConfigurationError(f"unknown audit fixture type {kind!r}")

    report = check_submodular(f)
    if report.counterexample is None:
        show(f"submodular: yes (margin {report.margin:.3g})")
    else:
        a, b, i = report.counterexample
        show(
            f"submodular: NO (margin {report.margin:.3g}, "
            f"counterexample A={a.indices()}, B={b.indices()}, i={i})"
        )

    if n <= 12:
        show(f"exact smoothness modulus L = {exact_lipschitz_modulus(f):.6g}")
    else:
        show(f"exact smoothness modulus: skipped (n={n} > 12)")

    sqrt_inst = swap_sqrt_instance(n=min(n, 8), T=20, seed=seed)
    rd = sqrt_inst.stream.reveal(1)
    sandwich = audit_beta_sandwich(rd.f, rd.f_approx, sqrt_inst.beta)
    show(
        f"surrogate sandwich: worst ratio {sandwich.worst_ratio:.6g} "
        f"(beta={sqrt_inst.beta:.6g}) [{'pass' if sandwich.passes else 'FAIL'}]"
    )
    failed |= not sandwich.passes

    eq = audit_mod.dr_equivalence_report(min(n, 8), seed)
    show(
        f"dispatch objective literal-vs-closed-form: max rel err "
        f"{eq['max_rel_err']:.3g} [{'pass' if eq['passed'] else 'FAIL'}]"
    )
    failed |= not eq["passed"]

    for inst in (
        swap_modular_instance(n=min(n, 8), T=30, seed=seed),
        sqrt_inst,
    ):
        rep = audit_mod.greedy_bound_report(inst)
        show(rep.line())
        failed |= not rep.passed

    rep = audit_mod.generic_greedy_bound_report(
        generic_swap_instance(n=min(n, 8), T=30, seed=seed)
    )
    show(rep.line())
    failed |= not rep.passed

    uncon = unconstrained_modular_instance(n=min(n, 8), T=30, seed=seed)
    rep = audit_mod.greedy_bound_report(uncon)
    show(rep.line().replace("greedy regret", "unconstrained greedy regret"))
    failed |= not rep.passed

    inst = drifting_submodular_instance(n=min(n, 8), T=100, seed=seed)
    T = len(inst.stream)
    proj = audit_mod.projected_descent_bound_report(
        [inst.stream.reveal(t) for t in range(1, T + 1)], n_seeds=50
    )
    for line in proj.lines():
        show(line)
    failed |= not (proj.mean_passed and proj.hp_passed)

    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subdyn",
        description="Online set-function minimization experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one seeded experiment")
    run_p.add_argument("--config", required=True, help="JSON experiment config")
    run_p.add_argument("--rounds", type=int, default=None)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--delta", type=float, default=None)
    run_p.add_argument("--alpha", type=float, default=None)
    run_p.add_argument("--out", default=None)
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="replay a config over a seed range")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--seeds", required=True, help="range A..B inclusive")
    sweep_p.add_argument("--rounds", type=int, default=None)
    sweep_p.add_argument("--delta", type=float, default=None)
    sweep_p.add_argument("--alpha", type=float, default=None)
    sweep_p.add_argument("--out", default=None)
    sweep_p.add_argument("--workers", type=int, default=4)
    sweep_p.set_defaults(func=_cmd_sweep)

    audit_p = sub.add_parser("audit", help="oracle checks and bound verification")
    audit_p.add_argument(
        "--fixture", default=None, help="JSON audit fixture (default: built-in suite)"
    )
    audit_p.set_defaults(func=_cmd_audit)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("SUBDYN_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AlgorithmError as exc:
        print(f"algorithm error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
