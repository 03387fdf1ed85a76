"""Command-line front end: train, eval, calibrate, compare."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import config as cfgmod
from . import cycle as cycmod
from . import trainer
from .env import write_trajectory
from .fql import AgentShapeError, load_agent, save_agent
from .powertrain import CalibrationError, PolarizationAnchors, calibrate_polarization, calibration_report

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad flags, unreadable inputs, or invalid configuration."""


def _resolve_cycle_source(name_or_path, units):
    if name_or_path in cycmod.BUNDLED:
        return cycmod.resolve_cycle(name_or_path)
    if not os.path.exists(name_or_path):
        raise UsageError(f"cycle not found: {name_or_path} (bundled: {', '.join(sorted(cycmod.BUNDLED))})")
    stem = os.path.splitext(os.path.basename(name_or_path))[0]
    return cycmod.load_cycle(name_or_path, units=units, name=stem)


def _load_run_config(args, flag_overrides):
    overrides = {k: v for k, v in flag_overrides.items() if v is not None}
    try:
        return cfgmod.build_run_config(file_path=args.config, overrides=overrides)
    except cfgmod.ConfigError as exc:
        raise UsageError(str(exc)) from exc


def _prepare(rc):
    """Model + powered cycle for the configured run."""
    model = rc.build_model()
    raw = _resolve_cycle_source(rc.train.cycle, rc.cycle_units)
    return model, cycmod.derive_power(raw, model.vehicle)


def cmd_train(args) -> int:
    rc = _load_run_config(args, {
        "train.cycle": args.cycle,
        "train.cycle_units": args.cycle_units,
        "train.episodes": args.episodes,
        "train.seed": args.seed,
        "train.literal_epsilon": args.paper_literal_epsilon,
        "env.start_penalty_weight": args.k_start,
        "env.penalty_mode": args.penalty_mode,
    })
    model, cyc = _prepare(rc)
    os.makedirs(args.out_dir, exist_ok=True)

    def progress(m):
        if m.episode % 200 == 0 or m.episode == rc.train.episodes:
            print(
                f"episode {m.episode}/{rc.train.episodes} eps={m.epsilon:.4f} "
                f"avgR={m.avg_reward:.4f} soc={m.final_soc:.3f}",
                file=sys.stderr,
            )

    agent, metrics = trainer.train(rc.train, model=model, cyc=cyc, progress=progress)
    agent_path = os.path.join(args.out_dir, "agent.json")
    curve_path = os.path.join(args.out_dir, "training_curve.csv")
    save_agent(agent_path, agent)
    trainer.write_training_curve(curve_path, metrics)
    cfgmod.write_resolved(rc, os.path.join(args.out_dir, "resolved_config.txt"))
    last = metrics[-1]
    print(f"trained {len(metrics)} episodes on {cyc.name}: "
          f"final avgR={last.avg_reward:.4f} soc={last.final_soc:.3f} agent={agent_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not os.path.exists(args.agent):
        raise UsageError(f"agent file not found: {args.agent}")
    rc = _load_run_config(args, {
        "train.cycle": args.cycle,
        "train.cycle_units": args.cycle_units,
    })
    try:
        agent = load_agent(args.agent)
    except (AgentShapeError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load agent {args.agent}: {exc}") from exc
    if not 0.0 < args.soc0 < 1.0:
        raise UsageError(f"--soc0 must lie strictly inside (0, 1), got {args.soc0}")
    if args.repeat < 1:
        raise UsageError("--repeat must be >= 1")
    model, cyc = _prepare(rc)
    report = trainer.evaluate(
        agent,
        cyc=cyc,
        initial_soc=args.soc0,
        repetitions=args.repeat,
        model=model,
        env_cfg=rc.env,
        cycle_name=cyc.name,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    report_path = os.path.join(args.out_dir, "eval_report.json")
    trainer.save_eval_report(report_path, report)
    write_trajectory(os.path.join(args.out_dir, "trajectory.csv"), cyc, report.first_steps, report.first_log)
    cfgmod.write_resolved(rc, os.path.join(args.out_dir, "resolved_config.txt"))
    for rep in report.repetitions:
        flag = " boundary-exit" if rep.boundary_exit else ""
        print(f"rep {rep.episode:2d}: avgR={rep.avg_reward:.4f} "
              f"h2={rep.h2_g_per_100km:.2f} g/100km soc={rep.final_soc:.4f} "
              f"starts={rep.n_start}{flag}")
    print(f"report={report_path}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    rc = _load_run_config(args, {})
    anchors = PolarizationAnchors()
    if args.p_max_w is not None:
        anchors = replace(anchors, p_max_w=args.p_max_w)
    if args.i_peak_a is not None:
        anchors = replace(anchors, i_at_p_max_a=args.i_peak_a)
    try:
        fc = calibrate_polarization(rc.fc, anchors=anchors)
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        for name, target, achieved, rel in exc.residuals:
            print(f"  {name}: target {target:g} achieved {achieved:g} ({rel * 100:+.2f}%)", file=sys.stderr)
        return EXIT_RUNTIME
    payload = json.dumps(calibration_report(fc), indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(payload)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    rc = _load_run_config(args, {
        "train.cycle": args.cycle,
        "train.cycle_units": args.cycle_units,
        "train.literal_epsilon": args.paper_literal_epsilon,
        "env.start_penalty_weight": args.k_start,
        "env.penalty_mode": args.penalty_mode,
    })
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    model, cyc = _prepare(rc)
    rows = []
    for k_start in (rc.env.start_penalty_weight, 0.0):
        env_cfg = replace(rc.env, start_penalty_weight=k_start)
        starts, h2, soc = [], [], []
        for offset in range(args.seeds):
            tc = replace(rc.train, seed=rc.train.seed + offset, env=env_cfg)
            agent, _ = trainer.train(tc, model=model, cyc=cyc)
            rep = trainer.evaluate(
                agent, cyc=cyc, repetitions=1, model=model,
                env_cfg=env_cfg, cycle_name=cyc.name,
            ).repetitions[0]
            starts.append(rep.n_start)
            h2.append(rep.h2_g_per_100km)
            soc.append(rep.final_soc)
        rows.append((k_start, float(np.mean(starts)), float(np.mean(h2)), float(np.mean(soc))))
    print(f"cycle={cyc.name} seeds={args.seeds} (base seed {rc.train.seed})")
    print(f"{'k_start':>8} {'mean_n_start':>13} {'mean_h2_g_100km':>16} {'mean_final_soc':>15}")
    for k_start, s, h, f in rows:
        print(f"{k_start:8.3f} {s:13.2f} {h:16.2f} {f:15.4f}")
    return EXIT_OK


def _add_training_flags(sp):
    # optional knobs shared by the commands that train; every one maps 1:1
    # onto a config key, absent flags defer to file values
    sp.add_argument("--cycle-units", choices=("mps", "kmh"),
                    help="velocity units of a --cycle CSV path")
    sp.add_argument("--k-start", type=float,
                    help="fuel-cell start penalty weight")
    sp.add_argument("--penalty-mode", choices=("per_event", "terminal_lump"))
    sp.add_argument("--paper-literal-epsilon", action="store_const",
                    const=True, default=None,
                    help="explore when the draw exceeds epsilon instead of "
                         "the conventional direction")


def build_parser():
    p = argparse.ArgumentParser(prog="fqlems", description="Fuel-cell hybrid energy-management workbench")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train an agent and write its artifacts")
    t.add_argument("--config", help="flat key=value config file")
    t.add_argument("--cycle", help="bundled cycle name (udds, nedc) or CSV path")
    t.add_argument("--episodes", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--out-dir", default="run_out")
    _add_training_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a trained agent over repeated cycles")
    e.add_argument("--agent", required=True)
    e.add_argument("--config")
    e.add_argument("--cycle")
    e.add_argument("--cycle-units", choices=("mps", "kmh"),
                   help="velocity units of a --cycle CSV path")
    e.add_argument("--soc0", type=float, default=0.5)
    e.add_argument("--repeat", type=int, default=10)
    e.add_argument("--out-dir", default="eval_out")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("calibrate", help="fit the stack curve to its power/efficiency anchors")
    c.add_argument("--config")
    c.add_argument("--out", help="write calibration JSON here instead of stdout")
    c.add_argument("--p-max-w", type=float, help="override the peak-power anchor")
    c.add_argument("--i-peak-a", type=float, help="override the peak-power current anchor")
    c.set_defaults(func=cmd_calibrate)

    m = sub.add_parser("compare", help="paired start-penalty on/off training comparison")
    m.add_argument("--config")
    m.add_argument("--cycle")
    m.add_argument("--seeds", type=int, default=5)
    _add_training_flags(m)
    m.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except cycmod.CycleFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001  surface anything else as a runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
