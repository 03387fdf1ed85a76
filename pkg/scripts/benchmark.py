#!/usr/bin/env python3
"""Compare the compiled and interpreted kernel paths on one seeded workload.

Spawns the same short training twice in child processes, once with numba
enabled and once with FQL_EMS_NUMBA=0, verifies the two agent files are
byte-identical, and reports where the time goes.  The interpreted path runs
the per-step loop in plain Python, so keep the episode count modest.
"""
import argparse
import json
import os
import subprocess
import sys
import time


def run_child(ns):
    from fqlems import cycle, powertrain, trainer
    from fqlems.accel import USING_NUMBA
    from fqlems.fql import save_agent

    t0 = time.monotonic()
    model = powertrain.PowertrainModel.build()
    cyc = cycle.derive_power(cycle.resolve_cycle("udds"), model.vehicle)
    setup_s = time.monotonic() - t0

    marks = []
    cfg = trainer.TrainConfig(episodes=ns.episodes, seed=ns.seed)
    t1 = time.monotonic()
    agent, _ = trainer.train(cfg, model=model, cyc=cyc,
                             progress=lambda m: marks.append(time.monotonic()))
    train_s = time.monotonic() - t1

    t2 = time.monotonic()
    trainer.evaluate(agent, cyc=cyc, repetitions=2, model=model)
    eval_s = time.monotonic() - t2

    save_agent(ns.agent_out, agent)
    first_ep = marks[0] - t1
    steady = (marks[-1] - marks[0]) / max(1, len(marks) - 1)
    with open(ns.report_out, "w") as fh:
        json.dump({"using_numba": USING_NUMBA, "setup_s": setup_s,
                   "first_episode_s": first_ep, "steady_episode_s": steady,
                   "train_s": train_s, "eval_s": eval_s}, fh)


def run_parent(ns):
    import tempfile

    rows = {}
    with tempfile.TemporaryDirectory() as td:
        for label, flag in (("numba", "1"), ("python", "0")):
            agent_f = os.path.join(td, f"agent_{label}.json")
            report_f = os.path.join(td, f"report_{label}.json")
            env = dict(os.environ, FQL_EMS_NUMBA=flag)
            cmd = [sys.executable, os.path.abspath(__file__), "--child",
                   "--episodes", str(ns.episodes), "--seed", str(ns.seed),
                   "--agent-out", agent_f, "--report-out", report_f]
            t0 = time.monotonic()
            subprocess.run(cmd, env=env, check=True)
            wall = time.monotonic() - t0
            with open(report_f) as fh:
                rows[label] = json.load(fh)
            rows[label]["wall_s"] = wall
            with open(agent_f, "rb") as fh:
                rows[label]["agent_bytes"] = fh.read()

    if rows["numba"]["using_numba"] is not True:
        print("numba is not importable in this environment; nothing to "
              "compare against.", file=sys.stderr)
        return 1
    identical = rows["numba"]["agent_bytes"] == rows["python"]["agent_bytes"]

    print(f"workload: {ns.episodes} episodes on UDDS, seed {ns.seed}, "
          f"plus a 2-repetition evaluation")
    hdr = (f"{'path':<8}{'setup':>9}{'first ep':>11}{'per ep':>11}"
           f"{'eval':>9}{'wall':>9}")
    print(hdr)
    for label in ("numba", "python"):
        r = rows[label]
        print(f"{label:<8}{r['setup_s']:>8.2f}s{r['first_episode_s']:>10.3f}s"
              f"{r['steady_episode_s']:>10.4f}s{r['eval_s']:>8.2f}s"
              f"{r['wall_s']:>8.2f}s")
    speedup = (rows["python"]["steady_episode_s"]
               / rows["numba"]["steady_episode_s"])
    print(f"steady-state speedup: {speedup:.0f}x")
    print(f"agent files byte-identical: {identical}")
    return 0 if identical else 1


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=30)
    ap.add_argument("--seed", type=int, default=433)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    ap.add_argument("--agent-out", help=argparse.SUPPRESS)
    ap.add_argument("--report-out", help=argparse.SUPPRESS)
    ns = ap.parse_args(argv)
    if ns.child:
        run_child(ns)
        return 0
    return run_parent(ns)


if __name__ == "__main__":
    sys.exit(main())
