"""Command-line entry point.

Exit codes: 0 success, 1 negative verification or oracle mismatch, 2 bad
input, 3 inconclusive (search budget) or unverified bundle, 4 safety violation.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from . import continuum as cont
from . import gridsim, svg
from .behavior import BEHAVIORS, DerivedBehavior, behavior_by_name, derive, derived_from_json, describe
from .lattice import LatticeError, NamedPattern, dump_pattern, load_pattern, shipped_pattern, shipped_pattern_names
from .transitions import EXPLORE_MODES, check_conditions
from .uniqueness import (ORACLE_MAX_N, Inconclusive, check_uniqueness, oracle_all_static_patterns,
                         search_patterns, viable_states)

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_INCONCLUSIVE, EXIT_SAFETY = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """What a command ran with; written next to its artifacts."""

    command: str
    pattern: dict
    behaviors: list[str]
    seed: int = 0
    runs: int = 1
    cap: int | None = None
    force: bool = False
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# inputs


def resolve_pattern(arg: str) -> NamedPattern:
    """A pattern file path, or the name of a bundled pattern."""
    try:
        p = Path(arg)
        if p.suffix == ".json" or p.exists():
            if not p.exists():
                raise InputError(f"pattern file {arg} does not exist")
            return load_pattern(p)
        return shipped_pattern(arg)
    except json.JSONDecodeError as exc:
        raise InputError(f"{arg}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc
    except (LatticeError, OSError) as exc:
        raise InputError(str(exc)) from exc


def resolve_behaviors(names: list[str] | None, default: str) -> list:
    names = names or [default]
    if any(n.lower() == "all" for n in names):
        return list(BEHAVIORS.values())
    try:
        return [behavior_by_name(n) for n in names]
    except KeyError as exc:
        raise InputError(exc.args[0]) from exc


def load_bundle(path: str) -> DerivedBehavior:
    try:
        with open(path) as fh:
            return derived_from_json(json.load(fh))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg})") from exc
    except (OSError, KeyError, TypeError, ValueError, AssertionError) as exc:
        raise InputError(f"{path}: not a behaviour bundle ({exc})") from exc


def derive_checked(pattern: NamedPattern, spec) -> DerivedBehavior:
    try:
        return derive(pattern, spec)
    except (LatticeError, ValueError) as exc:
        raise InputError(f"{pattern.name}: {exc}") from exc


def _bundles(args) -> list[DerivedBehavior]:
    if getattr(args, "bundle", None):
        return [load_bundle(args.bundle)]
    if not args.pattern:
        raise InputError("give --pattern or --bundle")
    pat = resolve_pattern(args.pattern)
    return [derive_checked(pat, s) for s in resolve_behaviors(args.behavior, args.default_behavior)]


class _Writer:
    """Single writer for an output directory; every artifact goes through ``put``."""

    def __init__(self, out: str | None):
        self.root = Path(out) if out else None
        if self.root:
            self.root.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def put(self, name: str, text: str) -> None:
        if self.root is None:
            return
        path = self.root / name
        path.write_text(text)
        self.written.append(path)

    def put_json(self, name: str, doc) -> None:
        self.put(name, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _tag(db: DerivedBehavior) -> str:
    return f"{db.pattern.name}_{db.spec.name}"


# ---------------------------------------------------------------------------
# commands


def cmd_derive(args) -> int:
    w = _Writer(args.out)
    for db in _bundles(args):
        print(describe(db))
        print(f"  |Q_safe domain|={len(db.q)} "
              f"|S_simplicial|={len(db.sets.s_simplicial)}")
        w.put_json(f"{_tag(db)}.bundle.json", db.to_json())
    return EXIT_OK


def verify_bundle(db: DerivedBehavior, n: int | None = None, *, lenient_arrival: bool = False,
                  explore_mode: str = "strict", uniqueness_mode: str = "auto") -> dict:
    """Outcome class plus the five condition flags, as one JSON-ready dict."""
    n = n or db.n
    outcome = check_uniqueness(db.sets, n, db.pattern.cells, mode=uniqueness_mode)
    report = check_conditions(db, lenient_arrival=lenient_arrival, explore_mode=explore_mode)
    return {
        "pattern": db.pattern.name,
        "behavior": db.spec.name,
        "n": n,
        "explore_mode": explore_mode,
        "lenient_arrival": lenient_arrival,
        **outcome.to_json(),
        "conditions": report.to_json(),
        "verified": outcome.unique and report.all_ok,
    }


def _print_verify(doc: dict) -> None:
    c = doc["conditions"]
    print(f"{doc['pattern']} / {doc['behavior']} (N={doc['n']}): {doc['outcome']}, "
          f"{len(doc['patterns_found'])} all-static pattern(s)")
    for key in ("achievable", "lemma3_clique_ok", "lemma3_loop_ok", "thm_explore_ok", "thm_arrival_ok"):
        print(f"  {key:<17} {str(c[key]).lower()}")


def cmd_verify(args) -> int:
    w = _Writer(args.out)
    code = EXIT_OK
    for db in _bundles(args):
        try:
            doc = verify_bundle(db, args.n, lenient_arrival=args.lenient_arrival,
                                explore_mode=args.explore_mode, uniqueness_mode=args.uniqueness_mode)
        except Inconclusive as exc:
            print(f"{_tag(db)}: inconclusive: {exc}")
            return EXIT_INCONCLUSIVE
        _print_verify(doc)
        w.put_json(f"{_tag(db)}.verify.json", doc)
        if not doc["verified"]:
            code = max(code, EXIT_NEGATIVE)
    return code


def _require_unique(db: DerivedBehavior) -> None:
    try:
        out = check_uniqueness(db.sets, db.n, db.pattern.cells)
    except Inconclusive as exc:
        raise _Refused(f"{_tag(db)}: uniqueness inconclusive ({exc})") from exc
    if not out.unique:
        raise _Refused(f"{_tag(db)}: {out.tag.value}; the swarm could stop in another pattern "
                       "(use --force to simulate anyway)")
    rep = check_conditions(db)
    failed = [k for k, v in rep.flags().items() if not v]
    if failed:
        print(f"note: {_tag(db)} fails {', '.join(failed)}; convergence is not guaranteed", file=sys.stderr)


class _Refused(Exception):
    pass


def cmd_sim_grid(args) -> int:
    bundles = _bundles(args)
    if args.runs < 1:
        raise InputError("--runs must be at least 1")
    w = _Writer(args.out)
    reports = []
    for db in bundles:
        if not args.force:
            _require_unique(db)
        for i in range(args.runs):
            try:
                reports.append(gridsim.run(db, args.seed + i, args.cap, force=True, check=True))
            except gridsim.SimulationError as exc:
                print(f"safety violation in {_tag(db)} seed {args.seed + i}: {exc}")
                return EXIT_SAFETY
    summary = gridsim.summarize(reports)
    print(f"{'pattern':<10} {'behavior':<9} {'runs':>5} {'conv':>5} {'median':>10} {'iqr':>10}")
    for row in summary:
        print(f"{row['pattern']:<10} {row['behavior']:<9} {row['runs']:>5} {row['converged']:>5} "
              f"{row['median_steps']:>10.0f} {row['iqr_steps']:>10.0f}")
    cfg = ExperimentConfig("sim-grid", dump_pattern(bundles[0].pattern), [db.spec.name for db in bundles],
                           args.seed, args.runs, args.cap, args.force)
    w.put_json("config.json", cfg.to_json())
    w.put("runs.csv", gridsim.to_csv(reports))
    w.put("summary.csv", gridsim.summary_csv(summary))
    groups = {db.spec.name: [r.steps for r in reports if r.behavior == db.spec.name and r.converged]
              for db in bundles}
    w.put("histogram.svg", svg.histogram(groups, f"{bundles[0].pattern.name}: steps to convergence"))
    return EXIT_OK


def _parse_overrides(pairs: list[str] | None) -> dict:
    fields = {f.name: f for f in dataclasses.fields(cont.ContinuumConfig)}
    out = {}
    for item in pairs or []:
        key, sep, raw = item.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in fields:
            raise InputError(f"bad --set {item!r}; keys: {', '.join(fields)}")
        default = getattr(cont.ContinuumConfig(), key)
        try:
            if isinstance(default, bool):
                if raw.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(raw)
                out[key] = raw.lower() in ("true", "1")
            elif isinstance(default, float):
                out[key] = float(raw)
            else:
                out[key] = raw
        except ValueError as exc:
            raise InputError(f"bad value for {key}: {raw!r}") from exc
    return out


def cmd_sim_continuum(args) -> int:
    bundles = _bundles(args)
    if len(bundles) != 1:
        raise InputError("sim-continuum takes a single behaviour")
    db = bundles[0]
    if args.runs < 1:
        raise InputError("--runs must be at least 1")
    try:
        overrides = _parse_overrides(args.set)
        if args.cap is not None:
            overrides["sim_time_cap"] = float(args.cap)
        cfg = cont.ContinuumConfig(**overrides)
        cfg.rho_s  # infeasible gains fail here rather than mid-batch
    except cont.ConfigError as exc:
        raise InputError(str(exc)) from exc
    if not args.force:
        _require_unique(db)
    w = _Writer(args.out)
    reports = []
    for i in range(args.runs):
        rep = cont.simulate(db, cfg, args.seed + i, record=args.record and i == 0)
        reports.append(rep)
        if rep.trajectory is not None:
            tr = rep.trajectory
            w.put("trajectory.csv", cont.trajectory_csv(rep))
            w.put("trajectory.svg", svg.trajectories(tr["t"], tr["pos"], tr["final"],
                                                     f"{db.pattern.name} seed {rep.seed}: {rep.status}"))
    s = cont.summarize(reports)
    med = "n/a" if s["median_t_complete"] is None else f"{s['median_t_complete']:.1f} s"
    print(f"{db.pattern.name}: {s['successes']} out of {s['runs']} runs succeeded, median completion {med}")
    print(f"  disconnected {s['disconnected']}, time cap {s['time_cap']}, "
          f"min distance {s['min_distance_all']:.3f} m")
    exp = ExperimentConfig("sim-continuum", dump_pattern(db.pattern), [db.spec.name],
                           args.seed, args.runs, args.cap, args.force,
                           {"continuum": cfg.to_json()})
    w.put_json("config.json", exp.to_json())
    w.put("runs.csv", cont.runs_csv(reports))
    w.put_json("summary.json", {**s, "reports": [r.to_json() for r in reports]})
    ok_times = [r.t_complete for r in reports if r.success]
    w.put("completion.svg", svg.histogram({db.pattern.name: ok_times}, "completion time",
                                          log_x=False, xlabel="simulated seconds"))
    violated = any(r.status == "disconnected" or r.min_distance <= cfg.collision_radius for r in reports)
    return EXIT_SAFETY if violated else EXIT_OK


def cmd_oracle(args) -> int:
    w = _Writer(args.out)
    code = EXIT_OK
    for db in _bundles(args):
        n = args.n or db.n
        if n > ORACLE_MAX_N:
            raise InputError(f"oracle enumeration is limited to N <= {ORACLE_MAX_N}")
        if n < 2:
            raise InputError("--n must be at least 2")
        brute = sorted(map(sorted, oracle_all_static_patterns(db.sets, n)))
        try:
            if n == db.n:
                pats = check_uniqueness(db.sets, n, db.pattern.cells, mode=args.uniqueness_mode).patterns_found
            else:
                pats = search_patterns(None, n, states=viable_states(db.sets.s_static))[0]
        except Inconclusive as exc:
            print(f"{_tag(db)}: inconclusive: {exc}")
            return EXIT_INCONCLUSIVE
        found = sorted(map(sorted, pats))
        agree = found == brute
        print(f"{_tag(db)} N={n}: oracle finds {len(brute)} all-static pattern(s), "
              f"checker {len(found)}, {'agree' if agree else 'DISAGREE'}")
        w.put_json(f"{_tag(db)}.oracle.json", {"n": n, "oracle": brute, "checker": found, "agree": agree})
        if not agree:
            code = EXIT_NEGATIVE
    return code


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swarmpattern", description="Derive, verify and simulate "
                                "local behaviours that assemble a lattice pattern.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    shipped = ", ".join(shipped_pattern_names())

    def common(sp, default_behavior="Baseline", bundle=True):
        sp.add_argument("--pattern", help=f"pattern JSON file or bundled name ({shipped})")
        if bundle:
            sp.add_argument("--bundle", help="bundle JSON written by 'derive'")
        sp.add_argument("--behavior", action="append",
                        help=f"{', '.join(BEHAVIORS)} or all; repeatable (default {default_behavior})")
        sp.add_argument("--out", help="output directory")
        sp.set_defaults(default_behavior=default_behavior)

    sp = sub.add_parser("derive", help="desired/static/active sets and the safe action map")
    common(sp, bundle=False)
    sp.set_defaults(func=cmd_derive)

    def checks(sp):
        sp.add_argument("--n", type=int, help="swarm size (default: pattern size)")
        sp.add_argument("--uniqueness-mode", choices=("auto", "combinations", "direct"), default="auto")

    sp = sub.add_parser("verify", help="uniqueness outcome and proof conditions")
    common(sp)
    checks(sp)
    sp.add_argument("--lenient-arrival", action="store_true",
                    help="accept arrival states that turn static only after neighbours settle")
    sp.add_argument("--explore-mode", choices=EXPLORE_MODES, default="strict")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sim-grid", help="seeded batch on the lattice")
    common(sp)
    sp.add_argument("--runs", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0, help="first seed; run i uses seed+i")
    sp.add_argument("--cap", type=int, default=gridsim.DEFAULT_CAP, help="move cap per run")
    sp.add_argument("--force", action="store_true", help="skip the uniqueness gate")
    sp.set_defaults(func=cmd_sim_grid)

    sp = sub.add_parser("sim-continuum", help="seeded batch of continuous-space runs")
    common(sp, default_behavior="ALT4")
    sp.add_argument("--runs", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0, help="first seed; run i uses seed+i")
    sp.add_argument("--cap", type=float, help="simulated-time cap per run in seconds")
    sp.add_argument("--force", action="store_true", help="skip the uniqueness gate")
    sp.add_argument("--record", action="store_true", help="write the first run's trajectory")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="controller setting override")
    sp.set_defaults(func=cmd_sim_continuum)

    sp = sub.add_parser("oracle", help="brute-force all-static patterns and compare with the checker")
    common(sp)
    checks(sp)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _Refused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except NotADirectoryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
