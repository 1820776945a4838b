"""Command-line pipeline: simulate, filter, train, evaluate, detect, price.

Every command is a pure function of (inputs, config, seed): re-running with
the same arguments overwrites outputs byte-identically.  Exit codes: 0 ok,
2 missing input file, 3 validation failure, 4 internal invariant breach.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import charts, classifier, online, pricing, trips as trips_mod
from .errors import DataFormatError, DetourlabError
from .matching import MatchConfig
from .network import load_network, save_network
from .routing import RoutingWeights
from .simulate import SimConfig, generate_network, generate_trips


@dataclass
class RunConfig:
    """File-backed defaults for the pipeline; command-line flags win."""

    sim: SimConfig = field(default_factory=SimConfig)
    rules: trips_mod.FilterRules = field(default_factory=trips_mod.FilterRules)
    weights: RoutingWeights = field(default_factory=RoutingWeights)
    match: MatchConfig = field(default_factory=MatchConfig)
    ridge: float = 0.0
    duty_minutes: float = 60.0

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        sim_data = dict(data.get("sim", {}))
        if "grid_dims" in sim_data:
            sim_data["grid_dims"] = tuple(sim_data["grid_dims"])
        return RunConfig(
            sim=SimConfig(**sim_data),
            rules=trips_mod.FilterRules(**data.get("rules", {})),
            weights=RoutingWeights(**data.get("weights", {})),
            match=MatchConfig(**data.get("match", {})),
            ridge=float(data.get("ridge", 0.0)),
            duty_minutes=float(data.get("duty_minutes", 60.0)),
        )

    def to_dict(self) -> dict:
        return {
            "sim": {
                "seed": self.sim.seed,
                "grid_dims": list(self.sim.grid_dims),
                "n_trips": self.sim.n_trips,
                "behavior_mix": self.sim.behavior_mix,
                "detour_inflation": self.sim.detour_inflation,
                "gps_period_s": self.sim.gps_period_s,
                "gps_noise_m": self.sim.gps_noise_m,
                "n_drivers": self.sim.n_drivers,
                "full_plans": self.sim.full_plans,
                "night_detour_boost": self.sim.night_detour_boost,
            },
            "rules": {
                "min_travel_time": self.rules.min_travel_time,
                "max_speed": self.rules.max_speed,
                "epsilon_bar": self.rules.epsilon_bar,
            },
            "weights": {"w1": self.weights.w1, "w2": self.weights.w2},
            "match": {
                "emission_sigma": self.match.emission_sigma,
                "candidate_radius": self.match.candidate_radius,
                "transition_beta": self.match.transition_beta,
            },
            "ridge": self.ridge,
            "duty_minutes": self.duty_minutes,
        }


def load_run_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    return RunConfig.from_dict(json.loads(p.read_text(encoding="utf-8")))


def _config_for(args) -> RunConfig:
    return load_run_config(args.config) if getattr(args, "config", None) else RunConfig()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _labeled_samples(net, trips):
    samples = []
    for trip in trips:
        if trip.label == "unlabeled":
            continue
        fv = classifier.offline_features(net, trip)
        samples.append((fv, 1 if trip.label == "detour" else 0))
    return samples


def _schedule_arg(name_or_path: str) -> pricing.FareSchedule:
    if name_or_path in pricing.DEFAULT_SCHEDULES:
        return pricing.DEFAULT_SCHEDULES[name_or_path]
    return pricing.load_schedule(name_or_path)


# ---------------------------------------------------------------------------
# commands


def cmd_gen_network(args) -> int:
    cfg = _config_for(args).sim
    if args.seed is not None:
        cfg.seed = args.seed
    if args.rows:
        cfg.grid_dims = (args.rows, args.cols or args.rows)
    net = generate_network(cfg)
    save_network(net, args.out)
    print(f"network nodes={len(net.nodes)} segments={len(net.segments)} -> {args.out}")
    return 0


def cmd_gen_trips(args) -> int:
    config = _config_for(args)
    cfg = config.sim
    if args.seed is not None:
        cfg.seed = args.seed
    if args.n_trips is not None:
        cfg.n_trips = args.n_trips
    net = load_network(args.network)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sim_trips, drivers = generate_trips(net, cfg, config.weights)
    trips_mod.save_trips(sim_trips, out / "trips.jsonl")
    trips_mod.save_drivers(drivers, out / "drivers.jsonl")
    detours = sum(1 for t in sim_trips if t.label == "detour")
    print(f"trips={len(sim_trips)} detours={detours} drivers={len(drivers)} -> {out}")
    return 0


def cmd_filter(args) -> int:
    config = _config_for(args)
    rules = config.rules
    overrides = {}
    if args.min_travel_time is not None:
        overrides["min_travel_time"] = args.min_travel_time
    if args.max_speed is not None:
        overrides["max_speed"] = args.max_speed
    if args.epsilon_bar is not None:
        overrides["epsilon_bar"] = args.epsilon_bar
    if overrides:
        rules = trips_mod.FilterRules(
            min_travel_time=overrides.get("min_travel_time", rules.min_travel_time),
            max_speed=overrides.get("max_speed", rules.max_speed),
            epsilon_bar=overrides.get("epsilon_bar", rules.epsilon_bar),
        )
    net = load_network(args.network)
    trips = trips_mod.load_trips(args.trips)
    kept, rejected = trips_mod.filter_dataset(net, trips, rules)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trips_mod.save_trips(kept, out / "kept.jsonl")
    with (out / "rejected.jsonl").open("w", encoding="utf-8") as fh:
        for trip, reason in rejected:
            record = {"reason": reason, "trip": trips_mod.trip_to_dict(trip)}
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"kept={len(kept)} rejected={len(rejected)} -> {out}")
    return 0


def cmd_train(args) -> int:
    config = _config_for(args)
    ridge = args.ridge if args.ridge is not None else config.ridge
    net = load_network(args.network)
    trips = trips_mod.load_trips(args.trips)
    samples = _labeled_samples(net, trips)
    report = classifier.train(samples, ridge=ridge)
    classifier.save_model(report.model, args.out, trained_on=len(samples), ridge=ridge)
    print(
        f"trained on={len(samples)} iterations={report.iterations} "
        f"converged={report.converged} loglik={report.final_log_likelihood:.6f}"
    )
    if report.diagnostics:
        print(f"note: {report.diagnostics}")
    return 0


def cmd_eval(args) -> int:
    net = load_network(args.network)
    model = classifier.load_model(args.model)
    trips = trips_mod.load_trips(args.trips)
    samples = _labeled_samples(net, trips)
    auc, roc = classifier.evaluate_roc_auc(model, samples)
    _write_csv(args.out, ("fpr", "tpr"), roc)
    print(f"auc={auc:.6f} n={len(samples)} -> {args.out}")
    return 0


def cmd_detect(args) -> int:
    config = _config_for(args)
    net = load_network(args.network)
    model = classifier.load_model(args.model)
    weights = config.weights

    if args.events == "-":
        lines = sys.stdin
        close = None
    else:
        p = Path(args.events)
        if not p.exists():
            raise FileNotFoundError(f"events file not found: {p}")
        close = p.open("r", encoding="utf-8")
        lines = close

    sessions: dict[str, online.TripProgress] = {}
    out_lines = []
    try:
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
                trip_id = str(event["trip_id"])
                segment = str(event["segment"])
                t = float(event["t"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"bad event on line {lineno}: {exc}", line=lineno) from exc
            if trip_id not in sessions:
                dest = event.get("dest")
                if dest is None:
                    raise DataFormatError(
                        f"line {lineno}: first event of trip {trip_id!r} must carry 'dest'",
                        line=lineno,
                    )
                sessions[trip_id] = online.begin_trip(trip_id, str(dest), weights)
            decision = online.step(net, model, sessions[trip_id], segment, t)
            out_lines.append(json.dumps({
                "trip_id": trip_id,
                "step": decision.step,
                "theta": decision.theta,
                "action": decision.action,
                "scenario": decision.scenario,
            }, sort_keys=True))
    finally:
        if close is not None:
            close.close()

    if args.out:
        Path(args.out).write_text("".join(l + "\n" for l in out_lines), encoding="utf-8")
    else:
        for l in out_lines:
            print(l)
    warned = sum(1 for l in out_lines if '"warn_issued"' in l)
    print(f"events={len(out_lines)} warnings_issued={warned}", file=sys.stderr)
    return 0


def _stage_rows(net, model, trips, weights):
    results = online.stage_auc(net, model, trips, weights)
    return [(r.stage, r.auc, r.warned_trips) for r in results]


def cmd_stage_report(args) -> int:
    config = _config_for(args)
    net = load_network(args.network)
    model = classifier.load_model(args.model)
    trips = trips_mod.load_trips(args.trips)
    rows = _stage_rows(net, model, trips, config.weights)
    _write_csv(args.out, ("stage", "auc", "warned_count"), rows)
    print(f"stages={len(rows)} final_auc={rows[-1][1]:.6f} -> {args.out}")
    return 0


_INTERVAL_HEADER = (
    "interval", "label", "trips", "detours", "detour_ratio", "drivers", "income",
    "mean_excess_km", "mean_excess_min", "opportunity_cost_per_min", "utility",
    "delta_base_fare", "delta_rate_per_km", "delta_opportunity_cost",
)


def _interval_rows(rows):
    out = []
    for row in rows:
        st = row.stats
        adj = row.adjustment
        out.append((
            st.interval, st.label, st.trip_count, st.detour_count, st.detour_ratio,
            st.driver_count, st.total_income, st.mean_excess_km, st.mean_excess_min,
            row.opportunity_cost, row.utility,
            None if adj is None else adj.delta_base_fare,
            None if adj is None else adj.delta_rate_per_km,
            None if adj is None else adj.delta_opportunity_cost,
        ))
    return out


def cmd_pricing(args) -> int:
    config = _config_for(args)
    net = load_network(args.network)
    trips = trips_mod.load_trips(args.trips)
    schedule = _schedule_arg(args.schedule)
    rows, fit = pricing.interval_report(net, schedule, trips, config.duty_minutes)
    _write_csv(args.out, _INTERVAL_HEADER, _interval_rows(rows))
    if fit is not None:
        u0 = "" if fit.u0 is None else f"{fit.u0:.6f}"
        print(f"fit coefficient={fit.coefficient:.6f} intercept={fit.intercept:.6f} "
              f"u0={u0} r2={fit.r2:.4f}")
    print(f"intervals={len(rows)} -> {args.out}")
    return 0


def cmd_report(args) -> int:
    config = _config_for(args)
    net = load_network(args.network)
    model = classifier.load_model(args.model)
    trips = trips_mod.load_trips(args.trips)
    schedule = _schedule_arg(args.schedule)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    samples = _labeled_samples(net, trips)
    auc, roc = classifier.evaluate_roc_auc(model, samples)
    _write_csv(out / "roc.csv", ("fpr", "tpr"), roc)

    stage_rows = _stage_rows(net, model, trips, config.weights)
    _write_csv(out / "stage_auc.csv", ("stage", "auc", "warned_count"), stage_rows)

    rows, fit = pricing.interval_report(net, schedule, trips, config.duty_minutes)
    _write_csv(out / "intervals.csv", _INTERVAL_HEADER, _interval_rows(rows))

    if not args.no_svg:
        mids = [(r.stats.interval, (schedule.intervals[r.stats.interval].start_min
                                    + schedule.intervals[r.stats.interval].end_min) / 2.0 / 60.0)
                for r in rows]
        ratio_pts = [(h, r.stats.detour_ratio) for (_, h), r in zip(mids, rows)]
        charts.write_line_chart(out / "detour_ratio.svg", "Detour ratio by time of day",
                                [("detour ratio", ratio_pts)], "hour", "ratio")
        util_pts = [(h, r.utility) for (_, h), r in zip(mids, rows) if r.utility is not None]
        cost_pts = [(h, r.opportunity_cost) for (_, h), r in zip(mids, rows)
                    if r.opportunity_cost is not None]
        charts.write_line_chart(out / "utility.svg", "Detour utility and opportunity cost",
                                [("utility", util_pts), ("opportunity cost", cost_pts)],
                                "hour", "per minute")
        f0_pts = [(h, r.adjustment.delta_base_fare) for (_, h), r in zip(mids, rows)
                  if r.adjustment is not None]
        a1_pts = [(h, r.adjustment.delta_rate_per_km) for (_, h), r in zip(mids, rows)
                  if r.adjustment is not None]
        charts.write_line_chart(out / "adjustments.svg", "Suggested price adjustments",
                                [("base fare change", f0_pts), ("km rate change", a1_pts)],
                                "hour", "change")

    print(f"auc={auc:.6f} stage_final={stage_rows[-1][1]:.6f} -> {out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detourlab",
        description="Detour detection and pricing experiments on synthetic taxi trips.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags override it")
    common.add_argument("--seed", type=int, default=None,
                        help="override the simulation seed (generation commands)")

    p = sub.add_parser("gen-network", parents=[common], help="generate a grid road network")
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--cols", type=int, default=None)
    p.add_argument("--out", required=True, help="network JSON path")
    p.set_defaults(func=cmd_gen_network)

    p = sub.add_parser("gen-trips", parents=[common], help="simulate labeled trips")
    p.add_argument("--network", required=True)
    p.add_argument("--n-trips", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_trips)

    p = sub.add_parser("filter", parents=[common], help="screen trips")
    p.add_argument("--network", required=True)
    p.add_argument("--trips", required=True)
    p.add_argument("--min-travel-time", type=float, default=None)
    p.add_argument("--max-speed", type=float, default=None)
    p.add_argument("--epsilon-bar", type=float, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", parents=[common], help="fit the detour classifier")
    p.add_argument("--network", required=True)
    p.add_argument("--trips", required=True)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="offline ROC/AUC evaluation")
    p.add_argument("--network", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--trips", required=True)
    p.add_argument("--out", required=True, help="roc.csv path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("detect", parents=[common], help="stream live step decisions")
    p.add_argument("--network", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--events", required=True, help="JSONL events, or - for stdin")
    p.add_argument("--out", default=None, help="decisions JSONL (stdout if omitted)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("stage-report", parents=[common], help="AUC by trip completeness")
    p.add_argument("--network", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--trips", required=True)
    p.add_argument("--out", required=True, help="stage_auc.csv path")
    p.set_defaults(func=cmd_stage_report)

    p = sub.add_parser("pricing", parents=[common], help="per-interval pricing analysis")
    p.add_argument("--network", required=True)
    p.add_argument("--trips", required=True)
    p.add_argument("--schedule", required=True, help="city name or schedule JSON path")
    p.add_argument("--out", required=True, help="intervals.csv path")
    p.set_defaults(func=cmd_pricing)

    p = sub.add_parser("report", parents=[common], help="all reports in one directory")
    p.add_argument("--network", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--trips", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--no-svg", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing-input: {exc}", file=sys.stderr)
        return 2
    except DetourlabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # invariant breach
        print(f"error: internal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
