"""Batch command-line entry point.

Each stage reads the previous stage's files from the output directory, so
stages can run one at a time or chained by ``pipeline``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .backend import ConfigurationError, SimulatedBackend, load_app_model
from .backend.appmodel import AppModel
from .explorer import ExplorationBudget, SummarizedTrace, run_exploration
from .gui import WidgetSignature
from .jsonio import read_json, write_json
from .oracle import FixtureError, Oracle, RecordingOracle, make_oracle
from .properties import VIOLATED, Property, PropertyFormatError
from .refiner import RefinementOutcome, refinement_loop, summary_table
from .runner import ReplayDivergence, RunConfig, load_reports, replay, run, write_run
from .synthesis import slug, synthesize

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VIOLATIONS, EXIT_CONFIG, EXIT_STAGE = 0, 1, 2, 3

_CONFIG_KEYS = {
    "app", "oracle", "seed", "budget", "max_events", "p_check", "out", "jobs", "faults", "max_rounds", "http", "record",
}


class StageFailure(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message


@dataclass(frozen=True)
class PipelineConfig:
    app: str = "notes"
    oracle: str = "scripted:fixtures/notes"
    seed: int = 0
    budget: int = 200
    max_events: int = 5000
    p_check: float = 0.3
    out: Path = Path("guiprop-out")
    jobs: int = 1
    max_rounds: int = 2
    faults: Mapping[str, bool] = field(default_factory=dict)
    http: Mapping[str, Any] = field(default_factory=dict)
    record: Path | None = None

    @property
    def run_config(self) -> RunConfig:
        return RunConfig(seed=self.seed, max_events=self.max_events, p_check=self.p_check)


def parse_fault(text: str) -> tuple[str, bool]:
    name, sep, value = text.partition("=")
    if not sep or value.lower() not in ("true", "false", "1", "0", "on", "off"):
        raise argparse.ArgumentTypeError(f"--fault expects NAME=true|false, got {text!r}")
    return name, value.lower() in ("true", "1", "on")


def load_config_file(path: str | Path) -> dict[str, Any]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError("config file must hold a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
    if any("token" in str(k).lower() for k in doc.get("http", {})):
        raise ConfigurationError("oracle tokens are read from the environment only")
    return doc


def build_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict[str, Any] = load_config_file(args.config) if getattr(args, "config", None) else {}
    for key in ("app", "oracle", "seed", "budget", "max_events", "p_check", "out", "jobs", "max_rounds", "record"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    faults = dict(values.get("faults", {}))
    faults.update(dict(getattr(args, "fault", None) or ()))
    values["faults"] = faults
    for key in ("out", "record"):
        if values.get(key) is not None:
            values[key] = Path(values[key])
    cfg = PipelineConfig(**values)
    if cfg.budget < 0 or cfg.max_events < 0 or cfg.jobs < 1 or cfg.max_rounds < 0 or not 0 <= cfg.p_check <= 1:
        raise ConfigurationError("budget, max-events and max-rounds must be >= 0, jobs >= 1, p-check in [0, 1]")
    return cfg


def make_backend(cfg: PipelineConfig) -> SimulatedBackend:
    return SimulatedBackend(load_app_model(cfg.app, dict(cfg.faults) or None))


def app_slug(model: AppModel) -> str:
    return slug(model.app_name)


def open_oracle(cfg: PipelineConfig) -> Oracle:
    try:
        oracle = make_oracle(cfg.oracle, **dict(cfg.http))
    except (ValueError, FixtureError, TypeError) as exc:
        raise ConfigurationError(f"oracle: {exc}") from None
    if cfg.record is not None:
        oracle = RecordingOracle(oracle, {"seed": cfg.seed, "app": cfg.app})
    return oracle


def _finish_oracle(cfg: PipelineConfig, oracle: Oracle) -> None:
    if isinstance(oracle, RecordingOracle) and cfg.record is not None:
        oracle.transcript.save(cfg.record)


def _ensure_out(cfg: PipelineConfig) -> None:
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"output directory {cfg.out} is not writable: {exc}") from None


# -- stages --------------------------------------------------------------------


def stage_explore(cfg: PipelineConfig, backend: SimulatedBackend, oracle: Oracle) -> list[SummarizedTrace]:
    result = run_exploration(backend, oracle, ExplorationBudget(cfg.budget), cfg.seed)
    out = cfg.out / "evidence"
    out.mkdir(parents=True, exist_ok=True)
    for ev in result.evidence:
        write_json(out / f"{ev.trace_id}.json", ev.to_dict())
    write_json(
        cfg.out / "evidence_manifest.json",
        result.manifest() | {"hypotheses": [h.to_dict() for h in result.pool], "seed": cfg.seed},
    )
    log.info("exploration: %d evidence traces in %d steps", len(result.evidence), result.steps)
    return result.evidence


def load_evidence(path: Path) -> list[SummarizedTrace]:
    if not path.is_dir():
        raise ConfigurationError(f"evidence directory {path} does not exist")
    return [SummarizedTrace.from_dict(read_json(f)) for f in sorted(path.glob("*.json"))]


def load_properties(path: Path) -> list[Property]:
    files = sorted(path.glob("*.json")) if path.is_dir() else ([path] if path.is_file() else [])
    props = []
    for f in files:
        try:
            props.append(Property.from_dict(read_json(f)))
        except (PropertyFormatError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"property file {f}: {exc}") from None
    return props


def stage_synth(cfg: PipelineConfig, backend: SimulatedBackend, oracle: Oracle, evidence: Sequence[SummarizedTrace]) -> list[Property]:
    model = backend.model
    report = synthesize(
        evidence, oracle, backend, app_name=app_slug(model), screens=list(model.screen_ids), jobs=cfg.jobs
    )
    report.write(cfg.out)
    log.info("synthesis: %s", report.to_dict()["counts"])
    return report.accepted


def stage_test(cfg: PipelineConfig, backend: SimulatedBackend, properties: Sequence[Property]):
    if not properties:
        raise ConfigurationError("no properties to test")
    result = run(cfg.run_config, backend, properties)
    write_run(cfg.out, result)
    log.info("testing: %d events, %d violations", result.stats.events, len(result.reports))
    return result


def _run_vocab(out: Path) -> tuple[WidgetSignature, ...]:
    f = out / "run_stats.json"
    if not f.is_file():
        return ()
    return tuple(WidgetSignature.from_dict(d) for d in read_json(f).get("vocab", ()))


def stage_refine(
    cfg: PipelineConfig,
    backend: SimulatedBackend,
    oracle: Oracle,
    properties: Sequence[Property],
    evidence: Sequence[SummarizedTrace],
    reports,
) -> list[RefinementOutcome]:
    by_trace = {ev.trace_id: ev for ev in evidence}
    vocab = _run_vocab(cfg.out)
    jobs = []
    for prop in properties:
        mine = [r for r in reports if r.property_id == prop.property_id]
        if not mine:
            continue
        ev = by_trace.get(prop.provenance.get("evidence"))
        if ev is None:
            log.warning("no source evidence for %s; not refined", prop.property_id)
            continue
        jobs.append((prop, ev, mine))

    def work(job) -> RefinementOutcome:
        prop, ev, mine = job
        return refinement_loop(prop, ev, mine, backend, oracle, cfg.max_rounds, vocab)

    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        outcomes = list(pool.map(work, jobs))
    for o in outcomes:
        for v in o.versions[1:]:
            write_json(cfg.out / "refined" / f"{v.property_id}.v{v.version}.json", v.to_dict())
    write_json(cfg.out / "refinement_audit.json", [o.to_dict() for o in outcomes])
    write_json(cfg.out / "refinement_summary.json", summary_table(outcomes))
    return outcomes


# -- commands ------------------------------------------------------------------


def cmd_explore(cfg: PipelineConfig) -> int:
    _ensure_out(cfg)
    backend, oracle = make_backend(cfg), open_oracle(cfg)
    try:
        stage_explore(cfg, backend, oracle)
    finally:
        _finish_oracle(cfg, oracle)
    return EXIT_OK


def cmd_synth(cfg: PipelineConfig, evidence_dir: Path | None = None) -> int:
    _ensure_out(cfg)
    evidence = load_evidence(evidence_dir or cfg.out / "evidence")
    backend, oracle = make_backend(cfg), open_oracle(cfg)
    try:
        stage_synth(cfg, backend, oracle, evidence)
    finally:
        _finish_oracle(cfg, oracle)
    return EXIT_OK


def cmd_test(cfg: PipelineConfig, properties_path: Path | None = None) -> int:
    _ensure_out(cfg)
    props = load_properties(properties_path or cfg.out / "properties")
    result = stage_test(cfg, make_backend(cfg), props)
    sys.stdout.write(result.stats.table())
    return EXIT_VIOLATIONS if result.reports else EXIT_OK


def cmd_refine(
    cfg: PipelineConfig,
    properties_path: Path | None = None,
    evidence_dir: Path | None = None,
    reports_dir: Path | None = None,
) -> int:
    _ensure_out(cfg)
    props = load_properties(properties_path or cfg.out / "properties")
    evidence = load_evidence(evidence_dir or cfg.out / "evidence")
    rdir = reports_dir or cfg.out / "reports"
    reports = load_reports(rdir) if rdir.is_dir() else []
    backend, oracle = make_backend(cfg), open_oracle(cfg)
    try:
        outcomes = stage_refine(cfg, backend, oracle, props, evidence, reports)
    finally:
        _finish_oracle(cfg, oracle)
    return EXIT_VIOLATIONS if any(o.unresolved or o.bugs or o.automation_failures for o in outcomes) else EXIT_OK


def cmd_pipeline(cfg: PipelineConfig) -> int:
    _ensure_out(cfg)
    backend, oracle = make_backend(cfg), open_oracle(cfg)
    try:
        evidence = stage_explore(cfg, backend, oracle)
        props = stage_synth(cfg, backend, oracle, evidence)
        if not props:
            raise StageFailure("synth", "no property survived synthesis")
        result = stage_test(cfg, backend, props)
        stage_refine(cfg, backend, oracle, props, evidence, result.reports)
    finally:
        _finish_oracle(cfg, oracle)
    sys.stdout.write(result.stats.table())
    return EXIT_VIOLATIONS if result.reports else EXIT_OK


def cmd_replay(cfg: PipelineConfig, report_path: Path, fault_off: bool = False, properties_path: Path | None = None) -> int:
    if not report_path.is_file():
        raise ConfigurationError(f"report {report_path} does not exist")
    try:
        (report,) = load_reports(report_path)
    except (KeyError, ValueError, PropertyFormatError) as exc:
        raise ConfigurationError(f"report {report_path} is unreadable: {exc}") from None
    model = load_app_model(cfg.app)
    if fault_off:
        model = model.with_faults(**{k: False for k in model.fault_flags})
    if cfg.faults:
        model = model.with_faults(**dict(cfg.faults))
    prop = None
    if properties_path is not None:
        prop = next((p for p in load_properties(properties_path) if p.property_id == report.property_id), None)
        if prop is None:
            raise ConfigurationError(f"{properties_path} has no property {report.property_id}")
    try:
        result = replay(report, SimulatedBackend(model), prop=prop)
    except ReplayDivergence as exc:
        raise StageFailure("replay", str(exc)) from None
    print(json.dumps({"report_id": report.report_id, "property_id": report.property_id, "verdict": result.verdict}, sort_keys=True))
    return EXIT_VIOLATIONS if result.verdict == VIOLATED else EXIT_OK


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--app", help="built-in app name or app-model JSON path")
    common.add_argument("--oracle", help="scripted:PATH | replay:PATH | http:URL#MODEL")
    common.add_argument("--seed", type=int)
    common.add_argument("--budget", type=int, help="exploration step budget")
    common.add_argument("--max-events", type=int)
    common.add_argument("--p-check", type=float)
    common.add_argument("--max-rounds", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int)
    common.add_argument("--record", help="save an oracle transcript to this path")
    common.add_argument("--fault", type=parse_fault, action="append", metavar="NAME=BOOL")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="guiprop", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("explore", parents=[common], help="explore the app and write evidence")
    s = sub.add_parser("synth", parents=[common], help="synthesize properties from evidence")
    s.add_argument("--evidence")
    t = sub.add_parser("test", parents=[common], help="run property-based testing")
    t.add_argument("--properties")
    r = sub.add_parser("refine", parents=[common], help="diagnose violations and refine properties")
    r.add_argument("--properties")
    r.add_argument("--evidence")
    r.add_argument("--reports")
    sub.add_parser("pipeline", parents=[common], help="explore, synthesize, test and refine")
    rp = sub.add_parser("replay", parents=[common], help="replay one violation report")
    rp.add_argument("report")
    rp.add_argument("--fault-off", action="store_true", help="switch every fault flag off")
    rp.add_argument("--properties", help="re-check with this property version instead of the embedded one")
    return p


def _path(v: str | None) -> Path | None:
    return Path(v) if v else None


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        if args.command == "explore":
            return cmd_explore(cfg)
        if args.command == "synth":
            return cmd_synth(cfg, _path(args.evidence))
        if args.command == "test":
            return cmd_test(cfg, _path(args.properties))
        if args.command == "refine":
            return cmd_refine(cfg, _path(args.properties), _path(args.evidence), _path(args.reports))
        if args.command == "pipeline":
            return cmd_pipeline(cfg)
        return cmd_replay(cfg, Path(args.report), args.fault_off, _path(args.properties))
    except ConfigurationError as exc:
        print(json.dumps({"status": "configuration-error", "error": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except StageFailure as exc:
        print(json.dumps({"status": "stage-failure", "stage": exc.stage, "error": exc.message}), file=sys.stderr)
        return EXIT_STAGE
    except Exception as exc:  # noqa: BLE001 - any other crash is a stage failure with a summary
        log.debug("stage crashed", exc_info=True)
        print(json.dumps({"status": "stage-failure", "stage": args.command, "error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
