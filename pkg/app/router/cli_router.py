import argparse
import json
import logging
import os
import sys
from typing import List, Optional, Sequence, Tuple

from pydantic import ValidationError

from app.config import WL_LOG_LEVEL, WL_OUTPUT_DIR
from app.exceptions import InputParseError, InvalidParametersError, WLError
from app.models.game import P1Strategy, P2Strategy
from app.models.graph import ColoredGraph
from app.models.schemas import FamilyKind, FamilySpec, RefinementVariant, ThresholdConfig
from app.services.experiment_service import ExperimentService, ExperimentStore
from app.services.game_service import GameService
from app.services.generator_service import GeneratorService, make_rng
from app.services.graph_service import GraphService
from app.services.io_service import IOService
from app.services.refinement_service import RefinementService

logger = logging.getLogger(__name__)


def _family_spec(args: argparse.Namespace) -> FamilySpec:
    try:
        return FamilySpec(
            family=args.family,
            n=args.n,
            p=args.p,
            t=args.t,
            cycles=args.cycles,
            shared_loop=args.shared_loop,
            seed=args.seed,
        )
    except ValidationError as e:
        raise InvalidParametersError(f"Invalid family parameters: {str(e)}")


def _load_graph(args: argparse.Namespace) -> Tuple[ColoredGraph, Optional[FamilySpec], Optional[str]]:
    """Graph from the input flags; returns (graph, family spec, source reference)"""
    graph = IOService.load_input(graph6=args.graph6, edges=args.edges, json_source=args.json)
    if graph is not None:
        return graph, None, args.graph6 or args.edges or args.json
    if args.family is None:
        raise InputParseError("No input: give --graph6, --edges, --json or --family")
    spec = _family_spec(args)
    return GeneratorService.generate(spec), spec, None


def _parse_source(text: str) -> ColoredGraph:
    """'graph6:STR', 'edges:PATH', 'json:PATH' or 'family:NAME,key=value,...'"""
    kind, _, value = text.partition(":")
    if kind == "graph6":
        return IOService.read_graph6(value)
    if kind == "edges":
        return IOService.read_edge_list(value)
    if kind == "json":
        return IOService.read_json(value)
    if kind == "family":
        name, *pairs = value.split(",")
        try:
            params = dict(pair.split("=", 1) for pair in pairs if pair)
            return GeneratorService.generate(FamilySpec(family=name, **params))
        except (ValueError, ValidationError) as e:
            raise InvalidParametersError(f"Invalid family input '{value}': {str(e)}")
    raise InputParseError(f"Unknown input kind '{kind}' (expected graph6, edges, json or family)")


def _threshold(args: argparse.Namespace) -> ThresholdConfig:
    try:
        return ThresholdConfig(fixed_t=args.threshold)
    except ValidationError as e:
        raise InvalidParametersError(f"Invalid threshold: {str(e)}")


def _n_values(args: argparse.Namespace) -> List[int]:
    values = list(args.n_values or [])
    if args.n_range:
        try:
            start, stop, *step = (int(part) for part in args.n_range.split(":"))
        except ValueError:
            raise InvalidParametersError(f"Invalid --n-range '{args.n_range}', expected START:STOP[:STEP]")
        values.extend(range(start, stop + 1, step[0] if step else 1))
    if not values:
        raise InvalidParametersError("Give --n or --n-range")
    return sorted(set(values))


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        directory = os.path.dirname(os.path.abspath(output))
        os.makedirs(directory, exist_ok=True)
        with open(output, "w") as handle:
            handle.write(text + "\n")
    else:
        print(text)


def cmd_stabilize(args: argparse.Namespace) -> int:
    graph, spec, source = _load_graph(args)
    variant = RefinementVariant(args.variant)
    if spec is not None:
        record = ExperimentService.run_family(spec, variant)
    else:
        record = ExperimentService.run_record(graph, variant, source=source)
    if args.store:
        ExperimentStore().save([record])
    if args.csv:
        _emit(ExperimentService.to_csv([record]).rstrip("\n"), args.output)
    else:
        _emit(record.model_dump_json(indent=2), args.output)
    return 0


def cmd_distinguish(args: argparse.Namespace) -> int:
    graphs = [_parse_source(source) for source in args.input]
    if len(graphs) == 1 and args.permute is not None:
        perm = make_rng(args.permute).permutation(graphs[0].n)
        graphs.append(GraphService.permute(graphs[0], perm))
    if len(graphs) != 2:
        raise InvalidParametersError("distinguish needs two --input values, or one plus --permute")
    g, h = graphs
    if args.wl1:
        verdict = RefinementService.distinguish_wl1(g, h)
    else:
        verdict = RefinementService.distinguish(g, h, RefinementVariant(args.variant))
    print(verdict.model_dump_json(exclude_none=False))
    return 0


def cmd_game(args: argparse.Namespace) -> int:
    graph, spec, _ = _load_graph(args)
    transcript = GameService.run_game(
        graph,
        p1=P1Strategy(args.p1),
        p2=P2Strategy(args.p2),
        seed=args.seed,
        cfg=_threshold(args),
        variant=RefinementVariant(args.variant),
    )
    output = args.output
    if output is None:
        name = spec.family.value if spec is not None else GraphService.graph_hash(graph)[:12]
        output = os.path.join(WL_OUTPUT_DIR, f"transcript-{name}-{args.p1}-{args.p2}-{args.seed}.json")
    _emit(transcript.model_dump_json(indent=2), output)
    print(json.dumps(transcript.summary()))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    report = ExperimentService.sweep(
        FamilyKind(args.family),
        _n_values(args),
        variant=RefinementVariant(args.variant),
        repetitions=args.repetitions,
        seed=args.seed,
        p=args.p,
        t=args.t,
        cycles=args.cycles,
        jobs=args.jobs,
    )
    if args.store:
        ExperimentStore().save(report.records)
    if args.csv:
        _emit(ExperimentService.to_csv(report.records).rstrip("\n"), args.output)
    else:
        _emit(report.model_dump_json(indent=2), args.output)
    return 0


def cmd_aux_trace(args: argparse.Namespace) -> int:
    graph, _, _ = _load_graph(args)
    trace = GameService.aux_trace(graph, _threshold(args), RefinementVariant(args.variant))
    _emit(trace.model_dump_json(indent=2), args.output)
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    if args.family is None:
        raise InvalidParametersError("generate needs --family")
    graph = GeneratorService.generate(_family_spec(args))
    _emit(IOService.write_json(graph), args.output)
    return 0


def cmd_results(args: argparse.Namespace) -> int:
    records = ExperimentStore().list_runs(family=args.family, n=args.n, limit=args.limit)
    print(json.dumps([record.model_dump(mode="json") for record in records], indent=2))
    return 0


def _add_input_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("input")
    group.add_argument("--graph6", help="graph6 string or file")
    group.add_argument("--edges", help="edge-list file")
    group.add_argument("--json", help="colored-graph JSON file")
    _add_family_arguments(group)


def _add_family_arguments(group) -> None:
    group.add_argument("--family", choices=[f.value for f in FamilyKind])
    group.add_argument("--n", type=int)
    group.add_argument("--p", type=float)
    group.add_argument("--t", type=int, help="class size bound / layer size")
    group.add_argument("--cycles", type=int)
    group.add_argument("--shared-loop", action="store_true", help="one loop color for both layers of appendix_a")
    group.add_argument("--seed", type=int, default=0)


def _add_variant(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variant", choices=[v.value for v in RefinementVariant],
                        default=RefinementVariant.COUNTING.value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wlgame", description="2-WL refinement, the refinement game and experiments")
    parser.add_argument("--log-level", default=WL_LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    stabilize = sub.add_parser("stabilize", help="stabilize one graph and print its record")
    _add_input_arguments(stabilize)
    _add_variant(stabilize)
    stabilize.add_argument("--csv", action="store_true")
    stabilize.add_argument("--store", action="store_true", help="persist the record")
    stabilize.add_argument("--output")
    stabilize.set_defaults(handler=cmd_stabilize)

    distinguish = sub.add_parser("distinguish", help="compare two graphs")
    distinguish.add_argument("--input", action="append", required=True,
                             help="graph6:STR | edges:PATH | json:PATH | family:NAME,key=value,...")
    distinguish.add_argument("--permute", type=int, help="compare against a permuted copy (seed)")
    distinguish.add_argument("--wl1", action="store_true", help="use color refinement instead")
    _add_variant(distinguish)
    distinguish.set_defaults(handler=cmd_distinguish)

    game = sub.add_parser("game", help="play the refinement game")
    _add_input_arguments(game)
    _add_variant(game)
    game.add_argument("--p1", choices=[s.value for s in P1Strategy], default=P1Strategy.RANDOM_SPLIT.value)
    game.add_argument("--p2", choices=[s.value for s in P2Strategy], default=P2Strategy.STABILIZE.value)
    game.add_argument("--threshold", type=float)
    game.add_argument("--output")
    game.set_defaults(handler=cmd_game)

    sweep = sub.add_parser("sweep", help="iteration counts over a family")
    sweep.add_argument("--family", required=True, choices=[f.value for f in FamilyKind])
    sweep.add_argument("--n", dest="n_values", type=int, nargs="+")
    sweep.add_argument("--n-range", help="START:STOP[:STEP], inclusive")
    sweep.add_argument("--p", type=float)
    sweep.add_argument("--t", type=int)
    sweep.add_argument("--cycles", type=int)
    sweep.add_argument("--repetitions", type=int, default=1)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--csv", action="store_true")
    sweep.add_argument("--store", action="store_true")
    sweep.add_argument("--output")
    _add_variant(sweep)
    sweep.set_defaults(handler=cmd_sweep)

    aux = sub.add_parser("aux-trace", help="run the aux-graph loop and dump every turn")
    _add_input_arguments(aux)
    _add_variant(aux)
    aux.add_argument("--threshold", type=float)
    aux.add_argument("--output")
    aux.set_defaults(handler=cmd_aux_trace)

    generate = sub.add_parser("generate", help="write a family member as colored-graph JSON")
    _add_family_arguments(generate)
    generate.add_argument("--output")
    generate.set_defaults(handler=cmd_generate)

    results = sub.add_parser("results", help="list stored experiment runs")
    results.add_argument("--family")
    results.add_argument("--n", type=int)
    results.add_argument("--limit", type=int)
    results.set_defaults(handler=cmd_results)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except WLError as e:
        logger.debug("Command failed", exc_info=True)
        print(json.dumps(e.to_dict(), default=str), file=sys.stderr)
        return e.exit_code


def main_entry() -> None:
    sys.exit(main())
