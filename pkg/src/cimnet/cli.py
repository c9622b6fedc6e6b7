"""Command-line entry point.

Subcommands: search, simulate, dataflow, predictors-eval, pareto.
Exit codes: 0 success, 2 config error, 3 infeasible space.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cim import (InfeasibleConfigSpaceError, base_config, config_from_json,
                  simulate)
from .dataflow import DataflowInfeasibleError, compile_dataflow, tile_options
from .encoding import GenomeCodec
from .predict import TargetTransform, evaluate_predictor
from .proxy import ProxyParams, proxy_accuracy
from .runner import (ConfigError, experiment_config_from_doc, genome_id,
                     load_experiment_config, run_experiment, write_atomic)
from .search import (ParetoPoint, Provenance, SearchMode, config_space_for,
                     cycle_reduction_at_iso_accuracy, labeled_pool,
                     make_cached_simulator, make_setting, pareto_front,
                     static_config)
from .workload import Family, LayerSpec, default_space, lower_to_layers

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _load_json_arg(value: str) -> dict:
    if value.startswith("@"):
        return json.loads(Path(value[1:]).read_text())
    return json.loads(value)


def _resolve_subnet(args, space):
    named = {"canonical": space.canonical_subnet,
             "minimal": space.minimal_subnet,
             "maximal": space.maximal_subnet}
    if args.subnet in named:
        return named[args.subnet]()
    doc = _load_json_arg(args.subnet)
    return space.build_subnet(doc)


def _resolve_hw(value: str):
    if value == "base":
        return base_config()
    if value == "static":
        return static_config()
    return config_from_json(_load_json_arg(value))


def _cmd_search(args) -> int:
    if args.config:
        config = load_experiment_config(args.config)
    else:
        if not args.family or not args.setting:
            raise ConfigError("family", "--family and --setting are required "
                                        "without --config")
        doc = {"family": args.family, "setting": args.setting, "k": args.k,
               "m": args.m, "n": args.n, "seed": args.seed,
               "out_dir": args.out, "predictor": args.predictor,
               "plot": args.plot}
        config = experiment_config_from_doc(doc)
    summary = run_experiment(config)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_simulate(args) -> int:
    space = default_space(Family(args.family))
    subnet = _resolve_subnet(args, space)
    cfg = _resolve_hw(args.hw)
    report = simulate(lower_to_layers(subnet, space), cfg)
    acc = proxy_accuracy(subnet, ProxyParams(), space)
    print(f"total_cycles: {report.total_cycles}")
    print(f"proxy_accuracy: {acc:.4f}")
    for level, nbytes in report.total_bytes.items():
        print(f"bytes[{level}]: {nbytes}")
    if args.out:
        write_atomic(Path(args.out), report.to_csv())
        print(f"wrote {args.out}")
    return 0


def _cmd_dataflow(args) -> int:
    doc = _load_json_arg(args.layer)
    layer = LayerSpec(name=doc.get("name", "layer"), G=int(doc["G"]),
                      I=int(doc["I"]), Ic=int(doc["Ic"]), Oc=int(doc["Oc"]),
                      elem_bytes=int(doc.get("elem_bytes", 1)))
    cfg = _resolve_hw(args.hw)
    chosen = compile_dataflow(layer, cfg)
    options = tile_options(layer, cfg)
    if args.json:
        print(json.dumps({"chosen": chosen.to_json(),
                          "options": [{"dataflow": o.dataflow.to_json(),
                                       "cycles": o.cycles,
                                       "binding": o.binding}
                                      for o in options]}, indent=2))
        return 0
    print(f"layer {layer.name}: G={layer.G} I={layer.I} Ic={layer.Ic} "
          f"Oc={layer.Oc} ({layer.macs} MACs)")
    print(f"chosen: spatial={chosen.spatial} temporal={chosen.temporal}")
    print(f"{'spatial':>20} {'temporal':>20} {'nodes':>6} {'cycles':>12} binding")
    for o in sorted(options, key=lambda o: o.cycles):
        print(f"{str(o.dataflow.spatial):>20} {str(o.dataflow.temporal):>20} "
              f"{o.dataflow.active_nodes:>6} {o.cycles:>12} {o.binding}")
    return 0


def _cmd_predictors_eval(args) -> int:
    family = Family(args.family)
    mode = SearchMode(args.setting)
    space = default_space(family)
    cfg_space = config_space_for(mode)
    codec = GenomeCodec(space, cfg_space)
    setting = make_setting(mode, space)
    simulator = make_cached_simulator(space)
    params = ProxyParams()

    def oracle(subnet):
        return proxy_accuracy(subnet, params, space)

    genomes, _, cycles = labeled_pool(setting, codec, args.pool, args.seed,
                                      simulator, oracle)
    from .encoding import genomes_to_matrix
    sizes = tuple(int(s) for s in args.train_sizes.split(","))
    curve = evaluate_predictor(genomes_to_matrix(genomes), cycles,
                               train_sizes=sizes, trials=args.trials,
                               test_size=args.test_size, kind=args.predictor,
                               transform=TargetTransform.LOG, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["train_size,mape,kendall_tau,n_test"]
    for e in curve:
        rows.append(f"{e.n_train},{e.mape:.6f},{e.kendall_tau:.6f},{e.n_test}")
    write_atomic(out / "predictor_eval.csv", "\n".join(rows) + "\n")
    print("\n".join(rows))
    if args.plot:
        from .plots import predictor_curve_figure
        predictor_curve_figure(curve, out / "predictor_eval.png")
    return 0


def _cmd_pareto(args) -> int:
    run_dir = Path(args.run)
    points = []
    with open(run_dir / "genomes.jsonl") as fh:
        for line in fh:
            doc = json.loads(line)
            points.append(ParetoPoint(tuple(doc["genome"]), doc["accuracy"],
                                      doc["cycles"],
                                      Provenance(doc["provenance"])))
    front = pareto_front(points)
    rows = ["genome_id,accuracy,cycles"]
    for p in front:
        rows.append(f"{genome_id(p.genome)},{p.accuracy:.6f},{int(p.cycles)}")
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    write_atomic(out / "front.csv", "\n".join(rows) + "\n")
    print("\n".join(rows))
    if args.baseline_accuracy is not None and args.baseline_cycles is not None:
        r = cycle_reduction_at_iso_accuracy(
            front, (args.baseline_accuracy, args.baseline_cycles))
        print(f"cycle_reduction_at_iso_accuracy: {r:.3f}x")
    if args.plot:
        from .plots import pareto_figure
        pareto_figure([("front", front)], None, out / "pareto_front.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cimnet",
        description="Joint sub-network / CiM-hardware configuration search")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run the joint optimization loop")
    p.add_argument("--config", help="experiment config JSON path")
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--setting", choices=[m.value for m in SearchMode])
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--m", type=int, default=2000)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="run")
    p.add_argument("--predictor", choices=["ridge", "svr"], default="ridge")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("simulate", help="cycle-simulate one sub-network")
    p.add_argument("--family", required=True,
                   choices=[f.value for f in Family])
    p.add_argument("--subnet", default="canonical",
                   help="canonical|minimal|maximal, inline JSON, or @file")
    p.add_argument("--hw", default="static",
                   help="static|base, inline JSON, or @file")
    p.add_argument("--out", help="write per-layer CSV here")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("dataflow", help="inspect the tiling of one layer")
    p.add_argument("--layer", required=True,
                   help='inline JSON like {"G":1,"I":3136,"Ic":576,"Oc":64} '
                        "or @file")
    p.add_argument("--hw", default="static")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_dataflow)

    p = sub.add_parser("predictors-eval",
                       help="train-size sweep of the cycle predictor")
    p.add_argument("--family", required=True,
                   choices=[f.value for f in Family])
    p.add_argument("--setting", default="elastic-arch-elastic-config",
                   choices=[m.value for m in SearchMode])
    p.add_argument("--pool", type=int, default=600)
    p.add_argument("--train-sizes", default="100,200,400")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--test-size", type=int, default=150)
    p.add_argument("--predictor", choices=["ridge", "svr"], default="ridge")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="run")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_predictors_eval)

    p = sub.add_parser("pareto", help="extract the front from a run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--out")
    p.add_argument("--baseline-accuracy", type=float)
    p.add_argument("--baseline-cycles", type=float)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_pareto)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (json.JSONDecodeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleConfigSpaceError, DataflowInfeasibleError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
