"""Command line driver: every pipeline stage as one subcommand.

Stages compose through the workspace directory: ingest writes the catalog
and feedback log, factorize adds a vector snapshot, later stages read both.
Every subcommand validates its inputs and exits nonzero with a one line
reason on stderr.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .config import PipelineConfig, load_config
from .densify import densify_user
from .embed import nmf_factorize, tag_matrix
from .lsh import build_index
from .model import UnknownIdError
from .prefopt import OptimizerConfig, learn_preference
from .recwalk import WalkConfig, Walker, build_graph, save_graph
from .simulate import CONFIGURATIONS, results_table, run_experiment
from .store import Workspace


def _config(args) -> PipelineConfig:
    cfg = load_config(getattr(args, "config", None))
    overrides = {
        name: getattr(args, name)
        for name in ("d", "threshold", "gamma", "lr", "k")
        if getattr(args, name, None) is not None
    }
    return replace(cfg, **overrides) if overrides else cfg


def _walker(ws: Workspace, cfg: PipelineConfig) -> Walker:
    vectors = ws.load_vectors(expected_dim=cfg.d)
    index = build_index(vectors, p=cfg.buckets, ids=ws.catalog.ids)
    graph = build_graph(ws.profile_store(), vectors, cfg.threshold, index)
    return Walker(graph, WalkConfig(alpha=cfg.alpha, beta=cfg.beta))


def _apply_feedback_file(ws: Workspace, path) -> int:
    n = 0
    for record in io.iter_records(path):
        if record.kind in ("like", "dislike"):
            user, item = record.fields
            ws.record_item(user, item, liked=record.kind == "like")
        elif record.kind == "pair":
            user, fb = io.decode_pair(record)
            ws.record_pair(user, fb)
        else:
            raise ValueError(f"unexpected record kind {record.kind!r} in {path}")
        n += 1
    return n


def cmd_ingest(args) -> int:
    catalog = io.load_catalog(args.catalog)
    ws = Workspace.create(args.workspace, catalog)
    n = _apply_feedback_file(ws, args.likes) if args.likes else 0
    print(f"ingested {len(catalog)} items, {n} feedback events -> {ws.root}")
    return 0


def cmd_factorize(args) -> int:
    cfg = _config(args)
    ws = Workspace.open(args.workspace)
    result = nmf_factorize(tag_matrix(ws.catalog), d=cfg.d, seed=args.seed)
    ws.save_vectors(result.W)
    print(
        f"factorized {len(ws.catalog)} items into d={cfg.d}, "
        f"objective {result.objective[-1]:.6f} after {result.iterations} iterations"
    )
    return 0


def cmd_build_graph(args) -> int:
    cfg = _config(args)
    ws = Workspace.open(args.workspace)
    walker = _walker(ws, cfg)
    out = args.out or (ws.root / "graph.tsv")
    save_graph(out, walker.graph)
    print(
        f"graph with {walker.graph.n_nodes} nodes, "
        f"{walker.graph.S.nnz // 2} similarity edges -> {out}"
    )
    return 0


def cmd_recommend(args) -> int:
    cfg = _config(args)
    ws = Workspace.open(args.workspace)
    slate = _walker(ws, cfg).recommend(args.user, n=args.n)
    for item, score in slate.recs:
        print(f"{item}\t{io.format_float(score)}")
    return 0


def cmd_explain(args) -> int:
    cfg = _config(args)
    ws = Workspace.open(args.workspace)
    for item, weight in _walker(ws, cfg).explain(args.user, args.rec, k=cfg.k):
        print(f"{item}\t{io.format_float(weight)}")
    return 0


def cmd_feedback(args) -> int:
    ws = Workspace.open(args.workspace)
    n = _apply_feedback_file(ws, args.file)
    print(f"stored {n} feedback events")
    return 0


def _densified(ws: Workspace, cfg: PipelineConfig, user: str):
    vectors = ws.load_vectors(expected_dim=cfg.d)
    index = build_index(vectors, p=cfg.buckets, ids=ws.catalog.ids)
    vector_map = {i: vectors[row] for row, i in enumerate(ws.catalog.ids)}
    dense = densify_user(ws.pair_feedback(user), vector_map, index, k=cfg.k)
    return dense, vector_map


def cmd_densify(args) -> int:
    cfg = _config(args)
    ws = Workspace.open(args.workspace)
    dense, _ = _densified(ws, cfg, args.user)
    for fb in dense:
        print(io.encode_pair(args.user, fb))
    return 0


def cmd_learn(args) -> int:
    cfg = _config(args)
    ws = Workspace.open(args.workspace)
    dense, vector_map = _densified(ws, cfg, args.user)
    pref = learn_preference(
        dense, vector_map, OptimizerConfig(gamma=cfg.gamma, lr=cfg.lr, seed=args.seed)
    )
    ws.save_pref(args.user, pref.w, pref.objective)
    print(
        f"learned preference for {args.user} from {dense.m} pairs, "
        f"objective {pref.objective:.6f}"
    )
    return 0


def cmd_rerank(args) -> int:
    cfg = _config(args)
    ws = Workspace.open(args.workspace)
    walker = _walker(ws, cfg)
    pref = ws.pref(args.user)
    if pref is None or not pref[0].any():
        print(f"warning: no learned preference for {args.user}, "
              "ranking equals recommend", file=sys.stderr)
        slate = walker.recommend(args.user, n=args.n)
    else:
        slate = walker.recommend_with_feedback(args.user, pref[0], n=args.n)
    for item, score in slate.recs:
        print(f"{item}\t{io.format_float(score)}")
    return 0


def cmd_evaluate(args) -> int:
    names = [c for c in CONFIGURATIONS if c in ("ItemLevel", args.name)]
    if args.name not in names:
        raise ValueError(f"unknown configuration: {args.name!r}")
    result = run_experiment(
        seed=args.seed, n_users=args.users, n_items=args.items,
        configurations=tuple(names),
    )
    print(results_table(result.outcomes))
    return 0


def cmd_simulate(args) -> int:
    result = run_experiment(seed=args.seed, n_users=args.population, n_items=args.items)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    table = results_table(result.outcomes)
    (out / "metrics.tsv").write_text(table + "\n", encoding="utf-8")
    (out / "metrics.csv").write_text(
        results_table(result.outcomes, sep=",") + "\n", encoding="utf-8"
    )
    lines = []
    for user, log in result.logs.items():
        for rec, liked in log.item_verdicts.items():
            lines.append(io.encode_like(user, rec) if liked
                         else io.encode_dislike(user, rec))
        for rec, rated in list(log.exp_pairs.items()) + list(log.rand_pairs.items()):
            lines.extend(f"pair\t{user}\t{rec}\t{other}\t{'+1' if v > 0 else '-1'}"
                         for other, v in rated)
    io.write_lines(out / "phase2.log", lines)
    print(table)
    print(f"wrote metrics.tsv, metrics.csv, phase2.log -> {out}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    ws = Workspace.open(args.workspace)
    uvicorn.run(create_app(ws, _config(args)), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairrec", description="pair-level feedback recommendation pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON pipeline config, env vars override")
        return p

    p = add("ingest", cmd_ingest, help="create a workspace from catalog and likes")
    p.add_argument("--workspace", type=Path, required=True)
    p.add_argument("--catalog", type=Path, required=True)
    p.add_argument("--likes", type=Path, default=None)

    p = add("factorize", cmd_factorize, help="embed items by factorizing tags")
    p.add_argument("--workspace", type=Path, required=True)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)

    p = add("build-graph", cmd_build_graph, help="dump the interaction graph")
    p.add_argument("--workspace", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", type=Path, default=None)

    p = add("recommend", cmd_recommend, help="top items for one user")
    p.add_argument("--workspace", type=Path, required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--n", type=int, default=30)

    p = add("explain", cmd_explain, help="history items behind one rec")
    p.add_argument("--workspace", type=Path, required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--rec", required=True)
    p.add_argument("--k", type=int, default=None)

    p = add("feedback", cmd_feedback, help="store a feedback file")
    p.add_argument("--workspace", type=Path, required=True)
    p.add_argument("--file", type=Path, required=True)

    p = add("densify", cmd_densify, help="propagate one user's pair labels")
    p.add_argument("--workspace", type=Path, required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--k", type=int, default=None)

    p = add("learn", cmd_learn, help="fit a preference vector from pairs")
    p.add_argument("--workspace", type=Path, required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)

    p = add("rerank", cmd_rerank, help="recommend through the learned taste")
    p.add_argument("--workspace", type=Path, required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--n", type=int, default=30)

    p = sub.add_parser("evaluate", help="score one configuration in simulation")
    p.set_defaults(fn=cmd_evaluate)
    p.add_argument("--config", dest="name", required=True, metavar="NAME",
                   help=f"one of: {', '.join(CONFIGURATIONS)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--users", type=int, default=25)
    p.add_argument("--items", type=int, default=600)

    p = add("simulate", cmd_simulate, help="full synthetic study, all configurations")
    p.add_argument("--population", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--items", type=int, default=600)
    p.add_argument("--out", type=Path, required=True)

    p = add("serve", cmd_serve, help="run the feedback session service")
    p.add_argument("--workspace", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, KeyError, UnknownIdError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
