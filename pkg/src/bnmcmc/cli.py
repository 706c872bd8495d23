"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 numerical error, 4 concordance check found discrepant edges.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import CATEGORICAL, DbnLayout, build_score_context, load_dataset, load_matrix, load_weights
from .errors import BNError, ScoreError
from .graph import sample_dag
from .io import (SampleArchive, penalty_from_interactions, read_adjacency, read_interactions,
                 write_dot, write_matrix, write_trace)
from .learn import DEFAULT_ALPHA, LearnResult, learn
from .posterior import (DEFAULT_BURNIN, DEFAULT_CUTOFF, DEFAULT_HIGHLIGHT, compare_dags, concordance,
                        consensus_model, edge_posterior, edge_posterior_trace, samplecomp)
from .scoring import simulate_data

EXIT_USAGE, EXIT_DATA, EXIT_SCORE, EXIT_FLAGGED = 1, 2, 3, 4

log = logging.getLogger("bnmcmc")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _floats(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def _names(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bnmcmc", description="Bayesian network structure learning with MCMC")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    lp = sub.add_parser("learn", help="learn a structure from data")
    lp.add_argument("--data", required=True)
    lp.add_argument("--score", choices=("bge", "bde", "bdecat"))
    lp.add_argument("--method", choices=("order", "partition", "iterative"), default="order")
    g = lp.add_mutually_exclusive_group()
    g.add_argument("--map", dest="mode", action="store_const", const="map")
    g.add_argument("--sample", dest="mode", action="store_const", const="sample")
    lp.add_argument("--iterations", type=int)
    lp.add_argument("--stepsave", type=int)
    lp.add_argument("--moveprobs", type=_floats)
    lp.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    lp.add_argument("--startspace")
    lp.add_argument("--blacklist")
    lp.add_argument("--startorder", type=_names, help="comma-separated labels")
    lp.add_argument("--bgnodes", type=_names, default=[], help="comma-separated labels")
    lp.add_argument("--edgepenalty")
    lp.add_argument("--weights")
    lp.add_argument("--hardlimit", type=int)
    g = lp.add_mutually_exclusive_group()
    g.add_argument("--plus1", dest="plus1", action="store_true", default=True)
    g.add_argument("--no-plus1", dest="plus1", action="store_false")
    lp.add_argument("--am", type=float, default=1.0)
    lp.add_argument("--aw", type=float)
    lp.add_argument("--chi", type=float, default=0.5)
    lp.add_argument("--edgepf", type=float, default=2.0)
    lp.add_argument("--burnin", type=float, default=DEFAULT_BURNIN)
    lp.add_argument("--posterior", type=float, default=0.5,
                    help="edge threshold for iterative expansion in sampling mode")
    lp.add_argument("--merge-mode", choices=("dag", "cpdag", "skeleton"), default="dag")
    lp.add_argument("--max-expansions", type=int)
    lp.add_argument("--no-expand", dest="expand", action="store_false",
                    help="partition chain: sample on the PC skeleton without iterative expansion")
    lp.add_argument("--chains", type=int, default=1)
    lp.add_argument("--seed", type=int)
    lp.add_argument("--cache-dir")
    lp.add_argument("--dot", action="store_true", help="also write DOT files")
    lp.add_argument("--dbn-static", type=int, help="number of static columns (enables DBN mode)")
    lp.add_argument("--dbn-slices", type=int)
    lp.add_argument("--no-samestruct", dest="samestruct", action="store_false")
    lp.add_argument("--out-dir", required=True)

    ap = sub.add_parser("analyze", help="analyse saved samples")
    asub = ap.add_subparsers(dest="analysis", required=True, parser_class=_Parser)

    def sample_args(q, pdag_default=False):
        q.add_argument("--samples", required=True)
        q.add_argument("--burnin", type=float, default=DEFAULT_BURNIN)
        gg = q.add_mutually_exclusive_group()
        gg.add_argument("--pdag", dest="pdag", action="store_true", default=pdag_default)
        gg.add_argument("--no-pdag", dest="pdag", action="store_false")

    q = asub.add_parser("edgep", help="edge posterior matrix")
    sample_args(q)
    q.add_argument("--out", required=True)
    q = asub.add_parser("modelp", help="consensus graphs")
    sample_args(q)
    q.add_argument("-p", "--p", type=_floats, default=[0.5])
    q.add_argument("--out-dir", required=True)
    q.add_argument("--dot", action="store_true")
    q = asub.add_parser("trace", help="running edge posteriors")
    q.add_argument("--samples", required=True)
    q.add_argument("--cutoff", type=float, default=DEFAULT_CUTOFF)
    q.add_argument("--out", required=True)
    q = asub.add_parser("concord", help="compare edge posteriors of two runs")
    q.add_argument("--samples", nargs=2, required=True, metavar=("A", "B"))
    q.add_argument("--burnin", type=float, default=DEFAULT_BURNIN)
    q.add_argument("--pdag", action="store_true")
    q.add_argument("--highlight", type=float, default=DEFAULT_HIGHLIGHT)
    q.add_argument("--out", required=True)
    q = asub.add_parser("itercomp", help="per-round comparison of iterative MAP graphs")
    q.add_argument("--rounds", required=True, help="rounds.npz written by learn --method iterative")
    q.add_argument("--truth", required=True)
    q.add_argument("--cpdag", action="store_true")
    q.add_argument("--out", required=True)
    q = asub.add_parser("samplecomp", help="consensus graphs against a known graph")
    sample_args(q, pdag_default=True)
    q.add_argument("--truth", required=True)
    q.add_argument("-p", "--p", type=_floats, default=[0.5, 0.7, 0.9, 0.95])
    q.add_argument("--out", required=True)

    sp = sub.add_parser("simulate", help="simulate a random network and data")
    sp.add_argument("--nodes", type=int, required=True)
    sp.add_argument("--avg-parents", type=float, default=2.0)
    sp.add_argument("--model", choices=("linear-gaussian", "categorical-cpt"), default="linear-gaussian")
    sp.add_argument("--levels", type=int, default=2)
    sp.add_argument("--rows", type=int, required=True)
    sp.add_argument("--dbn-static", type=int)
    sp.add_argument("--dbn-slices", type=int)
    sp.add_argument("--no-samestruct", dest="samestruct", action="store_false")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out-dir", required=True)

    pp = sub.add_parser("penalty-from-interactions", help="edge penalty matrix from an interaction list")
    pp.add_argument("--interactions", required=True)
    pp.add_argument("--labels", required=True,
                    help="comma-separated labels or a CSV file whose header holds them")
    pp.add_argument("--factor", type=float, default=2.0)
    pp.add_argument("--out", required=True)
    return p


# learn -----------------------------------------------------------------------------

def _index(labels, names, what):
    idx = {s: k for k, s in enumerate(labels)}
    bad = [s for s in names if s not in idx]
    if bad:
        raise UsageError(f"unknown {what}: {', '.join(bad)}")
    return [idx[s] for s in names]


def _write_bundle(out: Path, res: LearnResult, labels, stepsave, dot: bool) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    write_matrix(out / "maxdag.csv", res.max_dag.astype(int), labels)
    files["maxdag"] = "maxdag.csv"
    write_trace(out / "trace.csv", res.chain.trace, stepsave)
    files["trace"] = "trace.csv"
    if res.chain.dags is not None and res.mode == "sample":
        SampleArchive(tuple(labels), res.chain.dags, res.chain.trace, res.chain.kind, stepsave).save(
            out / "samples.npz")
        files["samples"] = "samples.npz"
    if res.iterative is not None:
        write_matrix(out / "space_final.csv", res.space.core.astype(int), labels)
        files["space_final"] = "space_final.csv"
        it = res.iterative
        np.savez_compressed(out / "rounds.npz", labels=np.array(labels), dags=np.stack(it.max_dags),
                            scores=np.array(it.max_scores))
        it.summary_table().to_csv(out / "iterations.csv", index=False)
        (out / "summary.txt").write_text(it.summary() + "\n")
        files.update(rounds="rounds.npz", iterations="iterations.csv", summary="summary.txt")
    if dot:
        write_dot(out / "maxdag.dot", res.max_dag, labels, "maxdag")
        files["dot"] = "maxdag.dot"
    return files


def cmd_learn(args) -> int:
    if args.method == "partition" and args.mode == "map":
        raise UsageError("partition MCMC only samples")
    mode = args.mode or "sample"
    if args.chains < 1:
        raise UsageError("--chains must be at least 1")
    if (args.dbn_static is None) != (args.dbn_slices is None):
        raise UsageError("--dbn-static and --dbn-slices go together")

    kinds = None
    if args.score == "bdecat":
        with open(args.data) as fh:
            header = fh.readline().strip().split(",")
        kinds = {h.strip(): CATEGORICAL for h in header if h.strip()}
    data = load_dataset(args.data, kinds)
    seed = args.seed if args.seed is not None else int(np.random.SeedSequence().entropy % (1 << 63))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()

    weights = load_weights(args.weights, data.n_rows) if args.weights else None
    score_opts = dict(am=args.am, aw=args.aw, chi=args.chi, edgepf=args.edgepf, weights=weights)
    learn_opts = dict(
        alpha=args.alpha, plus1=args.plus1, hardlimit=args.hardlimit, iterations=args.iterations,
        stepsave=args.stepsave, moveprobs=args.moveprobs, expand=args.expand,
        max_expansions=args.max_expansions, merge_mode=args.merge_mode, posterior=args.posterior,
        cache_dir=args.cache_dir,
    )
    meta = {
        "version": __version__,
        "command": "learn",
        "data": str(args.data),
        "seed": seed,
        "chains": args.chains,
        "burnin": args.burnin,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }

    if args.dbn_static is not None:
        return _learn_dbn(args, data, mode, seed, score_opts, learn_opts, meta, out, t_start)

    labels = data.labels
    if args.edgepenalty:
        score_opts["edge_penalty"] = load_matrix(args.edgepenalty, labels=labels)[0]
    bg = _index(labels, args.bgnodes, "background node")
    ctx = build_score_context(data, args.score, bgnodes=bg, **score_opts)
    if args.startspace:
        learn_opts["startspace"] = read_adjacency(args.startspace, labels)[0]
    if args.blacklist:
        learn_opts["blacklist"] = read_adjacency(args.blacklist, labels)[0]
    if args.startorder:
        learn_opts["startorder"] = _index(labels, args.startorder, "node in start order")

    results = []
    for k in range(args.chains):
        ss = np.random.SeedSequence(seed, spawn_key=(k,))
        res = learn(ctx, args.method, mode, seed=ss, **learn_opts)
        target = out if args.chains == 1 else out / f"chain{k + 1}"
        files = _write_bundle(target, res, labels, res.chain.info["stepsave"], args.dot)
        results.append((res, files))

    res = results[0][0]
    chain = res.chain.info
    meta.update(
        score=ctx.options(),
        n_nodes=ctx.n,
        n_rows=data.n_rows,
        labels=list(labels),
        alpha=args.alpha,
        method=args.method,
        mode=mode,
        plus1=res.meta["plus1"],
        hardlimit=res.meta["hardlimit"],
        iterations=chain["iterations"],
        stepsave=chain["stepsave"],
        saved_states=len(res.chain.trace),
        iterations_formula=chain.get("iterations_formula"),
        moveprobs=chain["moveprobs"],
        max_score=res.max_score,
        runs=[{"files": f, "max_score": r.max_score, "learn": r.meta} for r, f in results],
    )
    if res.iterative is not None:
        meta["iterative"] = res.meta["iterative"]
    meta["timings"] = {"total": time.perf_counter() - t_start}
    _write_meta(out, meta)
    print(f"max score {res.max_score:.6f}; results in {out}")
    return 0


def _learn_dbn(args, data, mode, seed, score_opts, learn_opts, meta, out, t_start) -> int:
    from .dbn import LAG, learn_dbn

    b = args.dbn_static
    T = args.dbn_slices
    if (data.n_cols - b) % T:
        raise UsageError(f"{data.n_cols} columns do not split into {b} static + {T} equal slices")
    layout = DbnLayout(b, (data.n_cols - b) // T, T, args.samestruct)
    for key in ("startspace", "blacklist", "startorder", "edgepenalty"):
        if getattr(args, key):
            raise UsageError(f"--{key} is not supported together with DBN layout flags")
    if args.bgnodes:
        raise UsageError("static columns are background nodes in DBN mode; drop --bgnodes")
    res = learn_dbn(data, layout, args.method, mode, args.score, score_opts,
                    seed=np.random.SeedSequence(seed), **learn_opts)
    st = res.structure
    write_matrix(out / "initial.csv", st.initial.astype(int), st.initial_labels)
    write_matrix(out / "transition.csv", st.transition.astype(int), st.transition_labels)
    tr = res.transition
    stepsave = tr.chain.info["stepsave"]
    write_trace(out / "trace.csv", tr.chain.trace, stepsave)
    if tr.chain.dags is not None and mode == "sample":
        SampleArchive(st.transition_labels, tr.chain.dags, tr.chain.trace, tr.chain.kind, stepsave).save(
            out / "samples.npz")
    # combined picture: transition graph plus the initial slice's edges
    write_dot(out / "dbn.dot", st.transition, st.transition_labels, "dbn")
    meta.update(
        score=score_opts | {"weights": score_opts["weights"] is not None},
        alpha=args.alpha, method=args.method, mode=mode,
        dbn={"static": b, "dynamic": layout.n_dynamic, "slices": T, "samestruct": layout.samestruct,
             "lag_prefix": LAG},
        plus1=tr.meta["plus1"], hardlimit=tr.meta["hardlimit"],
        iterations=tr.chain.info["iterations"], stepsave=stepsave,
        saved_states=len(tr.chain.trace),
        iterations_formula=tr.chain.info.get("iterations_formula"),
        max_score=tr.max_score, learn=tr.meta,
    )
    meta["timings"] = {"total": time.perf_counter() - t_start}
    _write_meta(out, meta)
    print(f"transition max score {tr.max_score:.6f}; results in {out}")
    return 0


def _write_meta(out: Path, meta: dict) -> None:
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json) + "\n")


def _json(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


# analyze ----------------------------------------------------------------------------

def _post_frame(post, labels):
    import pandas as pd
    return pd.DataFrame(post, index=list(labels), columns=list(labels))


def cmd_analyze(args) -> int:
    a = args.analysis
    if a == "edgep":
        arc = SampleArchive.load(args.samples)
        post = edge_posterior(arc.dags, args.pdag, args.burnin)
        _post_frame(post, arc.labels).to_csv(args.out)
        return 0
    if a == "modelp":
        arc = SampleArchive.load(args.samples)
        post = edge_posterior(arc.dags, args.pdag, args.burnin)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for p in args.p:
            g = consensus_model(post, p)
            write_matrix(out / f"consensus_p{p:g}.csv", g.astype(int), arc.labels)
            if args.dot:
                write_dot(out / f"consensus_p{p:g}.dot", g, arc.labels, "consensus")
        return 0
    if a == "trace":
        arc = SampleArchive.load(args.samples)
        df = edge_posterior_trace(arc.dags, args.cutoff, arc.labels)
        df.index = df.index * arc.stepsave
        df.to_csv(args.out)
        return 0
    if a == "concord":
        x, y = (SampleArchive.load(s) for s in args.samples)
        if x.labels != y.labels:
            raise UsageError("the two archives cover different node sets")
        c = concordance(edge_posterior(x.dags, args.pdag, args.burnin),
                        edge_posterior(y.dags, args.pdag, args.burnin), args.highlight, x.labels)
        c.table.to_csv(args.out, index=False)
        print(f"max difference {c.max_diff:.4f}; {c.n_flagged} edges differ by more than {c.highlight:g}")
        return EXIT_FLAGGED if c.n_flagged else 0
    if a == "itercomp":
        with np.load(args.rounds) as z:
            labels = tuple(str(s) for s in z["labels"])
            dags, scores = z["dags"], z["scores"]
        truth = read_adjacency(args.truth, labels)[0]
        rows = []
        for k, (g, s) in enumerate(zip(dags, scores), start=1):
            rows.append({"iteration": k, "score": float(s), **compare_dags(g, truth, args.cpdag)})
        import pandas as pd
        pd.DataFrame(rows).to_csv(args.out, index=False)
        return 0
    if a == "samplecomp":
        arc = SampleArchive.load(args.samples)
        truth = read_adjacency(args.truth, arc.labels)[0]
        df = samplecomp(arc.dags, truth, args.p, args.pdag, args.burnin)
        df.to_csv(args.out, index=False)
        print(df.to_string(index=False))
        return 0
    raise UsageError(f"unknown analysis {a}")


# simulate / penalties ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.nodes < 1 or args.rows < 0:
        raise UsageError("--nodes must be positive and --rows nonnegative")
    seed = args.seed if args.seed is not None else int(np.random.SeedSequence().entropy % (1 << 63))
    rng = np.random.default_rng(seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"version": __version__, "command": "simulate", "seed": seed, "nodes": args.nodes,
            "rows": args.rows, "model": args.model, "avg_parents": args.avg_parents}
    if (args.dbn_static is None) != (args.dbn_slices is None):
        raise UsageError("--dbn-static and --dbn-slices go together")
    if args.dbn_static is not None:
        from .dbn import random_dbn, simulate_dbn
        layout = DbnLayout(args.dbn_static, args.nodes, args.dbn_slices, args.samestruct)
        st = random_dbn(layout, args.avg_parents, rng)
        data = simulate_dbn(st, args.model, args.rows, rng, n_levels=args.levels)
        write_matrix(out / "initial.csv", st.initial.astype(int), st.initial_labels)
        write_matrix(out / "transition.csv", st.transition.astype(int), st.transition_labels)
        meta["dbn"] = {"static": layout.n_static, "slices": layout.slices, "samestruct": layout.samestruct}
    else:
        adj = sample_dag(args.nodes, args.avg_parents, rng)
        data = simulate_data(adj, args.model, args.rows, rng, n_levels=args.levels)
        write_matrix(out / "truth.csv", adj.astype(int), data.labels)
    data.to_csv(out / "data.csv")
    _write_meta(out, meta)
    return 0


def cmd_penalty(args) -> int:
    src = Path(args.labels)
    if src.is_file():
        with open(src) as fh:
            labels = [s.strip() for s in fh.readline().strip().split(",")]
    else:
        labels = _names(args.labels)
    pen = penalty_from_interactions(read_interactions(args.interactions), labels, args.factor)
    write_matrix(args.out, pen, labels)
    return 0


COMMANDS = {"learn": cmd_learn, "analyze": cmd_analyze, "simulate": cmd_simulate,
            "penalty-from-interactions": cmd_penalty}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"bnmcmc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScoreError as exc:
        print(f"bnmcmc: numerical error: {exc}", file=sys.stderr)
        return EXIT_SCORE
    except (BNError, OSError) as exc:
        print(f"bnmcmc: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
