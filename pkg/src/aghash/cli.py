"""Command-line pipeline: synth, train, encode, evaluate, sweep.

Heavy imports are deferred until after --threads is applied so BLAS pools can
be pinned before numpy loads (single-threaded mode gives bit-identical runs).
"""

import argparse
import os
import sys
import time

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")

_VARIANTS = ("full", "no-aux", "no-att", "only-sv", "only-sa",
             "recons-sa", "recons-sv", "recons-s", "recons-ztz", "recons-feat")

_RECON_BY_VARIANT = {
    "recons-sa": "aux", "recons-sv": "visual", "recons-s": "augmented",
    "recons-ztz": "inner-product", "recons-feat": "feature",
}


def _set_threads_early(argv):
    value = None
    for i, tok in enumerate(argv):
        if tok == "--threads" and i + 1 < len(argv):
            value = argv[i + 1]
        elif tok.startswith("--threads="):
            value = tok.split("=", 1)[1]
    if value is not None:
        for var in _THREAD_VARS:
            os.environ[var] = value


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--threads", type=int, default=None,
                   help="BLAS thread cap (1 gives bit-reproducible runs)")
    p.add_argument("--config", default=None,
                   help="key=value file whose entries override the flags")
    return p


def _add_train_flags(p):
    p.add_argument("--r", type=int, default=32, help="hash code length")
    p.add_argument("--d-prime", type=int, default=512, help="shared attention dimension")
    p.add_argument("--hidden", type=int, default=1024, help="GCN hidden width")
    p.add_argument("--lambda1", type=float, default=100.0)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--lambda3", type=float, default=1.0)
    p.add_argument("--k", type=float, default=1.0, help="reconstruction target scale")
    p.add_argument("--mu", type=float, default=1.0, help="graph fusion weight")
    p.add_argument("--bandwidth", type=float, default=None,
                   help="fixed visual-kernel bandwidth (default: median heuristic)")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--batch", type=int, default=None, help="informational; training is full-batch")
    p.add_argument("--disc-steps", type=int, default=1)
    p.add_argument("--saturating", action="store_true",
                   help="use the literal log(1-D) generator objective")
    p.add_argument("--train-attention", action="store_true",
                   help="train the attention projections jointly")
    p.add_argument("--variant", choices=_VARIANTS, default="full",
                   help="ablation variant expressed as a configuration transform")
    p.add_argument("--format", choices=("text", "binary"), default="text",
                   help="feature file format")


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="aghash", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic clustered dataset")
    p.add_argument("--out", required=True, help="existing output directory")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--c", type=int, default=4)
    p.add_argument("--sep", type=float, default=10.0)
    p.add_argument("--noise", type=float, default=0.0, help="aux label flip probability")
    p.add_argument("--train-size", type=int, default=1000)
    p.add_argument("--query-size", type=int, default=500)
    p.add_argument("--format", choices=("text", "binary"), default="text")

    p = sub.add_parser("train", parents=[common], help="train a hashing model")
    p.add_argument("--features", required=True)
    p.add_argument("--aux", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True, help="existing output directory")
    _add_train_flags(p)

    p = sub.add_parser("encode", parents=[common], help="encode a split into packed codes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--aux", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--subset", choices=("train", "query", "retrieval"), required=True)
    p.add_argument("--out", required=True, help="codes file to write")
    p.add_argument("--format", choices=("text", "binary"), default="text")
    p.add_argument("--r", type=int, default=None, help="expected code length (checked)")
    p.add_argument("--labels", default=None, help="full ground-truth label file to slice")
    p.add_argument("--labels-out", default=None, help="where to write the sliced labels")

    p = sub.add_parser("evaluate", parents=[common], help="MAP@K and topK-precision")
    p.add_argument("--query-codes", required=True)
    p.add_argument("--db-codes", required=True)
    p.add_argument("--query-labels", required=True)
    p.add_argument("--db-labels", required=True)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--curve", default="1,5,10,50,100,500,1000",
                   help="comma-separated K values for the precision curve")
    p.add_argument("--denominator", choices=("min", "full"), default="min",
                   help="AP@K denominator convention")
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("sweep", parents=[common],
                       help="train+encode+evaluate over one axis, emitting value,MAP rows")
    p.add_argument("--features", required=True)
    p.add_argument("--aux", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--labels", required=True, help="full ground-truth label file")
    p.add_argument("--axis", choices=("epochs", "lambda1", "lambda2", "lambda3", "r"), required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--k-eval", type=int, default=100, help="K for MAP@K")
    p.add_argument("--out", required=True, help="CSV file to write")
    p.add_argument("--parallel", type=int, default=1, help="worker processes for sweep points")
    _add_train_flags(p)
    return parser


def _apply_config(args):
    from .errors import ConfigError

    with open(args.config, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{args.config}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise ConfigError(f"{args.config}:{lineno}: unknown option {key!r}")
            current = getattr(args, attr)
            if isinstance(current, bool):
                setattr(args, attr, value.lower() in ("1", "true", "yes"))
            elif isinstance(current, int):
                setattr(args, attr, int(value))
            elif isinstance(current, float):
                setattr(args, attr, float(value))
            else:
                setattr(args, attr, value)


def _resolved(args, keys):
    return {k: getattr(args, k.replace("-", "_")) for k in keys}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args):
    from . import __version__, manifest
    from .data import make_split, save_aux, save_features, save_split, synth_dataset

    out = args.out
    features, aux, truth = synth_dataset(args.n, args.d, args.c, args.sep, args.noise, args.seed)
    split = make_split(args.n, (args.train_size, args.query_size), args.seed)
    ext = "bin" if args.format == "binary" else "txt"
    paths = {
        "features": os.path.join(out, f"features.{ext}"),
        "aux": os.path.join(out, "aux.txt"),
        "labels": os.path.join(out, "labels.txt"),
        "split": os.path.join(out, "split.json"),
    }
    config = _resolved(args, ("n", "d", "c", "sep", "noise", "train-size", "query-size", "format"))
    man_path = os.path.join(out, "manifest.json")
    man = manifest.start(man_path, "synth", config, [], args.seed, __version__)
    save_features(paths["features"], features, format=args.format)
    save_aux(paths["aux"], aux)
    save_aux(paths["labels"], truth)
    save_split(paths["split"], split)
    manifest.finalize(man_path, man, outputs=paths.values())
    print(f"synth: wrote {len(paths)} files to {out} "
          f"(n={args.n}, d={args.d}, c={args.c})")
    return 0


def _train_setup(args):
    """Resolve the ablation variant into (graph_cfg, hyper, train_cfg, use_attention)."""
    from .graph import GraphConfig
    from .objective import Hyperparams
    from .trainer import TrainConfig

    graph_variant = "augmented"
    use_attention = True
    lambda3 = args.lambda3
    recon = "aux"
    if args.variant == "no-aux":
        graph_variant = "visual-only"
        use_attention = False
        lambda3 = 0.0
        recon = "visual"
    elif args.variant == "no-att":
        use_attention = False
    elif args.variant == "only-sv":
        graph_variant = "visual-only"
    elif args.variant == "only-sa":
        graph_variant = "aux-only"
    elif args.variant in _RECON_BY_VARIANT:
        recon = _RECON_BY_VARIANT[args.variant]

    graph_cfg = GraphConfig(mu=args.mu, bandwidth=args.bandwidth, variant=graph_variant)
    hyper = Hyperparams(lambda1=args.lambda1, lambda2=args.lambda2, lambda3=lambda3,
                        k=args.k, recon_target=recon)
    train_cfg = TrainConfig(lr=args.lr, epochs=args.epochs, batch=args.batch, seed=args.seed,
                            disc_steps=args.disc_steps, saturating=args.saturating,
                            train_attention=args.train_attention)
    return graph_cfg, hyper, train_cfg, use_attention


_TRAIN_KEYS = ("features", "aux", "split", "r", "d-prime", "hidden", "lambda1", "lambda2",
               "lambda3", "k", "mu", "bandwidth", "lr", "epochs", "batch", "disc-steps",
               "saturating", "train-attention", "variant", "format")


def cmd_train(args):
    from . import __version__, manifest
    from .data import load_aux, load_features, load_split
    from .trainer import fit, save_model, write_train_log

    features = load_features(args.features, format=args.format)
    aux = load_aux(args.aux)
    split = load_split(args.split)
    graph_cfg, hyper, train_cfg, use_attention = _train_setup(args)

    man_path = os.path.join(args.out, "manifest.json")
    man = manifest.start(man_path, "train", _resolved(args, _TRAIN_KEYS),
                         [args.features, args.aux, args.split], args.seed, __version__)
    start = time.perf_counter()
    model, history = fit(features, aux, split.train, r=args.r, d_prime=args.d_prime,
                         hidden=args.hidden, graph_cfg=graph_cfg, hyper=hyper,
                         cfg=train_cfg, use_attention=use_attention)
    train_time = time.perf_counter() - start
    ckpt = os.path.join(args.out, "checkpoint.bin")
    log = os.path.join(args.out, "trainlog.csv")
    save_model(ckpt, model)
    write_train_log(log, history)
    man["timing"] = {"train_seconds": train_time}
    manifest.finalize(man_path, man, outputs=[ckpt, log])
    final = history[-1]
    print(f"train: {args.epochs} epochs in {train_time:.2f}s, "
          f"final total={final.total_gen:.6g} (quan={final.l_quan:.4g}, "
          f"recons={final.l_recons:.4g}, cl={final.l_cl:.4g}, "
          f"adv={final.l_gen_adv:.4g}, disc={final.l_disc:.4g})")
    return 0


def cmd_encode(args):
    from . import __version__, manifest
    from .data import load_aux, load_features, load_split, save_aux, AuxSemantics
    from .errors import ConfigError
    from .retrieval import pack, save_codes
    from .trainer import encode_queries, encode_train, load_model

    model = load_model(args.checkpoint)
    if args.r is not None and args.r != model.r:
        raise ConfigError(f"checkpoint has r={model.r}, requested r={args.r}")
    features = load_features(args.features, format=args.format)
    aux = load_aux(args.aux)
    split = load_split(args.split)
    idx = getattr(split, args.subset)

    man_path = args.out + ".manifest.json"
    man = manifest.start(man_path, "encode",
                         _resolved(args, ("checkpoint", "features", "aux", "split", "subset", "format")),
                         [args.checkpoint, args.features, args.aux, args.split],
                         args.seed, __version__)
    start = time.perf_counter()
    if args.subset == "train":
        if idx.size != model.z_train.shape[1]:
            raise ConfigError(f"checkpoint was trained on {model.z_train.shape[1]} items, "
                              f"split has {idx.size} training items")
        ids = [features.item_ids[i] for i in idx]
        codes = encode_train(model, item_ids=ids)
    else:
        signs = encode_queries(model, features.data[:, idx], aux.data[:, idx])
        codes = pack(signs, item_ids=[features.item_ids[i] for i in idx])
    encode_time = time.perf_counter() - start
    save_codes(args.out, codes)
    outputs = [args.out]
    if args.labels and args.labels_out:
        truth = load_aux(args.labels)
        save_aux(args.labels_out, AuxSemantics(truth.data[:, idx], truth.category_names))
        outputs.append(args.labels_out)
    man["timing"] = {"encode_seconds": encode_time}
    manifest.finalize(man_path, man, outputs=outputs)
    print(f"encode: {codes.n} items at r={codes.r} in {encode_time:.3f}s -> {args.out}")
    return 0


def cmd_evaluate(args):
    from . import __version__, manifest
    from .data import load_aux
    from .retrieval import evaluate, load_codes, save_report

    query_codes = load_codes(args.query_codes)
    db_codes = load_codes(args.db_codes)
    query_labels = load_aux(args.query_labels)
    db_labels = load_aux(args.db_labels)
    curve = [int(tok) for tok in args.curve.split(",") if tok.strip()]

    man_path = args.out_prefix + ".manifest.json"
    man = manifest.start(man_path, "evaluate",
                         _resolved(args, ("query-codes", "db-codes", "query-labels",
                                          "db-labels", "k", "curve", "denominator")),
                         [args.query_codes, args.db_codes, args.query_labels, args.db_labels],
                         args.seed, __version__)
    report = evaluate(query_codes, db_codes, query_labels.data, db_labels.data,
                      K=args.k, curve_points=curve, denominator=args.denominator)
    json_path = args.out_prefix + ".json"
    curve_path = args.out_prefix + "_curve.csv"
    save_report(json_path, curve_path, report)
    manifest.finalize(man_path, man, outputs=[json_path, curve_path])
    print(f"evaluate: MAP@{args.k} = {report.map_at_k:.6f} over {query_codes.n} queries")
    return 0


def _sweep_point(payload):
    """Train, encode, and evaluate one sweep value. Runs in a worker process."""
    from .data import load_aux, load_features, load_split
    from .retrieval import evaluate, pack
    from .trainer import encode_queries, fit

    args = argparse.Namespace(**payload["args"])
    value = payload["value"]
    if payload["axis"] == "r":
        args.r = int(value)
    elif payload["axis"] == "epochs":
        args.epochs = int(value)
    else:
        setattr(args, payload["axis"], float(value))

    features = load_features(args.features, format=args.format)
    aux = load_aux(args.aux)
    truth = load_aux(args.labels)
    split = load_split(args.split)
    graph_cfg, hyper, train_cfg, use_attention = _train_setup(args)
    model, _ = fit(features, aux, split.train, r=args.r, d_prime=args.d_prime,
                   hidden=args.hidden, graph_cfg=graph_cfg, hyper=hyper,
                   cfg=train_cfg, use_attention=use_attention)
    q_idx, db_idx = split.query, split.retrieval
    q_codes = pack(encode_queries(model, features.data[:, q_idx], aux.data[:, q_idx]))
    db_codes = pack(encode_queries(model, features.data[:, db_idx], aux.data[:, db_idx]))
    report = evaluate(q_codes, db_codes, truth.data[:, q_idx], truth.data[:, db_idx],
                      K=args.k_eval, curve_points=(args.k_eval,))
    return value, report.map_at_k


def cmd_sweep(args):
    from . import __version__, manifest
    from .errors import ParameterError

    values = [tok.strip() for tok in args.values.split(",") if tok.strip()]
    if not values:
        raise ParameterError("sweep needs at least one value")
    man_path = args.out + ".manifest.json"
    config = _resolved(args, _TRAIN_KEYS + ("labels", "axis", "values", "k-eval", "parallel"))
    man = manifest.start(man_path, "sweep", config,
                         [args.features, args.aux, args.split, args.labels],
                         args.seed, __version__)
    payloads = [{"args": vars(args).copy(), "axis": args.axis, "value": v} for v in values]
    if args.parallel > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_sweep_point, payloads))
    else:
        results = [_sweep_point(p) for p in payloads]
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write("value,MAP\n")
        for value, map_k in results:
            fh.write(f"{value},{map_k:.10g}\n")
    manifest.finalize(man_path, man, outputs=[args.out])
    for value, map_k in results:
        print(f"sweep {args.axis}={value}: MAP@{args.k_eval} = {map_k:.6f}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "encode": cmd_encode,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    _set_threads_early(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    from .errors import AghashError

    try:
        if args.config:
            _apply_config(args)
        return _COMMANDS[args.command](args)
    except AghashError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
