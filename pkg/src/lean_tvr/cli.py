"""Command-line entry point: ``lean-tvr <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 gradient
check failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataio, kernels
from .errors import LeanError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_GRADCHECK = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="lean-tvr", description="Hypergraph text-video retrieval at desk scale.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--backend", choices=kernels.available_backends(),
                   help=f"pair kernel (default {kernels.backend_name()})")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic clustered dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--pairs", type=int, default=32)
    s.add_argument("--clusters", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.05)
    s.add_argument("--frames", type=int, default=6)
    s.add_argument("--tokens", type=int, default=3)
    s.add_argument("--text-dim", type=int, default=768)
    s.add_argument("--video-dim", type=int, default=4096)
    s.add_argument("--spread", type=float, default=0.5)

    t = sub.add_parser("train", help="train on a manifest's train split")
    t.add_argument("--manifest", required=True)
    t.add_argument("--config", help="JSON file of training options")
    t.add_argument("--out", required=True)

    e = sub.add_parser("eval", help="retrieval metrics of a checkpoint on a split")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--json", dest="json_path", help="also write the metrics JSON here")

    r = sub.add_parser("retrieve", help="top-k items for one query")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--manifest", required=True)
    r.add_argument("--query-id", required=True)
    r.add_argument("--topk", type=int, default=5)
    r.add_argument("--direction", choices=("t2v", "v2t"), default="t2v")

    g = sub.add_parser("gradcheck", help="finite-difference check of the model gradient")
    g.add_argument("--dim", type=int, default=8)
    g.add_argument("--seed", type=int, default=None)

    i = sub.add_parser("inspect", help="print a checkpoint's parameters and config")
    i.add_argument("--ckpt", required=True)
    return p


def _cmd_synth(a) -> int:
    spec = dataio.SynthSpec(pairs=a.pairs, clusters=a.clusters, text_dim=a.text_dim,
                            video_dim=a.video_dim, frames=a.frames, tokens=a.tokens,
                            noise=a.noise, spread=a.spread, seed=a.seed)
    print(dataio.synth_generate(spec, a.out))
    return EXIT_OK


def _cmd_train(a) -> int:
    from .trainer import TrainConfig, train

    config = TrainConfig.load(a.config) if a.config else TrainConfig()
    print(train(a.manifest, config, a.out, backend=a.backend))
    return EXIT_OK


def _cmd_eval(a) -> int:
    from .evaluation import evaluate

    result = evaluate(a.ckpt, a.manifest, a.split, backend=a.backend)
    text = json.dumps(result, indent=2, sort_keys=True)
    if a.json_path:
        Path(a.json_path).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_retrieve(a) -> int:
    from .evaluation import retrieve

    for rid, score in retrieve(a.ckpt, a.manifest, a.query_id, a.topk, a.direction, a.backend):
        print(f"{rid}\t{score:.6f}")
    return EXIT_OK


def _cmd_gradcheck(a) -> int:
    from .gradcheck import DEFAULT_SEED, run_gradcheck

    seed = DEFAULT_SEED if a.seed is None else a.seed
    rep = run_gradcheck(dim=a.dim, seed=seed, backend=a.backend)
    print(f"max relative error {rep.max_rel_error:.3e} over {rep.coords} coordinates "
          f"(worst: {rep.worst_param}; {rep.failures} >= 1e-4)")
    return EXIT_OK if rep.ok else EXIT_GRADCHECK


def _cmd_inspect(a) -> int:
    from .evaluation import checkpoint_summary

    info = checkpoint_summary(a.ckpt)
    for name, shape in info["params"].items():
        print(f"{name}\t{'x'.join(map(str, shape)) or 'scalar'}")
    print(json.dumps({k: v for k, v in info.items() if k != "params"}, indent=2, sort_keys=True))
    return EXIT_OK


_COMMANDS = {"synth": _cmd_synth, "train": _cmd_train, "eval": _cmd_eval,
             "retrieve": _cmd_retrieve, "gradcheck": _cmd_gradcheck, "inspect": _cmd_inspect}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return _COMMANDS[args.command](args)
    except (FileNotFoundError, IsADirectoryError, LeanError, KeyError, ValueError) as exc:
        print(f"lean-tvr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
