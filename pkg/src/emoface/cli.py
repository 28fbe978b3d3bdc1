"""Command-line interface: synth-data, train, generate, eval, serve."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np


def _setup_logging() -> None:
    level = os.environ.get("EET_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s")


def _load_config(args):
    from .pipeline import load_config

    if not Path(args.config).exists():
        raise FileNotFoundError(f"config file not found: {args.config}")
    return load_config(args.config, seed_override=args.seed)


def _parse_edit_specs(specs: list[str]) -> list[tuple[int | tuple[int, int], float]]:
    """Parse k:alpha or i-j:alpha edit arguments."""
    edits = []
    for spec in specs or []:
        try:
            key, alpha = spec.rsplit(":", 1)
            if "-" in key:
                i, j = key.split("-", 1)
                edits.append(((int(i), int(j)), float(alpha)))
            else:
                edits.append((int(key), float(alpha)))
        except ValueError:
            raise ValueError(f"bad edit spec {spec!r}; expected k:alpha or i-j:alpha")
    return edits


def cmd_synth_data(args) -> int:
    from .pipeline import run_synth_data

    cfg = _load_config(args)
    manifest = run_synth_data(cfg, args.out, force=args.force)
    print(f"wrote {len(manifest['samples'])} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    from .pipeline import run_train

    cfg = _load_config(args)
    artifacts = run_train(cfg, args.dataset, args.out)
    print(json.dumps(artifacts.__dict__, indent=1))
    return 0


def _load_run(checkpoint: str, dictionary: str | None, model: str | None):
    from .facemodel import load_model
    from .manifold import load_dictionary
    from .pipeline import load_checkpoint

    ckpt_path = Path(checkpoint)
    ckpt = load_checkpoint(ckpt_path)
    dict_path = Path(dictionary) if dictionary else ckpt_path.parent / "dictionary.json"
    model_path = Path(model) if model else ckpt_path.parent / "model.eetm"
    dictionary_obj, _ = load_dictionary(dict_path)
    return ckpt, dictionary_obj, load_model(model_path), dict_path, model_path


def cmd_generate(args) -> int:
    from .pipeline import run_generate

    ckpt, dictionary, model, _, _ = _load_run(args.checkpoint, args.dictionary, args.model)
    embedding = None
    if args.embedding_file:
        with open(args.embedding_file, encoding="utf-8") as fh:
            embedding = np.asarray(json.load(fh), dtype=np.float64)
    manifest = run_generate(
        ckpt,
        dictionary,
        model,
        args.out,
        label=args.label,
        embedding=embedding,
        edits=_parse_edit_specs(args.edit),
        frames=args.frames,
        seed=args.seed if args.seed is not None else 0,
        deterministic=not args.ancestral,
    )
    print(f"wrote {manifest['frames']} frames to {args.out}")
    return 0


def cmd_eval(args) -> int:
    from .pipeline import evaluate_checkpoint

    ckpt, _, model, _, _ = _load_run(args.checkpoint, args.dictionary, args.model)
    report = evaluate_checkpoint(ckpt, model, args.dataset, split=args.split)
    text = json.dumps(report, indent=1)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        args.checkpoint,
        args.dictionary or str(Path(args.checkpoint).parent / "dictionary.json"),
        model_path=args.model,
        metrics_path=args.metrics,
        static_dir=args.static,
    )
    host, _, port = args.bind.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emoface", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate the synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true", help="overwrite a non-empty directory")
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="train classifier, dictionary, and diffusion model")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample an animation from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dictionary", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--label", default=None)
    p.add_argument("--embedding-file", default=None, help="JSON array with a base embedding")
    p.add_argument("--edit", action="append", default=[], help="k:alpha or i-j:alpha (repeatable)")
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ancestral", action="store_true", help="stochastic sampling")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dictionary", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="val", choices=("val", "train"))
    p.add_argument("--out", default=None, help="also write the report JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP editing service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dictionary", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--metrics", default=None, help="metrics report JSON to serve")
    p.add_argument("--static", default=None, help="directory with the studio UI build")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, IndexError, FileNotFoundError, FileExistsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
