"""Command-line entry point: ``gacl <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, taskgen, taskvae
from .harness import ConfigError, load_config

log = logging.getLogger("gacl")


def _common(p: argparse.ArgumentParser, out_default: str) -> None:
    p.add_argument("--config", help="YAML file of RunConfig keys")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", default=out_default, help="output directory (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gacl", description="Grounded adaptive curriculum learning on grid navigation tasks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-refs", help="generate a reference task set")
    _common(p, "refs")
    p.add_argument("--n", type=int, help="number of maps (default: n_refs from the config)")

    p = sub.add_parser("pretrain-vae", help="pretrain the task VAE on a reference set")
    _common(p, "vae")
    p.add_argument("--refs", help="reference manifest.csv (default: generate from the config)")
    p.add_argument("--epochs", type=int, help="training epochs (default: vae_epochs from the config)")

    p = sub.add_parser("train", help="run one training arm")
    _common(p, "runs/run")
    p.add_argument("--arm", choices=harness.ARMS, help="training arm (default: arm from the config)")
    p.add_argument("--epochs", type=int, help="total epochs (overrides the config)")
    p.add_argument("--vae", help="pretrained VAE checkpoint (default: pretrain inline)")
    p.add_argument("--refs", help="reference manifest.csv (default: generate from the config)")

    p = sub.add_parser("eval", help="re-evaluate a run directory on its held-out suite")
    p.add_argument("run_dir")
    p.add_argument("--checkpoint", default="student", choices=("student", "antagonist"))
    p.add_argument("--out", help="write the report JSON here instead of stdout")

    p = sub.add_parser("export-csv", help="export comparison and difficulty-trend CSVs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", default="export", help="output directory (default: %(default)s)")
    return parser


def cmd_gen_refs(args) -> int:
    cfg = load_config(args.config, refs_seed=args.seed, n_refs=args.n)
    refs = harness.reference_tasks(cfg)
    manifest = taskgen.write_reference_set(refs, args.out, cfg.alpha, cfg.beta)
    print(f"wrote {len(refs)} maps to {manifest}")
    return 0


def cmd_pretrain_vae(args) -> int:
    cfg = load_config(args.config, seed=args.seed, refs_manifest=args.refs, vae_epochs=args.epochs)
    refs = harness.reference_tasks(cfg)
    vae, curve = taskvae.pretrain(refs, cfg.vae_epochs, cfg.vae_batch, cfg.vae_lr, cfg.vae_kl_weight, seed=cfg.seed, latent_dim=cfg.latent_dim)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    taskvae.save_vae(vae, out / "vae.ckpt")
    harness.write_curve(curve, out / "vae_curve.csv")
    acc = float(np.mean(taskvae.reconstruction_accuracy(vae, refs.tasks)))
    print(f"wrote {out / 'vae.ckpt'} (reconstruction accuracy {acc:.4f})")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, seed=args.seed, arm=args.arm, epochs=args.epochs, vae_checkpoint=args.vae, refs_manifest=args.refs)
    run = harness.train(cfg, args.out)
    final = json.loads((run / "eval_final.json").read_text())
    print(f"{cfg.arm}: held-out success {final['success_mean']:.3f} after epoch {final['epoch']} -> {run}")
    return 0


def cmd_eval(args) -> int:
    rep = harness.evaluate_run(args.run_dir, args.checkpoint)
    text = json.dumps(rep.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_export_csv(args) -> int:
    comp, trend, skipped = harness.export_csv(args.run_dirs, args.out)
    print(f"wrote {comp} and {trend}" + (f" ({skipped} malformed lines skipped)" if skipped else ""))
    return 0


COMMANDS = {
    "gen-refs": cmd_gen_refs,
    "pretrain-vae": cmd_pretrain_vae,
    "train": cmd_train,
    "eval": cmd_eval,
    "export-csv": cmd_export_csv,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"gacl: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
