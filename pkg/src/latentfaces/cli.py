"""Command-line pipeline driver.

Stages mirror the experiment flow: gen -> train -> pca -> enroll, then
sweep / transition / swaps produce reports, report summarizes them, and
serve exposes the HTTP API for the latent explorer. Flags override the
workspace config.json; exit codes are 0 (ok), 1 (usage), 2 (pipeline
failure).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import attack
from . import autoencoder as ae
from . import latentpca as lp
from . import manipulate as mp
from . import synthface, workspace
from .errors import LatentFacesError
from .recognition import GalleryEntry, compute_baselines

DEFAULTS = {
    "identities": 2,
    "samples": 100,
    "side": 64,
    "seed": 7,
    "epochs": 450,
    "batch_size": 200,
    "learning_rate": 0.05,
    "threshold": attack.DEFAULT_THRESHOLD,
    "gate_k": attack.DEFAULT_GATE_K,
    "steps": mp.DEFAULT_STEPS,
    "port": 8046,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="latentfaces", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--workspace", default="workspace", help="workspace directory")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--config", default=None, help="JSON config file")
        return p

    p = add("gen", "generate the synthetic labeled dataset")
    p.add_argument("--identities", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--side", type=int, default=None)

    p = add("train", "train the autoencoder on the dataset")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)

    add("pca", "fit latent PCA and write the separation report")
    add("enroll", "reconstruct the dataset, enroll it, compute baselines")

    p = add("sweep", "grid sweep over chosen principal components")
    p.add_argument("--indices", type=int, nargs="+", default=[0])
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--source", default=None, help="source sample id (default: first)")
    p.add_argument("--gate-k", type=float, default=None)

    p = add("transition", "interpolate PC1 between two class means")
    p.add_argument("--from-label", dest="from_label", default="id00")
    p.add_argument("--to-label", dest="to_label", default="id01")
    p.add_argument("--steps", type=int, default=None)

    p = add("swaps", "swap components one at a time from a reference sample")
    p.add_argument("--original", required=True, help="original sample id")
    p.add_argument("--reference", required=True, help="reference sample id")

    p = add("report", "summarize a stored experiment report")
    p.add_argument("--run-id", default=None, help="default: most recent report")

    p = add("serve", "start the HTTP API for the latent explorer")
    p.add_argument("--port", type=int, default=None)

    return parser


def _settings(args) -> dict:
    """Defaults <- config file <- explicit flags."""
    ws = workspace.open_workspace(args.workspace)
    merged = dict(DEFAULTS)
    merged.update(workspace.load_config(ws, args.config))
    for key in merged:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    if getattr(args, "seed", None) is not None:
        merged["seed"] = args.seed
    return merged


def cmd_gen(args) -> int:
    cfg = _settings(args)
    ws = workspace.open_workspace(args.workspace)
    samples = synthface.gen_dataset(
        num_identities=cfg["identities"],
        samples_per_identity=cfg["samples"],
        side=cfg["side"],
        seed=cfg["seed"],
    )
    synthface.save_dataset(samples, ws.dataset_dir)
    print(f"wrote {len(samples)} images to {ws.dataset_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = _settings(args)
    ws = workspace.open_workspace(args.workspace)
    dataset = workspace.load_dataset_artifacts(ws)
    side = dataset[0].image.side
    model = ae.init_model(side, seed=cfg["seed"])
    train_cfg = ae.TrainConfig(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        learning_rate=cfg["learning_rate"],
        seed=cfg["seed"],
    )
    model, history = ae.train(model, [s.image for s in dataset], train_cfg)
    ws.models_dir.mkdir(parents=True, exist_ok=True)
    ae.save_model(model, ws.autoencoder_path)
    with open(ws.history_path, "w") as fh:
        json.dump({"loss": history}, fh)
        fh.write("\n")
    print(f"trained {train_cfg.epochs} epochs, final loss {history[-1]:.6f}")
    print(f"wrote {ws.autoencoder_path}")
    return 0


def cmd_pca(args) -> int:
    ws = workspace.open_workspace(args.workspace)
    dataset = workspace.load_dataset_artifacts(ws)
    model = workspace.load_autoencoder(ws)
    latents = ae.encode_many(model, [s.image for s in dataset])
    pca = lp.fit(latents)
    lp.save_pca(pca, ws.pca_path)

    coords = lp.transform_many(pca, latents)
    by_label: dict = {}
    for s, c in zip(dataset, coords):
        by_label.setdefault(s.label, []).append(c)
    labels = sorted(by_label)
    reports = lp.separation_pairwise({k: np.stack(v) for k, v in by_label.items()})
    ws.reports_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "pairs": [
            {"labels": list(pair), **rep.to_dict()} for pair, rep in sorted(reports.items())
        ]
    }
    with open(ws.separation_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    best = payload["pairs"][0]
    print(f"wrote {ws.pca_path}")
    print(
        f"separation {labels[0]}/{labels[1]}: top component "
        f"{best['argmax_component']} ratio {max(best['fisher_ratios']):.2f}"
    )
    return 0


def cmd_enroll(args) -> int:
    ws = workspace.open_workspace(args.workspace)
    dataset = workspace.load_dataset_artifacts(ws)
    model = workspace.load_autoencoder(ws)
    entries = [
        GalleryEntry(s.sample_id, s.label, ae.reconstruct(model, s.image))
        for s in dataset
    ]
    workspace.save_gallery(ws, entries)
    from .recognition import enroll as enroll_sim

    sim = enroll_sim(entries)
    baselines = compute_baselines(sim, entries)
    workspace.save_baselines(ws, baselines)
    intra = [st["mean"] for (a, b), st in baselines.similarity.items() if a == b]
    inter = [st["mean"] for (a, b), st in baselines.similarity.items() if a != b]
    print(f"enrolled {len(entries)} reconstructed images")
    print(
        f"baseline similarity: intra-label means {[round(v, 2) for v in sorted(intra)]}, "
        f"inter-label means {[round(v, 2) for v in sorted(inter)]}"
    )
    return 0


def _run_strategy(args, strategy) -> int:
    cfg = _settings(args)
    ws = workspace.open_workspace(args.workspace)
    dataset = workspace.load_dataset_artifacts(ws)
    model = workspace.load_autoencoder(ws)
    pca = workspace.load_pca(ws)
    sim = workspace.load_enrolled(ws)
    baselines = workspace.load_baselines(ws)

    ws.reports_dir.mkdir(parents=True, exist_ok=True)
    run_id = attack.run_id_for(strategy.describe())
    jsonl_path = ws.reports_dir / f"records-{run_id}.jsonl"
    with open(jsonl_path, "w") as stream:

        def sink(record: dict):
            stream.write(json.dumps(record, sort_keys=True))
            stream.write("\n")

        report = attack.run_experiment(
            dataset,
            model,
            pca,
            sim,
            strategy,
            baselines,
            threshold=cfg["threshold"],
            gate_k=cfg["gate_k"],
            record_sink=sink,
        )
    path = workspace.save_report(ws, report)
    print(f"wrote {path}")
    print(json.dumps(report.summary, indent=2, sort_keys=True))
    hits = attack.find_attacks(report)
    if hits:
        print(f"attacks found: {len(hits)} (best: {hits[0].candidate_id})")
    else:
        print("attacks found: 0")
    return 0


def cmd_sweep(args) -> int:
    cfg = _settings(args)
    strategy = attack.SweepStrategy(
        indices=list(args.indices),
        steps=cfg["steps"],
        source_sample=args.source,
    )
    if args.gate_k is not None:
        args.__dict__["gate_k"] = args.gate_k
    return _run_strategy(args, strategy)


def cmd_transition(args) -> int:
    cfg = _settings(args)
    strategy = attack.TransitionStrategy(
        from_label=args.from_label,
        to_label=args.to_label,
        steps=cfg["steps"],
    )
    return _run_strategy(args, strategy)


def cmd_swaps(args) -> int:
    strategy = attack.SwapsStrategy(
        original_sample=args.original,
        reference_sample=args.reference,
    )
    return _run_strategy(args, strategy)


def cmd_report(args) -> int:
    ws = workspace.open_workspace(args.workspace)
    run_id = args.run_id
    if run_id is None:
        runs = workspace.list_reports(ws)
        if not runs:
            raise LatentFacesError(f"no reports in {ws.reports_dir}")
        run_id = runs[-1]
    data = workspace.load_report_dict(ws, run_id)
    print(f"run {data['run_id']} ({data['created_at']})")
    print(json.dumps(data["summary"], indent=2, sort_keys=True))
    hits = [
        r
        for r in data["records"]
        if r["outcome"]
        and r["outcome"]["quality_pass"]
        and (r["outcome"]["dodging"] or r["outcome"]["impersonated_labels"])
    ]
    for r in hits[:10]:
        o = r["outcome"]
        sims = ", ".join(f"{k}={v:.1f}" for k, v in sorted(o["mean_similarity"].items()))
        kinds = []
        if o["dodging"]:
            kinds.append("dodging")
        if o["impersonated_labels"]:
            kinds.append("impersonates " + ",".join(o["impersonated_labels"]))
        print(f"  {r['candidate_id']}: {' + '.join(kinds)} ({sims})")
    return 0


def cmd_serve(args) -> int:
    cfg = _settings(args)
    import uvicorn

    from .server import create_app

    ws = workspace.open_workspace(args.workspace)
    app = create_app(ws)
    if app.state.load_error is not None:
        raise LatentFacesError(app.state.load_error)
    uvicorn.run(app, host="127.0.0.1", port=cfg["port"], log_level="warning")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "pca": cmd_pca,
    "enroll": cmd_enroll,
    "sweep": cmd_sweep,
    "transition": cmd_transition,
    "swaps": cmd_swaps,
    "report": cmd_report,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except LatentFacesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
