"""Command-line client for the catorder service.

Each subcommand reads its local inputs, builds a JSON request, and posts it
to the HTTP API: in-process against the bundled app by default, or to a
running server given ``--server http://host:port``.  Results print as
aligned text on stdout; ``--out FILE`` additionally stores the raw JSON
response.  Usage errors exit with code 2, computation errors with code 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import httpx

from . import __version__
from .errors import CatorderError
from .io import (
    dataset_from_payload,
    dataset_to_csv_text,
    ingest_csv,
    dataset_to_payload,
    read_json,
    read_theta_file,
    render_manifest,
    write_theta_file,
)
from .model import Theta


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    # In-process ASGI call: same HTTP surface, no socket or running server.
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service.app import app

    return TestClient(app, raise_server_exceptions=False)


def _post(args, path: str, payload: dict) -> dict:
    with _client(args.server) as client:
        resp = client.post(path, json=payload)
    if resp.status_code >= 400:
        try:
            doc = resp.json()
            msg = f"{doc.get('error', 'Error')}: {doc.get('message', resp.text)}"
        except ValueError:
            msg = resp.text
        raise CatorderError(msg)
    return resp.json()


def _write_out(args, doc: dict) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")


def _order_arg(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated order: {text!r}")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",")] if text else []


def _load_dataset_payload(args) -> dict:
    if args.data == "police":  # bundled table
        from .io import police_dataset

        return dataset_to_payload(police_dataset())
    responses = args.y.split(",") if getattr(args, "y", None) else None
    dataset = ingest_csv(args.data, response_columns=responses)
    return dataset_to_payload(dataset)


def _model_payload(args) -> dict:
    shared = _int_list(args.ppo_shared) if getattr(args, "ppo_shared", None) else None
    return {"family": args.family, "odds": args.odds, "shared": shared}


def _fmt(value, width=10, digits=4) -> str:
    if value is None:
        return "NA".rjust(width)
    return f"{value:.{digits}f}".rjust(width)


def cmd_fit(args) -> int:
    req = {
        "dataset": _load_dataset_payload(args),
        "model": _model_payload(args),
        "order": _order_arg(args.order),
    }
    doc = _post(args, "/fit", req)
    print(f"order      : ({', '.join(doc['order_labels'])})")
    print(f"loglik     : {doc['loglik']:.6f}")
    print(f"aic        : {doc['aic']:.4f}   (with multinomial coefficient: {doc['aic_full']:.4f})")
    print(f"bic        : {doc['bic']:.4f}")
    print(f"converged  : {doc['converged']}   iterations: {doc['iterations']}   max|score|: {doc['gradient_norm']:.2e}")
    print(f"feasible   : {doc['feasible']}   separation_suspected: {doc['separation_suspected']}")
    for j, block in enumerate(doc["theta"]["beta"], start=1):
        print(f"beta_{j}     : " + "  ".join(f"{v: .4f}" for v in block))
    if doc["theta"]["zeta"]:
        print("zeta       : " + "  ".join(f"{v: .4f}" for v in doc["theta"]["zeta"]))
    _write_out(args, doc)
    return 0


def cmd_search(args) -> int:
    dataset_payload = _load_dataset_payload(args)
    if args.all_models:
        doc = _post(args, "/search/all", {"dataset": dataset_payload, "workers": args.workers})
        print(f"{'model':26s} {'AIC':>10s} {'AIC(full)':>10s}  best order")
        for row in doc["rows"]:
            name = f"{row['family']} {row['odds']}"
            print(f"{name:26s} {_fmt(row['aic'])} {_fmt(row['aic_full'])}  {row['description']}"
                  + ("" if row["available"] else f"  [{row['failure']}]"))
        _write_out(args, doc)
        return 0
    if not args.family or not args.odds:
        raise CatorderError("search needs --family and --odds (or --all-models)")
    req = {"dataset": dataset_payload, "model": _model_payload(args), "workers": args.workers}
    doc = _post(args, "/search", req)
    print(f"{doc['family']} {doc['odds']}: {doc['n_orders']} orders in {doc['n_classes']} classes (rule: {doc['rule']})")
    print(f"{'rank':>4s} {'representative':16s} {'members':>7s} {'loglik':>12s} {'AIC':>10s} {'gap':>8s}  flags")
    for c in doc["classes"]:
        flags = []
        if c["error"]:
            flags.append("failed")
        else:
            if c["feasible"] is False:
                flags.append("infeasible")
            if c["converged"] is False:
                flags.append("non-converged")
            if c["separation_suspected"]:
                flags.append("separation")
        rep = ",".join(str(v) for v in c["representative"])
        ll = "NA".rjust(12) if c["loglik"] is None else f"{c['loglik']:.4f}".rjust(12)
        print(f"{c['rank']:4d} {rep:16s} {len(c['members']):7d} {ll} {_fmt(c['aic'])} {_fmt(c['aic_gap'], 8, 2)}  {' '.join(flags)}")
    _write_out(args, doc)
    return 0


def cmd_classes(args) -> int:
    req = {"family": args.family, "odds": args.odds, "n_categories": args.J}
    doc = _post(args, "/classes", req)
    n = doc["n_classes"]
    print(f"{doc['family']} {doc['odds']} J={args.J}: {n} class{'es' if n != 1 else ''} "
          f"of {doc['n_orders']} orders (rule: {doc['rule']})")
    for c in doc["classes"]:
        members = "  ".join(",".join(str(v) for v in m) for m in c["members"])
        print(f"  [{','.join(str(v) for v in c['representative'])}] -> {members}")
    _write_out(args, doc)
    return 0


def cmd_transform(args) -> int:
    spec, theta = read_theta_file(args.theta)
    if args.family and args.family != spec.family:
        raise CatorderError(f"--family {args.family} disagrees with theta file ({spec.family})")
    if args.odds and args.odds != spec.odds:
        raise CatorderError(f"--odds {args.odds} disagrees with theta file ({spec.odds})")
    req = {
        "model": {"family": spec.family, "odds": spec.odds,
                  "shared": list(spec.shared) if spec.odds == "ppo" else None},
        "n_categories": spec.n_categories,
        "n_covariates": spec.n_covariates,
        "theta": {"beta": [b.tolist() for b in theta.beta], "zeta": theta.zeta.tolist()},
        "from_order": _order_arg(getattr(args, "from")),
        "to_order": _order_arg(args.to),
    }
    doc = _post(args, "/transform", req)
    for j, block in enumerate(doc["theta"]["beta"], start=1):
        print(f"beta_{j} : " + "  ".join(f"{v: .10g}" for v in block))
    if doc["theta"]["zeta"]:
        print("zeta   : " + "  ".join(f"{v: .10g}" for v in doc["theta"]["zeta"]))
    if args.out:
        theta2 = Theta(tuple(doc["theta"]["beta"]), doc["theta"]["zeta"])
        write_theta_file(args.out, spec, theta2)
    return 0


def cmd_simulate(args) -> int:
    plan = read_json(args.plan)
    doc = _post(args, "/simulate", {"plan": plan, "seed": args.seed, "replicate": args.replicate})
    text = dataset_to_csv_text(dataset_from_payload(doc["dataset"]))
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    print(render_manifest(doc["manifest"]), file=sys.stderr)
    return 0


def cmd_experiment(args) -> int:
    plan = read_json(args.plan)
    req = {"plan": plan, "seed": args.seed, "replicate": args.replicate}
    if args.fit_family and args.fit_odds:
        req["fit_model"] = {"family": args.fit_family, "odds": args.fit_odds, "shared": None}
    doc = _post(args, "/experiment", req)
    print(render_manifest(doc["manifest"]))
    print(f"AIC(true order) : {doc['aic_true']:.4f}")
    print(f"rank            : {doc['rank']} of {doc['n_classes']} classes")
    print(f"AIC(best order) : {doc['aic_best']:.4f}")
    print(f"gap             : {doc['gap']:.4f}")
    best = " | ".join(",".join(str(v) for v in m) for m in doc["best_orders"])
    print(f"best orders     : {best}")
    _write_out(args, doc)
    return 0


def cmd_cv(args) -> int:
    req = {
        "dataset": _load_dataset_payload(args),
        "model": _model_payload(args),
        "order": _order_arg(args.order),
        "repetitions": args.reps,
        "train_fraction": args.train_fraction,
        "seed": args.seed,
    }
    doc = _post(args, "/cv", req)
    print(render_manifest(doc["manifest"]))
    print(f"splits          : {doc['n_train']} train / {doc['n_test']} test")
    print(f"representative  : {','.join(str(v) for v in doc['representative'])}")
    print(f"mean loss       : {doc['mean_loss']:.6f}")
    losses = ["NA" if v is None else f"{v:.6f}" for v in doc["losses"]]
    print("losses          : " + " ".join(losses))
    _write_out(args, doc)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("catorder.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catorder",
        description="Category-order selection for multinomial logit models.",
    )
    parser.add_argument("--version", action="version", version=f"catorder {__version__}")
    parser.add_argument("--server", help="remote service URL (default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    families = ["baseline", "cumulative", "adjacent", "continuation"]
    odds = ["po", "npo", "ppo"]

    def data_flags(p):
        p.add_argument(
            "--data", required=True,
            help="wide count table (CSV/TSV), or 'police' for the bundled dataset",
        )
        p.add_argument("--y", help="comma-separated response column names (default: y1..yJ)")

    def model_flags(p, required=True):
        p.add_argument("--family", choices=families, required=required)
        p.add_argument("--odds", choices=odds, required=required)
        p.add_argument("--ppo-shared", help="comma-separated shared covariate indices (ppo)")

    p = sub.add_parser("fit", help="fit one model at a fixed category order")
    data_flags(p)
    model_flags(p)
    p.add_argument("--order", required=True, help="1-based order, e.g. 2,1,3,4")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("search", help="rank all category orders by AIC")
    data_flags(p)
    model_flags(p, required=False)
    p.add_argument("--all-models", action="store_true", help="scan the eight po/npo models")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("classes", help="show order-equivalence classes")
    model_flags(p)
    p.add_argument("--J", type=int, required=True, help="number of response categories")
    p.add_argument("--out")
    p.set_defaults(func=cmd_classes)

    p = sub.add_parser("transform", help="map parameters between equivalent orders")
    model_flags(p, required=False)
    p.add_argument("--theta", required=True, help="theta JSON file (see fit --out)")
    p.add_argument("--from", required=True, help="source order, e.g. 1,2,3,4")
    p.add_argument("--to", required=True, help="target order, e.g. 1,2,4,3")
    p.add_argument("--out", help="write the transformed theta file here")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("simulate", help="draw a dataset from a simulation plan")
    p.add_argument("--plan", required=True, help="plan JSON file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--out", help="write the dataset CSV here (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="simulate once and rank the true order")
    p.add_argument("--plan", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--fit-family", choices=families)
    p.add_argument("--fit-odds", choices=odds)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("cv", help="cross-validated cross-entropy loss for one order")
    data_flags(p)
    model_flags(p)
    p.add_argument("--order", required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--train-fraction", type=float, default=2.0 / 3.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CatorderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except httpx.HTTPError as exc:
        print(f"error: cannot reach the service: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
