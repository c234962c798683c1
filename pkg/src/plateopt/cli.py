"""Command-line entry point: dataset generation, training, prediction,
optimization, cross-validation, studies, and the design service."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import dataset as ds
from . import optim, studies
from . import surrogate as sg
from .errors import PlateOptError, UsageError
from .geometry import PlateParams, realize, reference_params
from .oracle import DEFAULT_RESOLUTION, discretize, solve_modes


def _load_params(spec: str) -> PlateParams:
    if spec == "reference":
        return reference_params()
    with open(spec) as fh:
        return PlateParams.from_json_dict(json.load(fh))


def _check_out(path: str, force: bool) -> None:
    if os.path.exists(path) and not force:
        raise UsageError(f"{path} exists; pass --force to overwrite")


def _loss_spec_from_args(args, model: sg.SurrogateModel | None) -> optim.LossSpec:
    f_ref = None
    if args.loss in ("spectrum_mean_abs", "mean_shift"):
        if args.f_ref:
            f_ref = np.asarray(json.loads(args.f_ref), dtype=float)
        elif model is not None:
            f_ref = sg.predict(model, reference_params())
        else:
            raise UsageError("loss needs --f-ref or a model to derive it")
    try:
        return optim.LossSpec(
            kind=args.loss,
            alpha=args.alpha,
            beta=args.beta,
            mode_index=args.mode,
            f_ref=f_ref,
        )
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_gen_dataset(args) -> int:
    _check_out(args.out, args.force)
    cfg = ds.GenConfig(
        n=args.n,
        sigma_outline=args.sigma_outline if args.sigma_outline is not None else args.sigma,
        sigma_thickness=args.sigma_thickness if args.sigma_thickness is not None else args.sigma,
        sigma_material=args.sigma_material if args.sigma_material is not None else args.sigma,
        seed=args.seed,
        resolution=args.resolution,
        workers=args.workers,
    )
    samples = ds.generate(cfg=cfg)
    if len(samples) >= 10:  # smoke-test sized sets stay unsplit
        ds.split(samples, seed=args.split_seed if args.split_seed is not None else args.seed + 1)
    samples.save(args.out)
    print(json.dumps({"written": args.out, "n": len(samples), **samples.meta}))
    return 0


def cmd_train(args) -> int:
    samples = ds.SampleSet.load(args.dataset)
    cfg = sg.TrainConfig(
        hidden_width=args.hidden_width, max_epochs=args.max_epochs, seed=args.seed
    )
    model = sg.train(samples, cfg)
    r2 = model.fit_report["r2_test_aggregate"]
    if r2 <= sg.R2_GATE and not args.allow_ungated:
        print(
            f"error: GateFailed: test R^2 {r2:.4f} is not above {sg.R2_GATE}",
            file=sys.stderr,
        )
        return 3
    _check_out(args.out, args.force)
    model.save(args.out)
    print(json.dumps({"written": args.out, "r2_test_aggregate": r2,
                      "epochs": model.fit_report["epochs"]}))
    return 0


def cmd_predict(args) -> int:
    model = sg.SurrogateModel.load(args.model)
    params = _load_params(args.params)
    freqs = sg.predict(model, params)
    print(json.dumps({
        "freqs_hz": freqs.tolist(),
        "f52": optim.f52(freqs),
        "in_training_box": model.in_training_box(params.to_vector()),
    }))
    return 0


def cmd_optimize(args) -> int:
    model = sg.SurrogateModel.load(args.model)
    spec = _loss_spec_from_args(args, model)
    start = _load_params(args.start)
    free = [f.strip() for f in args.free.split(",")]
    run = optim.optimize_design(model, spec, start, free,
                                gate_override=args.allow_ungated)
    out = run.to_json_dict()
    out["best_params"] = run.best_params.to_json_dict()
    if args.out:
        _check_out(args.out, args.force)
        with open(args.out, "w") as fh:
            json.dump(out, fh)
    print(json.dumps({
        "best_loss": run.best_loss,
        "n_evals": run.n_evals,
        "budget": run.budget,
        "status": run.status,
        "predicted_freqs": run.predicted_freqs.tolist(),
    }))
    return 0


def cmd_cross_validate(args) -> int:
    with open(args.run) as fh:
        d = json.load(fh)
    run = optim.OptimizationRun(
        free_idx=np.asarray(d["free_idx"], dtype=int),
        start=np.asarray(d["start"]),
        lo=np.asarray(d["lo"]),
        hi=np.asarray(d["hi"]),
        budget=d["budget"],
        best_x=np.asarray(d["best_x"]),
        best_loss=d["best_loss"],
        predicted_freqs=np.asarray(d["predicted_freqs"]),
    )
    ref = ds.default_reference()
    print(json.dumps(optim.cross_validate(run, ref, args.resolution)))
    return 0


def cmd_study(args) -> int:
    model = sg.SurrogateModel.load(args.model)
    ref = ds.default_reference()
    name = args.name.replace("-", "_")
    if name == "ratio":
        rep = studies.study_ratio(model, ref, resolution=args.resolution)
    elif name == "single_modes":
        rep = studies.study_single_modes(model, ref)
    elif name == "equivalence":
        rep = studies.study_equivalence(
            model, ref, replicates=args.replicates, seed=args.seed
        )
    elif name == "material":
        rep = studies.study_material(
            model, ref, replicates=args.replicates, seed=args.seed
        )
    elif name == "grid":
        rep = studies.study_density_modulus_grid(
            model, ref, oracle_resolution=args.resolution
        )
    else:
        raise UsageError(f"unknown study {args.name!r}")
    outdir = os.path.join(args.outdir, rep.study)
    path = rep.save(outdir)
    print(json.dumps({"written": path, **{
        k: v for k, v in rep.aggregates.items()
        if isinstance(v, (int, float, bool, type(None)))
    }}))
    return 0


def cmd_solve(args) -> int:
    params = _load_params(args.params)
    ref = ds.default_reference()
    modal = solve_modes(discretize(realize(params, ref), args.resolution))
    print(json.dumps(modal.to_json_dict()))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model = sg.SurrogateModel.load(args.model)
    app = create_app(model, ds.default_reference())
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plateopt")
    p.add_argument("--config", help="JSON file with flag defaults")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-dataset", help="sample designs and label with the oracle")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=3000)
    g.add_argument("--sigma", type=float, default=0.05)
    g.add_argument("--sigma-outline", type=float)
    g.add_argument("--sigma-thickness", type=float)
    g.add_argument("--sigma-material", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--split-seed", type=int)
    g.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION)
    g.add_argument("--workers", type=int, default=0)
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=cmd_gen_dataset)

    t = sub.add_parser("train", help="fit the surrogate network")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--hidden-width", type=int, default=30)
    t.add_argument("--max-epochs", type=int, default=80)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--allow-ungated", action="store_true")
    t.add_argument("--force", action="store_true")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="surrogate prediction for a design")
    pr.add_argument("--model", required=True)
    pr.add_argument("--params", default="reference")
    pr.set_defaults(func=cmd_predict)

    o = sub.add_parser("optimize", help="bounded Nelder-Mead on the surrogate")
    o.add_argument("--model", required=True)
    o.add_argument("--loss", choices=optim.LOSS_KINDS, required=True)
    o.add_argument("--alpha", type=float)
    o.add_argument("--beta", type=float)
    o.add_argument("--mode", type=int)
    o.add_argument("--f-ref", help="JSON list of 10 target frequencies")
    o.add_argument("--start", default="reference")
    o.add_argument("--free", default="outline",
                   help="comma-separated families or indices")
    o.add_argument("--out")
    o.add_argument("--allow-ungated", action="store_true")
    o.add_argument("--force", action="store_true")
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("cross-validate", help="oracle check of an optimized design")
    c.add_argument("--run", required=True)
    c.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION)
    c.set_defaults(func=cmd_cross_validate)

    st = sub.add_parser("study", help="run a scripted study")
    st.add_argument("name",
                    choices=["ratio", "single-modes", "single_modes",
                             "equivalence", "material", "grid"])
    st.add_argument("--model", required=True)
    st.add_argument("--outdir", default="results")
    st.add_argument("--replicates", type=int, default=20)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION)
    st.set_defaults(func=cmd_study)

    sv = sub.add_parser("solve", help="oracle eigensolve for a design")
    sv.add_argument("--params", default="reference")
    sv.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION)
    sv.set_defaults(func=cmd_solve)

    se = sub.add_parser("serve", help="start the design HTTP service")
    se.add_argument("--model", required=True)
    se.add_argument("--host", default="127.0.0.1")
    se.add_argument("--port", type=int, default=8410)
    se.set_defaults(func=cmd_serve)
    return p


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    # precedence: flags > config file > built-in defaults
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        with open(cfg_path) as fh:
            overrides = json.load(fh)
        parser.set_defaults(**overrides)
        # subparser defaults shadow the parent's, so push them down too
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                for subparser in action.choices.values():
                    subparser.set_defaults(**overrides)
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: UsageError: {exc}", file=sys.stderr)
        return 2
    except PlateOptError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
