"""Command-line entry point wiring the pipeline stages with file handoffs.

Each stage reads/writes EMB1 artifacts plus a JSON sidecar embedding the
config hash that produced the file; downstream stages refuse mismatched
hash chains unless ``--force``. Exit codes: 0 success, 1 verification or
stage failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, PipelineConfig, get_preset, load_config
from .dataio import FeatureMatrix, flatten_pixels, load_image_set, read_emb1, write_emb1
from .distill import DistillConfig, distill, split
from .errors import ConfigInvalid, MissingArtifact, QksvmError, StageFailure
from .featuremap import CircuitConfig, build_feature_map
from .kernel import (
    gram_cross,
    gram_train,
    load_gram,
    min_eigenvalue,
    save_gram,
)
from .reduce import AngleScaler, pca_fit, pca_transform, scale_angles
from .svm import SvmParams, load_model, predict, save_model, train_multiclass
from . import evaluate as ev
from . import sv, tn


def _sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def _write_sidecar(path, stage: str, params: dict, inputs: dict[str, str]) -> str:
    doc = {"stage": stage, "params": params, "inputs": inputs}
    h = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]
    doc["config_hash"] = h
    _sidecar_path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))
    return h


def _input_hash(path) -> str:
    """Sidecar config hash when present, else a content hash of the file."""
    side = _sidecar_path(path)
    if side.exists():
        return json.loads(side.read_text()).get("config_hash", "")
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _sidecar_inputs(path) -> dict:
    side = _sidecar_path(path)
    if side.exists():
        return json.loads(side.read_text()).get("inputs", {})
    return {}


def _require(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingArtifact(f"{what} {p} does not exist")
    return p


def _parse_range(text: str) -> tuple[float, float]:
    """Parse 'lo..hi' with 'pi' arithmetic, e.g. '-pi..pi' or '0..pi/2'."""
    def num(tok: str) -> float:
        tok = tok.strip().replace("pi", repr(math.pi))
        return float(eval(tok, {"__builtins__": {}}, {}))  # noqa: S307 - closed grammar

    lo, hi = text.split("..")
    return num(lo), num(hi)


# subcommand bodies ----------------------------------------------------------

def _cmd_distill(args) -> int:
    if args.dataset:
        cfg = PipelineConfig(dataset=args.dataset, data_dir=args.data_dir)
        images, labels = cfg.dataset_paths()
        feats = flatten_pixels(load_image_set(_require(images, "images"),
                                              _require(labels, "labels"),
                                              args.dataset))
        in_hash = f"idx:{args.dataset}"
    else:
        feats = read_emb1(_require(args.infile, "input features"))
        in_hash = _input_hash(args.infile)
    ds = distill(feats, DistillConfig(k_per_class=args.k, seed=args.seed))
    if args.emit_indices:
        order = np.concatenate([ds.indices[int(c)] for c in sorted(ds.indices)])
        Path(args.emit_indices).write_text(
            json.dumps({"indices": order.tolist()})
        )
    if args.train_frac:
        train, test = split(ds, args.train_frac, args.split_seed)
        write_emb1(train, args.out)
        stem = Path(args.out)
        test_path = stem.with_name(stem.stem + "-test" + stem.suffix)
        write_emb1(test, test_path)
        params = {"k": args.k, "seed": args.seed, "train_frac": args.train_frac,
                  "split_seed": args.split_seed}
        h = _write_sidecar(args.out, "distill", params, {"features": in_hash})
        _write_sidecar(test_path, "distill-test", params, {"features": in_hash})
        print(f"wrote {args.out} ({train.rows} rows) and {test_path} "
              f"({test.rows} rows), hash {h}")
    else:
        write_emb1(ds.features, args.out)
        h = _write_sidecar(args.out, "distill", {"k": args.k, "seed": args.seed},
                           {"features": in_hash})
        print(f"wrote {args.out} ({ds.n_samples} rows), hash {h}")
    return 0


def _reducer_hash(*paths) -> str:
    """Content hash of the pca/scaler files a reduce run fit or applied."""
    h = hashlib.sha256()
    for p in paths:
        if p:
            h.update(Path(p).read_bytes())
    return h.hexdigest()[:16] if any(paths) else ""


def _cmd_reduce(args) -> int:
    feats = read_emb1(_require(args.infile, "input features"))
    in_hash = _input_hash(args.infile)
    lo, hi = _parse_range(args.range)
    params = {"dim": args.dim, "range": [lo, hi]}
    if args.fit:
        out_feats = feats
        if args.dim:
            pca = pca_fit(feats, args.dim)
            out_feats = pca_transform(pca, feats)
            if args.model:
                np.savez(args.model, mean=pca.mean, components=pca.components,
                         explained_variance=pca.explained_variance)
        scaler = AngleScaler(lo=lo, hi=hi, mode=args.scaler_mode).fit(out_feats)
        if args.scaler:
            np.savez(args.scaler, lo=scaler.lo, hi=scaler.hi,
                     feat_min=scaler.feat_min, feat_max=scaler.feat_max)
        out_feats = scale_angles(scaler, out_feats)
    else:
        if not args.model and not args.scaler:
            raise ConfigInvalid("--no-fit requires --model and/or --scaler")
        out_feats = feats
        if args.model:
            m = np.load(_require(args.model, "pca model"))
            from .reduce import PcaModel

            pca = PcaModel(mean=m["mean"], components=m["components"],
                           explained_variance=m["explained_variance"])
            out_feats = pca_transform(pca, out_feats)
        if args.scaler:
            s = np.load(_require(args.scaler, "angle scaler"))
            scaler = AngleScaler(lo=float(s["lo"]), hi=float(s["hi"]),
                                 feat_min=s["feat_min"], feat_max=s["feat_max"])
            out_feats = scale_angles(scaler, out_feats)
    params["reducer_hash"] = _reducer_hash(args.model, args.scaler)
    write_emb1(out_feats, args.out)
    h = _write_sidecar(args.out, "reduce", params, {"features": in_hash})
    print(f"wrote {args.out} ({out_feats.rows}x{out_feats.cols}), hash {h}")
    return 0


def _cmd_gram(args) -> int:
    train_feats = read_emb1(_require(args.infile, "train features"))
    train_hash = _input_hash(args.infile)
    cfg = CircuitConfig(n_qubits=args.qubits)
    if args.cross:
        test_feats = read_emb1(_require(args.cross, "test features"))
        test_hash = _input_hash(args.cross)

        def reducer_of(path) -> str:
            side = _sidecar_path(path)
            if not side.exists():
                return ""
            return json.loads(side.read_text()).get("params", {}).get("reducer_hash", "")

        r_train, r_test = reducer_of(args.infile), reducer_of(args.cross)
        if r_train and r_test and r_train != r_test and not args.force:
            raise ConfigInvalid(
                "train and test features went through different fitted reducers "
                f"({r_train} vs {r_test}); rerun the pipeline or pass --force"
            )
        g = gram_cross(test_feats, train_feats, cfg, backend=args.backend,
                       threads=args.threads)
        save_gram(g, args.out)
        h = _write_sidecar(args.out, "gram-cross",
                           {"qubits": args.qubits, "backend": args.backend},
                           {"train_features": train_hash, "test_features": test_hash})
    else:
        g = gram_train(train_feats, cfg, backend=args.backend, threads=args.threads)
        save_gram(g, args.out)
        h = _write_sidecar(args.out, "gram",
                           {"qubits": args.qubits, "backend": args.backend},
                           {"features": train_hash})
    print(f"wrote {args.out} {g.shape}, hash {h}")
    return 0


def _cmd_train(args) -> int:
    gram = load_gram(_require(args.gram, "gram matrix"))
    gram_hash = _input_hash(args.gram)
    feats = read_emb1(_require(args.labels, "labeled features"))
    feats_hash = _input_hash(args.labels)
    if feats.labels is None:
        raise ConfigInvalid(f"{args.labels} carries no labels")
    recorded = _sidecar_inputs(args.gram).get("features", "")
    if recorded and recorded != feats_hash and not args.force:
        raise ConfigInvalid(
            f"gram was computed from features {recorded}, got {feats_hash}; "
            "pass --force to override"
        )
    model = train_multiclass(gram, feats.labels,
                             SvmParams(C=args.c, tol_kkt=args.tol))
    model.kernel_hash = gram_hash
    save_model(model, args.out)
    doc = json.loads(Path(args.out).read_text())
    doc["features_hash"] = feats_hash
    Path(args.out).write_text(json.dumps(doc, indent=2))
    print(f"wrote {args.out}: {len(model.pairs)} pair models on "
          f"{model.n_train} samples")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(_require(args.model, "model"))
    doc = json.loads(Path(args.model).read_text())
    cross = load_gram(_require(args.cross, "cross gram"))
    feats = read_emb1(_require(args.labels, "labeled test features"))
    if feats.labels is None:
        raise ConfigInvalid(f"{args.labels} carries no labels")
    recorded_train = _sidecar_inputs(args.cross).get("train_features", "")
    model_feats = doc.get("features_hash", "")
    if recorded_train and model_feats and recorded_train != model_feats and not args.force:
        raise ConfigInvalid(
            "cross gram and model were built from different training features; "
            "pass --force to override"
        )
    y_pred, scores = predict(model, cross)
    m = ev.compute_metrics(feats.labels, y_pred, scores, model.classes)
    out = {
        "accuracy": m.accuracy,
        "precision_macro": m.precision_macro,
        "f1_macro": m.f1_macro,
        "auc_macro": m.auc_macro,
        "confusion": m.confusion.tolist(),
    }
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def _cmd_benchmark(args) -> int:
    if args.config:
        cfg = load_config(_require(args.config, "config file"))
    elif args.preset:
        cfg = get_preset(args.preset)
    else:
        raise ConfigInvalid("benchmark needs --preset or --config")
    overrides = {}
    for field in ("k_per_class", "n_qubits", "backend", "threads", "feature_file",
                  "data_dir", "out_dir", "cv_k"):
        v = getattr(args, field, None)
        if v not in (None, ""):
            overrides[field] = v
    if args.strict:
        overrides["strict"] = True
    if args.angle_range:
        overrides["angle_lo"], overrides["angle_hi"] = _parse_range(args.angle_range)
    cfg = replace(cfg, **overrides)
    result = ev.run_benchmark(cfg)
    if result.advantage:
        print(
            f"{cfg.dataset}/{cfg.label}: classical "
            f"{result.advantage.classical_accuracy:.4f}, quantum "
            f"{result.advantage.quantum_accuracy:.4f}, advantage "
            f"{result.advantage.advantage_pct:+.2f}%"
        )
    print(f"reports in {Path(cfg.out_dir).resolve()}")
    return 0


def _cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    n = args.qubits
    cfg = CircuitConfig(n_qubits=n)
    d = 3 * n
    worst = 0.0
    for _ in range(args.trials):
        x = rng.uniform(-math.pi, math.pi, d)
        y = rng.uniform(-math.pi, math.pi, d)
        cx, cy = build_feature_map(x, cfg), build_feature_map(y, cfg)
        k_sv = sv.fidelity(sv.simulate(cx), sv.simulate(cy))
        k_tn = tn.kernel_value(cx, cy)
        worst = max(worst, abs(k_sv - k_tn))
    ok_equiv = worst <= args.tol
    print(f"backend equivalence: worst |sv - tn| = {worst:.3e} "
          f"({'ok' if ok_equiv else 'VIOLATION'} at tol {args.tol:g})")

    X = rng.uniform(-math.pi, math.pi, (args.psd_samples, d))
    g = gram_train(X, cfg, backend="sv")
    K = g.values
    sym = float(np.abs(K - K.T).max())
    diag = float(np.abs(np.diag(K) - 1.0).max())
    mineig = min_eigenvalue(K)
    ok_psd = sym <= 1e-9 and diag <= 1e-9 and mineig >= -1e-7
    print(f"gram validity: max|K-Kᵀ|={sym:.1e} max|diag-1|={diag:.1e} "
          f"min eig={mineig:.3e} ({'ok' if ok_psd else 'VIOLATION'})")
    return 0 if (ok_equiv and ok_psd) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qksvm",
        description="Quantum-kernel SVM pipeline: distill, reduce, gram, train, "
                    "evaluate, benchmark, verify.",
    )
    p.add_argument("--version", action="version", version=f"qksvm {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("distill", help="class-balanced k-means prototype selection")
    d.add_argument("--in", dest="infile", help="input EMB1 with labels")
    d.add_argument("--dataset", choices=["mnist", "fmnist"],
                   help="flatten IDX pixels instead of reading EMB1")
    d.add_argument("--data-dir", default=PipelineConfig().data_dir)
    d.add_argument("--k", type=int, default=200)
    d.add_argument("--seed", type=int, default=7)
    d.add_argument("--train-frac", type=float, default=0.0,
                   help="also emit a stratified train/test split")
    d.add_argument("--split-seed", type=int, default=11)
    d.add_argument("--emit-indices",
                   help="write selected original row indices as JSON "
                        "(distilled order), for external feature extractors")
    d.add_argument("--out", required=True)
    d.set_defaults(func=_cmd_distill)

    r = sub.add_parser("reduce", help="PCA compression + angle scaling")
    r.add_argument("--in", dest="infile", required=True)
    r.add_argument("--dim", type=int, default=0, help="PCA target dim (0 = none)")
    r.add_argument("--range", default="-pi..pi", help="angle target range lo..hi")
    r.add_argument("--scaler-mode", dest="scaler_mode", default="per-feature",
                   choices=["per-feature", "global"])
    r.add_argument("--model", help="PCA model file (.npz) to write or apply")
    r.add_argument("--scaler", help="angle scaler file (.npz) to write or apply")
    r.add_argument("--fit", dest="fit", action="store_true", default=True)
    r.add_argument("--no-fit", dest="fit", action="store_false",
                   help="apply stored --model/--scaler instead of fitting")
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_reduce)

    g = sub.add_parser("gram", help="fidelity-kernel Gram matrix")
    g.add_argument("--in", dest="infile", required=True, help="train features EMB1")
    g.add_argument("--cross", help="test features EMB1 (rectangular Gram)")
    g.add_argument("--qubits", type=int, default=16)
    g.add_argument("--backend", choices=["sv", "tn"], default="sv")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--force", action="store_true")
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gram)

    t = sub.add_parser("train", help="one-vs-one SMO on a precomputed Gram")
    t.add_argument("--gram", required=True)
    t.add_argument("--labels", required=True, help="EMB1 whose labels align with the Gram")
    t.add_argument("--c", type=float, default=1.0)
    t.add_argument("--tol", type=float, default=1e-3)
    t.add_argument("--force", action="store_true")
    t.add_argument("--out", required=True)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="score a model on a cross Gram")
    e.add_argument("--model", required=True)
    e.add_argument("--cross", required=True)
    e.add_argument("--labels", required=True)
    e.add_argument("--force", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=_cmd_evaluate)

    b = sub.add_parser("benchmark", help="full quantum-vs-classical pipeline")
    b.add_argument("--preset", choices=sorted(PRESETS))
    b.add_argument("--config", help="TOML/JSON config file")
    b.add_argument("--k-per-class", dest="k_per_class", type=int)
    b.add_argument("--n-qubits", dest="n_qubits", type=int)
    b.add_argument("--backend", choices=["sv", "tn"])
    b.add_argument("--cv-k", dest="cv_k", type=int)
    b.add_argument("--threads", type=int)
    b.add_argument("--feature-file", dest="feature_file")
    b.add_argument("--data-dir", dest="data_dir")
    b.add_argument("--angle-range", dest="angle_range", help="override lo..hi")
    b.add_argument("--strict", action="store_true",
                   help="single-threaded, byte-reproducible outputs")
    b.add_argument("--out", dest="out_dir")
    b.set_defaults(func=_cmd_benchmark)

    v = sub.add_parser("verify", help="backend-equivalence and PSD self-checks")
    v.add_argument("--qubits", type=int, default=4)
    v.add_argument("--trials", type=int, default=50)
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--psd-samples", type=int, default=40)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors already; pass through
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigInvalid, MissingArtifact) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except QksvmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
