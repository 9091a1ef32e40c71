"""Command-line entry point: ``claslab <subcommand> [flags]``.

Every subcommand writes its artifacts atomically (temporary files renamed into
place on success, removed on failure) together with a JSON run manifest that
records the resolved configuration and the sha256 of every input and output.

Option precedence: command-line flags, then keys of the ``--config`` JSON file
(keys are flag names with dashes replaced by underscores), then defaults.
Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, svg
from .analysis import alignment_vs_gain, cosine_to_anchor, default_layer, embed_many, project
from .corpus import (
    DEFAULT_CLASSIFY_TEMPLATE,
    DEFAULT_SPAN_TEMPLATE,
    load_classify_samples,
    load_parallel_corpus,
    load_span_samples,
    write_rejections,
)
from .errors import ClasError, DegenerateInputError
from .evaluation import (
    DEFAULT_ALPHAS,
    DEFAULT_BETAS,
    DEFAULT_DEV_SIZE,
    DEFAULT_GAMMAS,
    MAX_NEW_TOKENS,
    EvalReport,
    LabelSet,
    dev_test_split,
    eval_classify,
    eval_span,
    grid_search,
)
from .model import ModelConfig, ModelWeights, gen_toy_model
from .neurons import KIND_NAMES, ActivationStats, CategoryTable, LayerCategoryDistribution, categorize, collect_stats
from .neurons import layer_distribution, select_bridge_layers
from .profiles import llama_like_profile, qwen_like_profile
from .stattests import paired_ttest
from .steering import Steering, SteeringConfig
from .synthetic import write_corpus
from .tokenizer import ByteTokenizer, VocabTokenizer

OUT_ENV = "CLASLAB_OUT"
PROFILES = {"llama": llama_like_profile, "qwen": qwen_like_profile}


def _out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV) or "out")


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(v):
    if isinstance(v, Path):
        return v.as_posix()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


class Run:
    """Collects one command's inputs and outputs; commits or rolls back together."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.inputs: dict[str, Path] = {}
        self._pending: list[tuple[Path, Path]] = []
        self.manifest: Path | None = None

    def input(self, role: str, path: str | Path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"{role} file not found: {p}")
        self.inputs[role] = p
        return p

    def output(self, path: str | Path, primary: bool = False) -> Path:
        final = Path(path)
        tmp = final.with_name(f".{final.name}.partial")
        self._pending.append((tmp, final))
        if primary or self.manifest is None:
            self.manifest = final.with_name(final.name + ".manifest.json")
        return tmp

    def write_json(self, path: str | Path, obj, primary: bool = False) -> None:
        tmp = self.output(path, primary)
        tmp.write_text(json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")

    def commit(self) -> None:
        for _, final in self._pending:
            final.parent.mkdir(parents=True, exist_ok=True)
        config = {k: _jsonable(v) for k, v in sorted(vars(self.args).items()) if k not in ("func", "config")}
        doc = {
            "tool": "claslab",
            "version": __version__,
            "command": self.command,
            "config": config,
            "inputs": {r: {"path": p.as_posix(), "sha256": _sha256(p)} for r, p in sorted(self.inputs.items())},
            "outputs": {final.as_posix(): _sha256(tmp) for tmp, final in self._pending},
        }
        if self.manifest is not None:
            mtmp = self.manifest.with_name(f".{self.manifest.name}.partial")
            mtmp.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
            self._pending.append((mtmp, self.manifest))
        for tmp, final in self._pending:
            os.replace(tmp, final)

    def abort(self) -> None:
        for tmp, _ in self._pending:
            tmp.unlink(missing_ok=True)


def execute(command: str, fn: Callable[[argparse.Namespace, Run], None], args: argparse.Namespace) -> None:
    run = Run(command, args)
    try:
        fn(args, run)
        for tmp, _ in run._pending:
            tmp.parent.mkdir(parents=True, exist_ok=True)
        run.commit()
    except BaseException:
        run.abort()
        raise


def _prepare(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _sibling(path: str | Path, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _load_model(args, run: Run) -> ModelWeights:
    return ModelWeights.load(run.input("model", args.model))


def _tokenizer(args, run: Run, model: ModelWeights):
    vocab = getattr(args, "vocab_file", None)
    if vocab:
        return VocabTokenizer.from_file(run.input("vocab", vocab))
    return ByteTokenizer(model.config.vocab_size, model.config.eos_token)


def _languages(spec: str) -> list[str]:
    langs = [s.strip() for s in spec.split(",") if s.strip()]
    if not langs:
        raise ValueError("--languages needs at least one code")
    return langs


def _steering(args, run: Run) -> Steering | None:
    if args.steering in (None, "off"):
        return None
    config = SteeringConfig.load(run.input("steering", args.steering))
    if getattr(args, "bridge", None):
        doc = json.loads(run.input("bridge", args.bridge).read_text(encoding="utf-8"))
        config = replace(config, bridge_layers=tuple(doc["layers"]))
    if not args.categories:
        raise ValueError("--categories is required when steering is on")
    return Steering(config, CategoryTable.load(run.input("categories", args.categories)))


# -- subcommands -------------------------------------------------------------


def cmd_gen_toy(args, run: Run) -> None:
    cfg = ModelConfig(args.layers, args.dim, args.ff, args.heads, vocab_size=args.vocab, max_seq_len=args.max_seq_len)
    gen_toy_model(args.seed, cfg, proj_std=args.init_std).save(_prepare(run.output(args.out, primary=True)))


def cmd_synth_corpus(args, run: Run) -> None:
    out = Path(args.out_dir)
    tmpdir = out / ".partial"
    paths = write_corpus(tmpdir, args.n, args.seed)
    for p in paths:
        os.replace(p, run.output(out / p.name, primary=p.name == "parallel.jsonl"))
    tmpdir.rmdir()


def cmd_stats(args, run: Run) -> None:
    model = _load_model(args, run)
    tok = _tokenizer(args, run, model)
    corpus = load_parallel_corpus(run.input("corpus", args.corpus), _languages(args.languages), args.limit)
    stats = collect_stats(model, corpus, tok, signed=args.signed, workers=args.workers)
    stats.save(_prepare(run.output(args.out, primary=True)))
    write_rejections(corpus.rejections, run.output(args.rejections or _sibling(args.out, "_rejections.jsonl")))


def cmd_categorize(args, run: Run) -> None:
    stats = ActivationStats.load(run.input("stats", args.stats))
    if args.t_act_quantile is not None:
        if not 0.0 <= args.t_act_quantile <= 1.0:
            raise ValueError("--t-act-quantile must lie in [0, 1]")
        t_act = float(np.quantile(stats.mean_act.astype(np.float64), args.t_act_quantile))
    else:
        t_act = args.t_act
    table = categorize(stats, t_act)
    table.save(_prepare(run.output(args.out, primary=True)))
    dist = layer_distribution(table)
    dist.to_csv(run.output(_sibling(args.out, "_distribution.csv")))
    svg.stacked_bars(run.output(_sibling(args.out, "_distribution.svg")), dist.fractions, KIND_NAMES,
                     f"neuron categories per layer (T_act={t_act:.4g})")


def cmd_bridge(args, run: Run) -> None:
    if args.categories:
        dist = layer_distribution(CategoryTable.load(run.input("categories", args.categories)))
    elif args.distribution:
        dist = LayerCategoryDistribution.from_csv(run.input("distribution", args.distribution))
    else:
        dist = PROFILES[args.profile]()
    layers = select_bridge_layers(dist, args.window, args.exclude_tail, args.min_layer)
    run.write_json(_prepare(Path(args.out)), {
        "layers": list(layers),
        "window": args.window,
        "exclude_tail": args.exclude_tail,
        "min_layer": dist.n_layers // 2 if args.min_layer is None else args.min_layer,
        "n_layers": dist.n_layers,
    }, primary=True)
    svg.stacked_bars(run.output(_sibling(args.out, ".svg")), dist.fractions, KIND_NAMES,
                     f"bridge layers {layers[0]}-{layers[-1]}", highlight=layers)


def cmd_configure(args, run: Run) -> None:
    table = CategoryTable.load(run.input("categories", args.categories))
    if args.bridge:
        layers = json.loads(run.input("bridge", args.bridge).read_text(encoding="utf-8"))["layers"]
    elif args.layers:
        layers = args.layers
    else:
        raise ValueError("give --bridge FILE or --layers")
    config = SteeringConfig(table.languages, args.anchor, tuple(layers), table.t_act, args.beta, args.gamma, args.alpha,
                            args.spec_scope)
    Steering(config, table)  # validates masks and layer range
    run.write_json(_prepare(Path(args.out)), config.to_dict(), primary=True)


def _task_samples(args, run: Run):
    path = run.input("data", args.data)
    samples = load_classify_samples(path) if args.task == "classify" else load_span_samples(path)
    if getattr(args, "languages", None):
        keep = set(_languages(args.languages))
        samples = [s for s in samples if s.lang in keep]
    return samples


def _template(args) -> str:
    if args.template:
        return args.template
    return DEFAULT_CLASSIFY_TEMPLATE if args.task == "classify" else DEFAULT_SPAN_TEMPLATE


def cmd_eval(args, run: Run) -> None:
    model = _load_model(args, run)
    tok = _tokenizer(args, run, model)
    steering = _steering(args, run)
    samples = _task_samples(args, run)
    if args.split != "all":
        dev, test = dev_test_split(samples, args.dev_size)
        samples = dev if args.split == "dev" else test
    if args.limit is not None:
        samples, _ = dev_test_split(samples, args.limit)
    if args.task == "classify":
        report = eval_classify(model, samples, LabelSet.from_strings(tok), tok, _template(args), steering)
    else:
        report = eval_span(model, samples, tok, _template(args), steering, max_new=args.max_new)
    report.to_json(_prepare(run.output(args.out, primary=True)))
    report.to_csv(run.output(_sibling(args.out, ".csv")))


def cmd_grid(args, run: Run) -> None:
    model = _load_model(args, run)
    tok = _tokenizer(args, run, model)
    steering = _steering(args, run)
    if steering is None:
        raise ValueError("grid search needs --steering FILE")
    samples = _task_samples(args, run)
    res = grid_search(model, samples, steering, tok, args.task, args.alphas, args.betas, args.gammas, args.dev_size,
                      args.template or None)
    res.to_csv(_prepare(run.output(args.out, primary=True)))
    summary = res.to_dict()
    summary["task"] = args.task
    run.write_json(_sibling(args.out, ".json"), summary)
    a, b, g = res.best
    run.write_json(_sibling(args.out, "_best.json"), steering.config.with_coefficients(a, b, g).to_dict())
    rows = [f"beta={b!r} gamma={g!r}" for b in res.betas for g in res.gammas]
    vals = [[res.cells[(a, b, g)] - res.baseline for a in res.alphas] for b in res.betas for g in res.gammas]
    svg.grid(run.output(_sibling(args.out, ".svg")), rows, [f"alpha={a!r}" for a in res.alphas], vals,
             f"{args.task}: metric minus baseline ({res.baseline:.4f})")


def _per_sample_scores(report: EvalReport) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for d in report.details:
        score = d["f1"] if "f1" in d else float(d["pred"] == d["gold"])
        out.setdefault(d["lang"], {})[d["id"]] = score
    return out


def cmd_compare(args, run: Run) -> None:
    base = EvalReport.from_json(run.input("baseline", args.baseline))
    steered = EvalReport.from_json(run.input("steered", args.steered))
    if base.task != steered.task:
        raise ValueError("reports come from different tasks")
    bs, ss = _per_sample_scores(base), _per_sample_scores(steered)
    langs = {}
    for lang in base.results:
        if lang not in steered.results:
            raise KeyError(f"language {lang!r} missing from the steered report")
        ids = sorted(bs[lang])
        if ids != sorted(ss[lang]):
            raise KeyError(f"reports for {lang!r} cover different samples")
        entry = {
            "baseline": base.metric(lang),
            "steered": steered.metric(lang),
            "delta": steered.metric(lang) - base.metric(lang),
            "n": len(ids),
        }
        try:
            t = paired_ttest([ss[lang][i] for i in ids], [bs[lang][i] for i in ids])
            entry["ttest"] = {"t": t.t, "p": t.p, "df": t.df}
        except DegenerateInputError as exc:
            entry["ttest"] = {"error": str(exc)}
        langs[lang] = entry
    doc = {"task": base.task, "anchor": args.anchor, "languages": langs}
    # across languages: one (steered, baseline) metric pair per non-anchor language
    pairs = [(v["steered"], v["baseline"]) for k, v in langs.items() if k != args.anchor]
    try:
        t = paired_ttest([a for a, _ in pairs], [b for _, b in pairs])
        doc["ttest_languages"] = {"t": t.t, "p": t.p, "df": t.df}
    except (DegenerateInputError, ValueError) as exc:
        doc["ttest_languages"] = {"error": str(exc)}
    run.write_json(_prepare(Path(args.out)), doc, primary=True)


def cmd_analyze(args, run: Run) -> None:
    model = _load_model(args, run)
    tok = _tokenizer(args, run, model)
    steering = _steering(args, run)
    if steering is None:
        raise ValueError("analysis compares baseline and steered runs; give --steering FILE")
    corpus = load_parallel_corpus(run.input("corpus", args.corpus), _languages(args.languages), args.limit)
    anchor = steering.config.anchor
    cos_layers = tuple(args.layers) if args.layers else steering.config.bridge_layers
    emb_layer = default_layer(model) if args.embed_layer is None else args.embed_layer
    layers = sorted(set(cos_layers) | {emb_layer})
    before = embed_many(model, tok, corpus, layers, None, args.pool, args.workers)
    after = embed_many(model, tok, corpus, layers, steering, args.pool, args.workers)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = out / args.run_id
    report = cosine_to_anchor(before, after, anchor, cos_layers)
    report.to_csv(run.output(f"{prefix}_alignment.csv"))
    report.plot(run.output(f"{prefix}_alignment.svg"))
    summary = {
        "anchor": anchor,
        "cosine_layers": list(cos_layers),
        "embedding_layer": emb_layer,
        "pool": args.pool,
        "alignment": {k: {"before": report.before[k], "after": report.after[k], "delta": report.delta[k]}
                      for k in report.before},
    }
    if args.comparison:
        cmp_doc = json.loads(run.input("comparison", args.comparison).read_text(encoding="utf-8"))
        metric_delta = {k: v["delta"] for k, v in cmp_doc["languages"].items()}
        try:
            fit = alignment_vs_gain(report.delta, metric_delta, anchor)
        except DegenerateInputError as exc:
            summary["fit"] = {"error": str(exc)}
        else:
            summary["fit"] = fit.to_dict()
            fit.to_csv(run.output(f"{prefix}_scatter.csv"))
            fit.plot(run.output(f"{prefix}_scatter.svg"))
    for name, emb in (("baseline", before), ("steered", after)):
        proj = project(emb[emb_layer], args.perplexity, args.tsne_iter, args.seed)
        proj.to_csv(run.output(f"{prefix}_tsne_{name}.csv"))
        proj.plot(run.output(f"{prefix}_tsne_{name}.svg"), f"t-SNE layer {emb_layer} ({name})")
        summary[f"tsne_{name}"] = {"kl_initial": proj.result.kl_initial, "kl_final": proj.result.kl_final}
    run.write_json(f"{prefix}_summary.json", summary, primary=True)


def cmd_pipeline(args, run: Run) -> None:
    """All stages on a parallel corpus plus both task files, with fixed artifact names."""
    data, out = Path(args.data_dir), Path(args.out_dir)
    ns = argparse.Namespace
    steps = [
        ("gen-toy", cmd_gen_toy, ns(seed=args.seed, layers=args.layers, dim=args.dim, ff=args.ff, heads=args.heads,
                                     vocab=258, max_seq_len=512, init_std=args.init_std, out=out / "model.clw")),
        ("stats", cmd_stats, ns(model=out / "model.clw", corpus=data / "parallel.jsonl", languages=args.languages,
                                limit=100, signed=False, workers=args.workers, vocab_file=None,
                                out=out / "stats.cls", rejections=None)),
        ("categorize", cmd_categorize, ns(stats=out / "stats.cls", t_act=0.0, t_act_quantile=args.t_act_quantile,
                                          out=out / "categories.json")),
        ("bridge", cmd_bridge, ns(categories=out / "categories.json", distribution=None, profile=None,
                                  window=args.window, exclude_tail=2, min_layer=None, out=out / "bridge.json")),
        ("configure", cmd_configure, ns(categories=out / "categories.json", bridge=out / "bridge.json", layers=None,
                                        anchor=args.anchor, alpha=1.0, beta=0.4, gamma=0.2, spec_scope="union",
                                        out=out / "steering.json")),
    ]
    common = dict(model=out / "model.clw", categories=out / "categories.json", bridge=None, vocab_file=None,
                  template="", languages=None)
    steps.append(("grid", cmd_grid, ns(**common, task="classify", data=data / "classify.jsonl",
                                       steering=out / "steering.json", dev_size=args.dev_size,
                                       alphas=list(DEFAULT_ALPHAS), betas=list(DEFAULT_BETAS),
                                       gammas=list(DEFAULT_GAMMAS), out=out / "grid_classify.csv")))
    for task, limit in (("classify", None), ("span", args.span_limit)):
        for name, st in (("baseline", "off"), ("steered", out / "grid_classify_best.json")):
            steps.append(("eval", cmd_eval, ns(**common, task=task, data=data / f"{task}.jsonl", steering=st,
                                               split="test", dev_size=args.dev_size, limit=limit,
                                               max_new=MAX_NEW_TOKENS, out=out / f"eval_{task}_{name}.json")))
        steps.append(("compare", cmd_compare, ns(baseline=out / f"eval_{task}_baseline.json",
                                                 steered=out / f"eval_{task}_steered.json", anchor=args.anchor,
                                                 out=out / f"compare_{task}.json")))
    steps.append(("analyze", cmd_analyze, ns(**{**common, "languages": args.languages},
                                             corpus=data / "parallel.jsonl", steering=out / "grid_classify_best.json",
                                             comparison=out / "compare_classify.json", limit=None, layers=None,
                                             embed_layer=None, pool="mean", perplexity=30.0, tsne_iter=args.tsne_iter,
                                             seed=0, workers=args.workers, out_dir=out, run_id="analysis")))
    done = []
    for name, fn, step_args in steps:
        print(f"[pipeline] {name} -> {getattr(step_args, 'out', None) or step_args.out_dir}", file=sys.stderr)
        execute(name, fn, step_args)
        done.append(name)
    run.write_json(out / "pipeline.json", {"steps": done}, primary=True)


# -- argument parsing --------------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="claslab", description="Cross-lingual activation steering on toy SwiGLU transformers.")
    parser.add_argument("--version", action="version", version=f"claslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    subs: dict[str, argparse.ArgumentParser] = {}
    default = _out_dir()

    def add(name: str, fn, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="JSON file of option values (flags take precedence)")
        p.set_defaults(func=fn)
        subs[name] = p
        return p

    def model_opts(p):
        p.add_argument("--model", required=True, help="weight file from gen-toy")
        p.add_argument("--vocab-file", help="JSON vocabulary (default: byte tokenizer)")

    def steer_opts(p, default_off=True):
        p.add_argument("--steering", default="off" if default_off else None, required=not default_off,
                       help="steering config JSON, or 'off'")
        p.add_argument("--categories", help="category table (required when steering is on)")
        p.add_argument("--bridge", help="bridge JSON overriding the config's layers")

    p = add("gen-toy", cmd_gen_toy, "generate a seeded random toy model")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--layers", type=int, default=8)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--ff", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--vocab", type=int, default=258)
    p.add_argument("--max-seq-len", type=int, default=512)
    p.add_argument("--init-std", type=float, default=None, help="projection weight std (default 0.02/sqrt(layers))")
    p.add_argument("--out", default=default / "model.clw")

    p = add("synth-corpus", cmd_synth_corpus, "write the synthetic en/de/fr corpus")
    p.add_argument("--out-dir", default="data/synthetic")
    p.add_argument("--n", type=int, default=120)
    p.add_argument("--seed", type=int, default=0)

    p = add("stats", cmd_stats, "collect per-language mean MLP activations")
    model_opts(p)
    p.add_argument("--corpus", required=True, help="parallel JSONL corpus")
    p.add_argument("--languages", required=True, help="comma-separated language codes")
    p.add_argument("--limit", type=int, default=100, help="first N complete samples (default 100)")
    p.add_argument("--signed", action="store_true", help="average signed values instead of magnitudes")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--rejections", help="rejected-sample report (default: next to --out)")
    p.add_argument("--out", default=default / "stats.cls")

    p = add("categorize", cmd_categorize, "assign neuron categories from activation statistics")
    p.add_argument("--stats", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--t-act", type=float, default=0.0, help="activation threshold")
    g.add_argument("--t-act-quantile", type=float, help="threshold as a quantile of all mean activations")
    p.add_argument("--out", default=default / "categories.json")

    p = add("bridge", cmd_bridge, "select the bridge-layer window")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--categories")
    g.add_argument("--distribution", help="per-layer distribution CSV")
    g.add_argument("--profile", choices=sorted(PROFILES), help="built-in synthetic profile")
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--exclude-tail", type=int, default=2)
    p.add_argument("--min-layer", type=int)
    p.add_argument("--out", default=default / "bridge.json")

    p = add("configure", cmd_configure, "write a steering config bound to a category table")
    p.add_argument("--categories", required=True)
    p.add_argument("--bridge", help="bridge JSON")
    p.add_argument("--layers", type=int, nargs="+")
    p.add_argument("--anchor", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.4)
    p.add_argument("--gamma", type=float, default=0.2)
    p.add_argument("--spec-scope", choices=("union", "per-language"), default="union")
    p.add_argument("--out", default=default / "steering.json")

    def task_opts(p):
        p.add_argument("--task", choices=("classify", "span"), required=True)
        p.add_argument("--data", required=True, help="task JSONL file")
        p.add_argument("--languages", help="restrict to these comma-separated codes")
        p.add_argument("--template", default="", help="prompt template (default per task)")
        p.add_argument("--dev-size", type=int, default=DEFAULT_DEV_SIZE)

    p = add("eval", cmd_eval, "evaluate one task with or without steering")
    model_opts(p)
    steer_opts(p)
    task_opts(p)
    p.add_argument("--split", choices=("all", "dev", "test"), default="all")
    p.add_argument("--limit", type=int, help="first N samples per language after the split")
    p.add_argument("--max-new", type=int, default=MAX_NEW_TOKENS)
    p.add_argument("--out", default=default / "report.json")

    p = add("grid", cmd_grid, "grid-search alpha, beta and gamma on the dev slice")
    model_opts(p)
    steer_opts(p, default_off=False)
    task_opts(p)
    p.add_argument("--alphas", type=float, nargs="+", default=list(DEFAULT_ALPHAS))
    p.add_argument("--betas", type=float, nargs="+", default=list(DEFAULT_BETAS))
    p.add_argument("--gammas", type=float, nargs="+", default=list(DEFAULT_GAMMAS))
    p.add_argument("--out", default=default / "grid.csv")

    p = add("compare", cmd_compare, "per-language deltas and paired t-tests between two reports")
    p.add_argument("--baseline", required=True)
    p.add_argument("--steered", required=True)
    p.add_argument("--anchor", help="language left out of the across-language t-test")
    p.add_argument("--out", default=default / "compare.json")

    p = add("analyze", cmd_analyze, "cosine alignment, regression and t-SNE of embeddings")
    model_opts(p)
    steer_opts(p, default_off=False)
    p.add_argument("--corpus", required=True)
    p.add_argument("--languages", required=True)
    p.add_argument("--comparison", help="compare JSON supplying metric deltas")
    p.add_argument("--limit", type=int)
    p.add_argument("--layers", type=int, nargs="+", help="cosine layers (default: bridge layers)")
    p.add_argument("--embed-layer", type=int, help="t-SNE layer (default: penultimate)")
    p.add_argument("--pool", choices=("mean", "last"), default="mean")
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--tsne-iter", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default=default)
    p.add_argument("--run-id", default="analysis", help="prefix for artifact names")

    p = add("pipeline", cmd_pipeline, "run every stage end to end")
    p.add_argument("--data-dir", default="data/synthetic")
    p.add_argument("--out-dir", default=default)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--languages", default="en,de,fr")
    p.add_argument("--anchor", default="en")
    p.add_argument("--layers", type=int, default=8)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--ff", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--init-std", type=float, default=0.2)
    p.add_argument("--t-act-quantile", type=float, default=0.5)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--dev-size", type=int, default=40)
    p.add_argument("--span-limit", type=int, default=8)
    p.add_argument("--tsne-iter", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    return parser, subs


def _apply_config(parser: argparse.ArgumentParser, subs: dict, argv: list[str]) -> None:
    """Turn ``--config`` file values into defaults of the chosen subcommand."""
    if not argv or argv[0] not in subs:
        return
    sp = subs[argv[0]]
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return
    try:
        values = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        sp.error(f"cannot read --config {path}: {exc}")
    if not isinstance(values, dict):
        sp.error("--config must hold a JSON object")
    actions = {a.dest: a for a in sp._actions}
    unknown = sorted(set(values) - set(actions) - {"config"})
    if unknown:
        sp.error(f"unknown keys in --config: {', '.join(unknown)}")
    for key, value in values.items():
        if key in actions:
            actions[key].default = value
            actions[key].required = False
    for group in sp._mutually_exclusive_groups:
        if any(a.dest in values for a in group._group_actions):
            group.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    _apply_config(parser, subs, argv)
    args = parser.parse_args(argv)
    fn = args.func
    try:
        execute(args.command, fn, args)
    except (ClasError, ValueError, KeyError, OSError, FloatingPointError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"claslab {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
