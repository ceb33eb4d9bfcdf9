"""Command-line entry point: build resources, type mentions, evaluate.

Subcommands:
    build-index      corpus -> inverted word-concept index
    build-priors     corpus -> surface prior TSV
    build-reps       corpus -> concept centroid store
    type             query lines (file or stdin) -> prediction lines
    evaluate         gold + prediction files -> metrics report
    coverage         gold queries -> type coverage per candidate cutoff
    baseline-elmonn  nearest-neighbor-over-type-centroids baseline

A TOML config file (flat keys named after the long flags, with underscores)
may supply any value; command-line flags win. TYPEGROUND_CONFIG sets the
default config path.

Exit codes: 0 success, 1 usage error, 2 input validation error,
3 runtime failure. Diagnostics go to stderr, one line each.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .corpus import (
    CorpusParseError,
    CorpusValidationError,
    load_concept_types,
    load_corpus,
    load_queries,
    parse_queries,
)
from .encoder import (
    FallbackEncoder,
    PrecomputedVectorBackend,
    VectorFormatError,
    build_concept_reps,
    load_concept_reps,
    rerank,
    save_concept_reps,
)
from .esa import IndexFormatError, build_esa_index, esa_candidates, load_esa_index, save_esa_index
from .inference import InferenceParams, infer_types
from .metrics import build_type_reps, compute_report, coverage_curve, elmonn_baseline, per_type_counts
from .priors import PriorFormatError, build_priors, load_priors, save_priors
from .typedefs import TypeDefSyntaxError, parse_typedef_file

CONFIG_ENV = "TYPEGROUND_CONFIG"

_INPUT_ERRORS = (
    CorpusParseError,
    CorpusValidationError,
    TypeDefSyntaxError,
    PriorFormatError,
    IndexFormatError,
    VectorFormatError,
    FileNotFoundError,
    IsADirectoryError,
    json.JSONDecodeError,
)

_PARAM_KEYS = (
    "prior_threshold",
    "surface_fine_ratio",
    "context_fine_ratio",
    "esa_top",
    "rerank_top",
)


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit code 1, not argparse's 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="typeground", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"typeground {__version__}")
    parser.add_argument(
        "--config",
        default=os.environ.get(CONFIG_ENV),
        help=f"TOML config file (default: ${CONFIG_ENV})",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(command=name)
        return p

    p = add("build-index", "build the inverted word-concept index")
    p.add_argument("--corpus", help="corpus file (JSON lines)")
    p.add_argument("--out", help="output index path")

    p = add("build-priors", "build the surface-form prior table")
    p.add_argument("--corpus")
    p.add_argument("--out")

    p = add("build-reps", "build per-concept centroid vectors")
    p.add_argument("--corpus")
    p.add_argument("--out")
    _add_encoder_args(p)

    p = add("type", "type mentions from query lines")
    p.add_argument("--index")
    p.add_argument("--reps")
    p.add_argument("--priors")
    p.add_argument("--typedefs")
    p.add_argument("--concept-types", dest="concept_types")
    p.add_argument("--in", dest="infile", help="query file; '-' or absent reads stdin")
    p.add_argument("--out", help="prediction file; '-' or absent writes stdout")
    p.add_argument("--fallback-target", dest="fallback_target")
    _add_encoder_args(p)
    _add_param_args(p)

    p = add("evaluate", "score predictions against gold mentions")
    p.add_argument("--gold")
    p.add_argument("--pred")
    p.add_argument("--out", help="report JSON; '-' or absent writes stdout")
    p.add_argument("--table", action="store_true", help="also print an aligned text table")
    p.add_argument("--per-type", dest="per_type", help="write a per-type breakdown TSV here")

    p = add("coverage", "gold-type coverage as a function of candidate cutoff")
    p.add_argument("--queries")
    p.add_argument("--index")
    p.add_argument("--typedefs")
    p.add_argument("--concept-types", dest="concept_types")
    p.add_argument("--max-ell", dest="max_ell", type=int)
    p.add_argument("--stage", choices=["esa", "rerank"], default="esa")
    p.add_argument("--reps", help="centroid store (stage=rerank)")
    p.add_argument("--out")
    _add_encoder_args(p)

    p = add("baseline-elmonn", "nearest-neighbor type baseline")
    p.add_argument("--corpus")
    p.add_argument("--typedefs")
    p.add_argument("--concept-types", dest="concept_types")
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.add_argument("--top-k", dest="top_k", type=int)
    _add_encoder_args(p)

    return parser


def _add_encoder_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--encoder", choices=["fallback", "vectors"])
    p.add_argument("--vectors", help="vector file (encoder=vectors)")


def _add_param_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--prior-threshold", dest="prior_threshold", type=float)
    p.add_argument("--surface-fine-ratio", dest="surface_fine_ratio", type=float)
    p.add_argument("--context-fine-ratio", dest="context_fine_ratio", type=float)
    p.add_argument("--esa-top", dest="esa_top", type=int)
    p.add_argument("--rerank-top", dest="rerank_top", type=int)


class _Settings:
    """Flag values backed by config-file defaults."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = args
        self._config = config

    def get(self, key: str, default=None):
        value = getattr(self._args, key, None)
        if value is None:
            value = self._config.get(key, default)
        return value

    def require(self, key: str, flag: str | None = None):
        value = self.get(key)
        if value is None:
            raise UsageError(f"missing required option --{flag or key.replace('_', '-')}")
        return value


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"bad config {path}: {exc}") from None


def _make_backend(settings: _Settings):
    encoder = settings.get("encoder", "fallback") or "fallback"
    if encoder == "fallback":
        return FallbackEncoder()
    if encoder == "vectors":
        return PrecomputedVectorBackend.from_file(settings.require("vectors"))
    raise UsageError(f"unknown encoder {encoder!r} (use 'fallback' or 'vectors')")


def _make_params(settings: _Settings) -> InferenceParams:
    overrides = {}
    for key in _PARAM_KEYS:
        value = settings.get(key)
        if value is not None:
            overrides[key] = value
    try:
        return InferenceParams(**overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _open_in(path: str | None):
    if path in (None, "-"):
        return sys.stdin
    return open(path, encoding="utf-8")


def _open_out(path: str | None):
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _read_predictions(path: str) -> list[frozenset[str]]:
    preds: list[frozenset[str]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                raise InputError(f"{path}:{line_no}: invalid JSON") from None
            if "types" in obj:
                types = obj["types"]
            else:
                try:
                    types = list(obj["fine"]) + [obj["coarse"]]
                except (KeyError, TypeError):
                    raise InputError(f"{path}:{line_no}: no types in prediction") from None
            preds.append(frozenset(t.upper() for t in types))
    return preds


# --- subcommands --------------------------------------------------------------


def _cmd_build_index(settings: _Settings) -> int:
    corpus = load_corpus(settings.require("corpus"))
    index = build_esa_index(corpus)
    out = settings.require("out")
    save_esa_index(index, out)
    print(
        f"indexed {len(index.postings)} words over "
        f"{index.n_sentences} sentences -> {out}",
        file=sys.stderr,
    )
    return 0


def _cmd_build_priors(settings: _Settings) -> int:
    corpus = load_corpus(settings.require("corpus"))
    table = build_priors(corpus)
    out = settings.require("out")
    save_priors(table, out)
    print(f"{len(table)} surfaces -> {out}", file=sys.stderr)
    return 0


def _cmd_build_reps(settings: _Settings) -> int:
    corpus = load_corpus(settings.require("corpus"))
    backend = _make_backend(settings)
    store = build_concept_reps(backend, corpus)
    out = settings.require("out")
    save_concept_reps(store, out)
    print(f"{len(store)} concept centroids (d={store.dim}) -> {out}", file=sys.stderr)
    return 0


def _cmd_type(settings: _Settings) -> int:
    defs = parse_typedef_file(settings.require("typedefs"))
    types_table = load_concept_types(settings.require("concept_types"))
    index = load_esa_index(settings.require("index"))
    store = load_concept_reps(settings.require("reps"))
    priors_path = settings.get("priors")
    priors = load_priors(priors_path) if priors_path else None
    backend = _make_backend(settings)
    params = _make_params(settings)
    fallback_target = settings.get("fallback_target")

    with _open_in(settings.get("infile")) as fh:
        queries = parse_queries(fh)
    out = _open_out(settings.get("out"))
    try:
        for i, query in enumerate(queries):
            pred = infer_types(
                query.sentence.tokens,
                query.sentence.mention_span,
                params,
                index,
                backend,
                store,
                priors,
                defs,
                types_table,
                fallback_target=fallback_target,
                key=str(i),
            )
            out.write(json.dumps(pred.to_record(), ensure_ascii=False, separators=(",", ":")))
            out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"typed {len(queries)} mentions", file=sys.stderr)
    return 0


def _cmd_evaluate(settings: _Settings) -> int:
    golds_q = load_queries(settings.require("gold"), require_gold=True)
    golds = [q.gold_types for q in golds_q]
    preds = _read_predictions(settings.require("pred"))
    if len(golds) != len(preds):
        raise InputError(f"{len(golds)} gold mentions but {len(preds)} predictions")
    report = compute_report(golds, preds)
    out = _open_out(settings.get("out"))
    try:
        json.dump(report.to_json_dict(), out, indent=2)
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if settings.get("table"):
        print(report.format_table())
    per_type_path = settings.get("per_type")
    if per_type_path:
        with open(per_type_path, "w", encoding="utf-8") as fh:
            fh.write("type\tgold\tpredicted\tcorrect\tprecision\trecall\tf1\n")
            for t, (g, p, c) in per_type_counts(golds, preds).items():
                prec = c / p if p else 0.0
                rec = c / g if g else 0.0
                f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
                fh.write(f"{t}\t{g}\t{p}\t{c}\t{prec:.6f}\t{rec:.6f}\t{f1:.6f}\n")
    return 0


def _cmd_coverage(settings: _Settings) -> int:
    queries = load_queries(settings.require("queries"), require_gold=True)
    index = load_esa_index(settings.require("index"))
    defs = parse_typedef_file(settings.require("typedefs"))
    types_table = load_concept_types(settings.require("concept_types"))
    max_ell = settings.require("max_ell", flag="max-ell")
    stage = settings.get("stage", "esa")

    candidate_lists = []
    if stage == "rerank":
        store = load_concept_reps(settings.require("reps"))
        backend = _make_backend(settings)
    for i, q in enumerate(queries):
        cands = esa_candidates(index, q.sentence.tokens, max_ell)
        if stage == "rerank":
            cands = rerank(
                cands,
                q.sentence.tokens,
                q.sentence.mention_span,
                backend,
                store,
                max_ell,
                key=str(i),
            )
        candidate_lists.append([sc.concept for sc in cands])

    golds = [q.gold_types for q in queries]
    curve = coverage_curve(golds, candidate_lists, defs, types_table, max_ell)
    out = _open_out(settings.get("out"))
    try:
        out.write("ell\tcoverage\n")
        for ell, frac in curve:
            out.write(f"{ell}\t{frac:.6f}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_baseline_elmonn(settings: _Settings) -> int:
    corpus = load_corpus(settings.require("corpus"))
    defs = parse_typedef_file(settings.require("typedefs"))
    types_table = load_concept_types(settings.require("concept_types"))
    backend = _make_backend(settings)
    k = settings.get("top_k", 1) or 1
    type_reps = build_type_reps(backend, corpus, defs, types_table)
    if not type_reps:
        raise InputError("no type representations could be built from the corpus")
    with _open_in(settings.get("infile")) as fh:
        queries = parse_queries(fh)
    out = _open_out(settings.get("out"))
    try:
        for i, q in enumerate(queries):
            ranked = elmonn_baseline(
                q.sentence.tokens, q.sentence.mention_span, backend, type_reps, k, key=str(i)
            )
            record = {
                "types": [t for t, _ in ranked],
                "scores": [score for _, score in ranked],
            }
            out.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


_COMMANDS = {
    "build-index": _cmd_build_index,
    "build-priors": _cmd_build_priors,
    "build-reps": _cmd_build_reps,
    "type": _cmd_type,
    "evaluate": _cmd_evaluate,
    "coverage": _cmd_coverage,
    "baseline-elmonn": _cmd_baseline_elmonn,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(
                f"no command given (choose from {', '.join(sorted(_COMMANDS))})"
            )
        settings = _Settings(args, _load_config(args.config))
        return _COMMANDS[args.command](settings)
    except UsageError as exc:
        print(f"typeground: {exc}", file=sys.stderr)
        return 1
    except _INPUT_ERRORS as exc:
        print(f"typeground: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"typeground: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help/--version
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"typeground: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
