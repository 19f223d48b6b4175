"""Command-line entry point for the full pipeline."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .automaton import BuildConfig, build_automaton
from .baselines import Bm25Index, bm25_retrieve, retrieve_random
from .corpus import load_corpus, save_corpus, split_corpus
from .evaluation import EvalReport, RetrievalOutcome, expected_random_precision, retrieval_precision
from .merging import merge_automaton
from .persistence import decode_automaton, encode_automaton, export_dot
from .routing import CannedGenerator, EchoGenerator, Session, chat_step, navigate, retrieve_exemplars
from .tagging import RoundTagTable, TaggerConfig, make_tagger, tag_corpus

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _load_tagger(args: argparse.Namespace):
    if args.tagger == "keyword":
        if not args.lexicon:
            raise UsageError("--lexicon is required with the keyword tagger")
        lexicon = json.loads(Path(args.lexicon).read_text(encoding="utf-8"))
        config = TaggerConfig(kind="keyword", lexicon=lexicon, max_tags_per_utterance=args.max_tags)
    else:
        config = TaggerConfig(kind="llm", max_tags_per_utterance=args.max_tags)
    return make_tagger(config)


def _load_generator(args: argparse.Namespace):
    if args.generator == "canned":
        if not args.canned:
            raise UsageError("--canned is required with the canned generator")
        return CannedGenerator.from_file(args.canned)
    return EchoGenerator()


def _load_automaton(path: str):
    return decode_automaton(Path(path).read_bytes())


def build_parser() -> _Parser:
    parser = _Parser(prog="dfarag", description="Dialogue-flow automaton router")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and validate a dialogue dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jsonl", "plain-transcript"], default="jsonl")
    p.add_argument("--out", required=True)
    p.add_argument("--test-fraction", type=float, default=0.0)
    p.add_argument("--test-out")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("tag", help="tag a corpus into a round table")
    p.add_argument("--corpus", required=True)
    p.add_argument("--tagger", choices=["keyword", "llm"], default="keyword")
    p.add_argument("--lexicon")
    p.add_argument("--max-tags", type=int, default=4)
    p.add_argument("--skip-errors", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("build", help="build the automaton from a tag table")
    p.add_argument("--tags", required=True)
    p.add_argument("--tau", type=int, default=5)
    p.add_argument("--merge-lambda", type=float, default=0.1)
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-merge", action="store_true")
    p.add_argument("--merge-report")
    p.add_argument("--out", required=True)

    p = sub.add_parser("merge", help="merge similar states of an existing automaton")
    p.add_argument("--dfa", required=True)
    p.add_argument("--merge-lambda", type=float)
    p.add_argument("--merge-report")
    p.add_argument("--out", required=True)

    p = sub.add_parser("export", help="export an automaton")
    p.add_argument("--dfa", required=True)
    p.add_argument("--format", choices=["dot", "json"], default="dot")
    p.add_argument("--max-depth", type=int)
    p.add_argument("--min-dialogues", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("route", help="route a single utterance")
    p.add_argument("--dfa", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--tagger", choices=["keyword", "llm"], default="keyword")
    p.add_argument("--lexicon")
    p.add_argument("--max-tags", type=int, default=4)
    p.add_argument("--exemplar-k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true")

    p = sub.add_parser("chat", help="chat through the router (interactive or scripted)")
    p.add_argument("--dfa", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--tagger", choices=["keyword", "llm"], default="keyword")
    p.add_argument("--lexicon")
    p.add_argument("--max-tags", type=int, default=4)
    p.add_argument("--generator", choices=["canned", "echo"], default="echo")
    p.add_argument("--canned")
    p.add_argument("--exemplar-k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--script", help="file with one user turn per line")

    p = sub.add_parser("eval", help="retrieval-precision comparison across strategies")
    p.add_argument("--dfa", required=True)
    p.add_argument("--corpus", required=True, help="training corpus")
    p.add_argument("--tags", required=True, help="training tag table")
    p.add_argument("--test-corpus", required=True)
    p.add_argument("--tagger", choices=["keyword", "llm"], default="keyword")
    p.add_argument("--lexicon")
    p.add_argument("--max-tags", type=int, default=4)
    p.add_argument("--exemplar-k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--dfa", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--tagger", choices=["keyword", "llm"], default="keyword")
    p.add_argument("--lexicon")
    p.add_argument("--max-tags", type=int, default=4)
    p.add_argument("--generator", choices=["canned", "echo"], default="echo")
    p.add_argument("--canned")
    p.add_argument("--exemplar-k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--ui-dir")

    return parser


def _cmd_ingest(args) -> int:
    corpus = load_corpus(args.input, format=args.format)
    if args.test_fraction > 0:
        train, test = split_corpus(corpus, args.test_fraction, args.seed)
        save_corpus(train, args.out)
        if args.test_out:
            save_corpus(test, args.test_out)
        print(f"ingested {len(corpus)} dialogues ({len(train)} train / {len(test)} test)")
    else:
        save_corpus(corpus, args.out)
        print(f"ingested {len(corpus)} dialogues")
    return EXIT_OK


def _cmd_tag(args) -> int:
    corpus = load_corpus(args.corpus)
    tagger = _load_tagger(args)
    table = tag_corpus(corpus, tagger, skip_errors=args.skip_errors)
    table.save(args.out)
    print(f"tagged {len(corpus)} dialogues over {table.max_round() + 1} rounds")
    return EXIT_OK


def _cmd_build(args) -> int:
    table = RoundTagTable.load(args.tags)
    config = BuildConfig(
        tau=args.tau,
        merge_lambda=args.merge_lambda,
        max_rounds=args.max_rounds,
        seed=args.seed,
    )
    automaton = build_automaton(table, config)
    if not args.no_merge:
        automaton, report = merge_automaton(automaton)
        if args.merge_report:
            Path(args.merge_report).write_text(
                json.dumps(report.to_document(), indent=2) + "\n", encoding="utf-8"
            )
    Path(args.out).write_bytes(encode_automaton(automaton))
    print(f"built automaton with {len(automaton.states)} states")
    return EXIT_OK


def _cmd_merge(args) -> int:
    automaton = _load_automaton(args.dfa)
    merged, report = merge_automaton(automaton, args.merge_lambda)
    if args.merge_report:
        Path(args.merge_report).write_text(
            json.dumps(report.to_document(), indent=2) + "\n", encoding="utf-8"
        )
    Path(args.out).write_bytes(encode_automaton(merged))
    print(f"merged {report.states_before} -> {report.states_after} states")
    return EXIT_OK


def _cmd_export(args) -> int:
    automaton = _load_automaton(args.dfa)
    if args.format == "dot":
        Path(args.out).write_text(
            export_dot(automaton, max_depth=args.max_depth, min_dialogues=args.min_dialogues),
            encoding="utf-8",
        )
    else:
        Path(args.out).write_bytes(encode_automaton(automaton))
    print(f"exported to {args.out}")
    return EXIT_OK


def _cmd_route(args) -> int:
    automaton = _load_automaton(args.dfa)
    corpus = load_corpus(args.corpus)
    tagger = _load_tagger(args)
    from .corpus import Role, Utterance

    tags = tagger.tag_utterance(Utterance(role=Role.USER, text=args.text, round=0))
    nav = navigate(automaton, automaton.start, tags)
    exemplars = retrieve_exemplars(
        automaton,
        nav.state,
        corpus,
        k=args.exemplar_k,
        seed=args.seed,
        deterministic=args.deterministic,
        path=nav.path,
    )
    print(
        json.dumps(
            {
                "tags": list(tags),
                "path": list(nav.path),
                "state": nav.state,
                "matched": nav.matched,
                "exemplar_ids": list(exemplars.dialogue_ids),
            }
        )
    )
    return EXIT_OK


def _cmd_chat(args) -> int:
    automaton = _load_automaton(args.dfa)
    corpus = load_corpus(args.corpus)
    tagger = _load_tagger(args)
    generator = _load_generator(args)
    session = Session(
        automaton=automaton,
        corpus=corpus,
        seed=args.seed,
        exemplar_k=args.exemplar_k,
        deterministic=args.deterministic,
    )
    if args.script:
        lines = Path(args.script).read_text(encoding="utf-8").splitlines()
    else:
        lines = (line.rstrip("\n") for line in sys.stdin)
    for line in lines:
        response, nav, exemplars = chat_step(session, line, tagger, generator)
        print(f"USER: {line}")
        print(f"SYSTEM: {response}")
        print(
            f"  [state={nav.state} matched={nav.matched} "
            f"exemplars={list(exemplars.dialogue_ids)}]"
        )
    return EXIT_OK


def _cmd_eval(args) -> int:
    automaton = _load_automaton(args.dfa)
    train_corpus = load_corpus(args.corpus)
    table = RoundTagTable.load(args.tags)
    test_corpus = load_corpus(args.test_corpus)
    tagger = _load_tagger(args)
    bm25 = Bm25Index.build(train_corpus)
    from .corpus import Role

    outcomes = {"dfa": [], "random": [], "bm25": []}
    for dialogue in test_corpus:
        state = automaton.start
        for utt in dialogue.utterances:
            if utt.role is not Role.USER:
                continue
            tags = frozenset(tagger.tag_utterance(utt))
            if not tags:
                continue
            nav = navigate(automaton, state, tags)
            state = nav.state
            dfa_ids = retrieve_exemplars(
                automaton, nav.state, train_corpus, k=args.exemplar_k,
                seed=args.seed, path=nav.path,
            ).dialogue_ids
            rand_ids = tuple(retrieve_random(train_corpus, args.exemplar_k, args.seed + dialogue.id))
            bm_ids = tuple(i for i, _ in bm25_retrieve(bm25, utt.text, args.exemplar_k))
            for name, ids in (("dfa", dfa_ids), ("random", rand_ids), ("bm25", bm_ids)):
                if ids:
                    outcomes[name].append(
                        RetrievalOutcome(
                            exemplar_ids=ids, round=utt.round, role=Role.USER, test_tags=tags
                        )
                    )
    report = EvalReport(win_rate=None, seed=args.seed, judge_id="none")
    for name, outs in outcomes.items():
        if outs:
            report.retrieval_precision[name] = retrieval_precision(outs, table)
    if outcomes["dfa"]:
        report.retrieval_precision["random_expected"] = expected_random_precision(
            outcomes["dfa"], table, train_corpus.ids()
        )
    document = report.to_document()
    text = json.dumps(document, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    automaton = _load_automaton(args.dfa)
    corpus = load_corpus(args.corpus)
    tagger = _load_tagger(args)
    generator = _load_generator(args)
    app = create_app(
        automaton,
        corpus,
        tagger,
        generator,
        seed=args.seed,
        exemplar_k=args.exemplar_k,
        ui_dir=args.ui_dir,
    )
    uvicorn.run(app, host="0.0.0.0", port=args.port)
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "tag": _cmd_tag,
    "build": _cmd_build,
    "merge": _cmd_merge,
    "export": _cmd_export,
    "route": _cmd_route,
    "chat": _cmd_chat,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())
