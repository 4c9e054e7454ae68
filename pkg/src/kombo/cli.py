"""Command-line entry points.

    kombo build-vocab --scheme jamo --corpus corpus.txt --out vocab.txt
    kombo tokenize --vocab vocab.txt [--decode] [--input F]
    kombo pretrain --config run.cfg
    kombo corrupt --method substitution --rate 0.2 --seed 7 [--input F]
    kombo corrupt sweep --rates 0,0.05,...,0.4 --method random_mix --seed 7 \
        --input corpus.txt --out-dir sweeps/
    kombo probe --ckpt final.ckpt --sentence S --anchors 차,찬 [--source kombo]
    kombo grad-check --config run.cfg
    kombo param-count --config run.cfg [--reference-rows 32000]
    kombo make-corpus --out corpus.txt [--bytes 1000000] [--seed 7]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import corruption, probe, toydata, training
from .config import load_config, save_config, with_vocab_size
from .hangul import UnitScheme
from .model import KomboModel, param_count, row_share
from .nn import tensor as T
from .nn.gradcheck import grad_check, jitter_params
from .nn.tensor import Rng
from .tokenizer import Vocab, build_vocab, decode, encode
from .tokenizer import TokenSequence


def _read_lines(path: str | None) -> list[str]:
    if path:
        return Path(path).read_text(encoding="utf-8").splitlines()
    return sys.stdin.read().splitlines()


def cmd_build_vocab(args) -> int:
    scheme = UnitScheme.from_label(args.scheme)

    def corpus_lines():
        with open(args.corpus, encoding="utf-8", errors="ignore") as f:
            yield from f

    vocab = build_vocab(corpus_lines(), scheme)
    vocab.save(args.out)
    print(f"wrote {args.out}: {len(vocab)} symbols ({scheme.label})")
    return 0


def cmd_tokenize(args) -> int:
    vocab = Vocab.load(args.vocab)
    for line in _read_lines(args.input):
        if args.decode:
            ids = [int(tok) for tok in line.split()]
            spans = [(i, vocab.scheme.tokens_per_char)
                     for i in range(0, len(ids), vocab.scheme.tokens_per_char)]
            result = decode(TokenSequence(ids, vocab.scheme, spans), vocab)
            suffix = f"\t# malformed spans: {result.flagged_spans}" if result.flagged_spans else ""
            print(result.text + suffix)
        else:
            seq = encode(line, vocab, max_len=args.max_len, add_cls_sep=args.add_cls_sep)
            print(" ".join(str(i) for i in seq.ids))
    return 0


def cmd_pretrain(args) -> int:
    run = load_config(args.config)

    def progress(row):
        if row.step % args.print_every == 0 or row.step == 1:
            print(f"step {row.step:6d}  mlm {row.mlm_loss:.4f}  "
                  f"nsp {row.nsp_loss:.4f}  lr {row.lr:.2e}")

    result = training.pretrain_loop(run, progress=progress)
    if result.skipped_lines:
        print(f"skipped {result.skipped_lines} undecodable corpus lines")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"loss log:   {result.log_path}")
    return 0


def cmd_corrupt(args) -> int:
    spec = corruption.TypoSpec(corruption.TypoMethod(args.method), args.rate, args.seed)
    root = Rng(args.seed)
    out = []
    for i, line in enumerate(_read_lines(args.input)):
        out.append(corruption.inject_typos(line, spec, rng=root.split(f"{args.rate!r}", i)))
    text = "\n".join(out) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_corrupt_sweep(args) -> int:
    rates = [float(r) for r in args.rates.split(",")]
    lines = _read_lines(args.input)
    result = corruption.sweep_rates(lines, corruption.TypoMethod(args.method), rates, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rate, corpus_lines in result.corpora.items():
        path = out_dir / f"rate_{int(round(rate * 100)):03d}.txt"
        path.write_text("\n".join(corpus_lines) + "\n", encoding="utf-8")
    (out_dir / "manifest.txt").write_text(result.manifest_text(), encoding="utf-8")
    print(f"wrote {len(result.corpora)} corpora and manifest to {out_dir}")
    return 0


def cmd_probe(args) -> int:
    model, run, _ = training.load_checkpoint(args.ckpt)
    vocab = Vocab.load(args.vocab or run.paths.vocab)
    source = {"static": "static_embedding", "kombo": "contextual_kombo"}[args.source]
    report = probe.probe_similarity(model, vocab, args.sentence,
                                    args.anchors.split(","), source)
    sys.stdout.write(report.to_csv())
    return 0


def cmd_grad_check(args) -> int:
    run = load_config(args.config)
    if run.paths.vocab:
        run = with_vocab_size(run, len(Vocab.load(run.paths.vocab)))
    model = KomboModel(run.model, Rng(run.seed).split("init"))
    jitter_params(model.parameters(), Rng(run.seed).split("gradcheck"))
    tpc = run.model.scheme.tokens_per_char
    n = 4 * tpc
    ids = Rng(run.seed).split("probe-ids").integers(0, run.model.vocab_size, size=(1, n))
    targets = np.full((1, n), -100)
    targets[0, :tpc] = ids[0, :tpc]

    def loss_fn():
        mlm, cls_, _ = model.losses(ids, targets, cls_labels=[1])
        return T.add(mlm, cls_)

    report = grad_check(loss_fn, model.parameters(),
                        max_coords_per_param=args.max_coords, rng=Rng(run.seed))
    for name, err in sorted(report.per_param.items(), key=lambda kv: -kv[1])[:args.show]:
        print(f"{err:.3e}  {name}")
    print(f"max relative error: {report.max_rel_err:.3e} "
          f"({'OK' if report.max_rel_err < args.tolerance else 'FAIL'} "
          f"at tolerance {args.tolerance:g})")
    return 0 if report.max_rel_err < args.tolerance else 1


def cmd_param_count(args) -> int:
    run = load_config(args.config)
    if run.paths.vocab and Path(run.paths.vocab).exists():
        run = with_vocab_size(run, len(Vocab.load(run.paths.vocab)))
    report = param_count(run.model)
    print(f"total parameters: {report.total}")
    for component, count in sorted(report.by_component.items()):
        print(f"  {component:12s} {count:10d}  ({count / report.total:.2%})")
    print(f"embedding table: {report.embedding_table} values over "
          f"{report.embedding_rows} rows ({report.embedding_share:.2%} of total)")
    share = row_share(report.embedding_rows, args.reference_rows)
    print(f"row share vs a {args.reference_rows}-row table of equal width: {share:.2%}")
    return 0


def cmd_make_corpus(args) -> int:
    path = toydata.write_toy_corpus(args.out, target_bytes=args.bytes, seed=args.seed)
    print(f"wrote {path} ({path.stat().st_size} bytes)")
    return 0


def cmd_init_config(args) -> int:
    from .config import RunConfig
    save_config(RunConfig(), args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kombo", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="build a vocabulary from a corpus")
    p.add_argument("--scheme", required=True, choices=[s.label for s in UnitScheme])
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("tokenize", help="encode lines to ids (or decode with --decode)")
    p.add_argument("--vocab", required=True)
    p.add_argument("--decode", action="store_true")
    p.add_argument("--input", help="input file; stdin when omitted")
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--add-cls-sep", action="store_true")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("pretrain", help="run the pretraining loop")
    p.add_argument("--config", required=True)
    p.add_argument("--print-every", type=int, default=50)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("corrupt", help="inject keyboard typos into text")
    p.add_argument("--method", required=True,
                   choices=[m.value for m in corruption.TypoMethod])
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", help="input file; stdin when omitted")
    p.add_argument("--out", help="output file; stdout when omitted")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("corrupt-sweep", help="corrupt a corpus at a ladder of rates")
    p.add_argument("--rates", required=True, help="comma-separated ascending rates")
    p.add_argument("--method", required=True,
                   choices=[m.value for m in corruption.TypoMethod])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_corrupt_sweep)

    p = sub.add_parser("probe", help="cosine similarity of anchor characters")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--anchors", required=True, help="comma-separated characters")
    p.add_argument("--source", choices=["static", "kombo"], default="kombo")
    p.add_argument("--vocab", help="vocab file; defaults to the checkpoint's path entry")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("grad-check", help="finite-difference check of the configured model")
    p.add_argument("--config", required=True)
    p.add_argument("--max-coords", type=int, default=4)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--show", type=int, default=5)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("param-count", help="parameter total and embedding share")
    p.add_argument("--config", required=True)
    p.add_argument("--reference-rows", type=int, default=32000)
    p.set_defaults(func=cmd_param_count)

    p = sub.add_parser("make-corpus", help="write the deterministic toy corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--bytes", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_make_corpus)

    p = sub.add_parser("init-config", help="write a default run config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # `corrupt sweep ...` is the documented spelling of corrupt-sweep
    if argv[:2] == ["corrupt", "sweep"]:
        argv = ["corrupt-sweep"] + argv[2:]
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
