"""Command-line entry points for the full pipeline.

Sub-commands: ingest, train-retriever, train-generator, build-index,
calibrate, retrieve, generate, evaluate, render, serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Failures print one machine-parsable line to stderr:
``error<TAB>kind<TAB>message``. Options fall back to MOCKFORGE_* environment
variables and then to a --config JSON file (flag > env > file > default).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .core import ClassVocabulary, read_screens_jsonl, write_screens_jsonl
from .generator import (
    GeneratorConfig,
    GeneratorTrainConfig,
    SamplerConfig,
    sample_ui,
    train_generator,
)
from .ingest import CorpusSplit, IngestError, build_corpus, extract_leaf_view
from .ndtensor import NanGradientError
from .quality import (
    MetricCalibration,
    calibrate,
    diversity,
    metrics_table_tsv,
    postprocess,
    relevance,
    score_elements,
)
from .render import Theme, render_gallery, render_svg
from .retrieval import (
    DualEncoderConfig,
    RetrieverTrainConfig,
    VectorIndex,
    eval_topk,
    retrieve_multimodal,
    retrieve_text_only,
    text_index_build,
    topk_table_tsv,
    train_dual_encoder,
    ui_index_build,
)
from .service import ServiceState, serve_forever
from .textfeat import HashedTfidfProvider

log = logging.getLogger(__name__)

ENV_PREFIX = "MOCKFORGE_"


class UsageError(ValueError):
    pass


class DataError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        raise UsageError(message)


def _resolve(flag_value, env_name: str, config: dict, key: str, default=None, cast=str):
    if flag_value is not None:
        return flag_value
    env = os.environ.get(ENV_PREFIX + env_name)
    if env is not None:
        return cast(env)
    if key in config:
        return cast(config[key])
    return default


def _load_config_file(path) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _load_corpus_dir(corpus_dir) -> tuple[dict[str, CorpusSplit], ClassVocabulary]:
    corpus_dir = Path(corpus_dir)
    vocab = ClassVocabulary.from_file(corpus_dir / "vocab.json")
    splits = {}
    for name in ("train", "validation", "test"):
        path = corpus_dir / f"{name}.jsonl"
        screens = read_screens_jsonl(path, vocab) if path.exists() else []
        splits[name] = CorpusSplit(name=name, screens=screens)
    return splits, vocab


def _screens_by_id(splits: dict[str, CorpusSplit]) -> dict:
    return {s.screen_id: s for split in splits.values() for s in split.screens}


def _fit_provider(split: CorpusSplit, dim: int) -> HashedTfidfProvider:
    docs = [c for screen in split.screens for c in screen.captions]
    return HashedTfidfProvider.fit(docs, dim=dim)


def _candidate_json(cand, vocab: ClassVocabulary, cid: str) -> dict:
    from .service import _candidate_to_json

    return _candidate_to_json(cid, cand, vocab)


# --- commands -------------------------------------------------------------------


def cmd_ingest(args) -> int:
    vocab = ClassVocabulary.from_file(args.classes) if args.classes else ClassVocabulary.default()
    result = build_corpus(args.hierarchies, args.captions, args.annotations,
                          args.manifest, vocab)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, split in result.splits.items():
        write_screens_jsonl(out / f"{name}.jsonl", split.screens, vocab)
    (out / "vocab.json").write_text(vocab.to_json(), encoding="utf-8")
    (out / "report.json").write_text(result.report.to_json(), encoding="utf-8")
    sizes = result.report.split_sizes
    print(f"ingested\ttrain={sizes['train']}\tvalidation={sizes['validation']}"
          f"\ttest={sizes['test']}\tdropped={len(result.report.dropped_screens)}")
    return 0


def cmd_train_retriever(args) -> int:
    splits, vocab = _load_corpus_dir(args.corpus)
    provider = _fit_provider(splits["train"], args.dim)
    enc_cfg = DualEncoderConfig(
        hidden=args.hidden, intermediate=args.intermediate, layers=args.layers,
        heads=args.heads, dropout=args.dropout, provider_dim=args.dim,
        n_classes=len(vocab),
    )
    cfg = RetrieverTrainConfig(
        encoder=enc_cfg, batch_size=args.batch_size, lr=args.lr,
        max_epochs=args.epochs, patience=args.patience,
        include_positive=not args.literal_loss, seed=args.seed,
    )
    enc, history = train_dual_encoder(splits["train"], splits["validation"], provider, cfg)
    artifacts.save_dual_encoder(args.out, enc, provider, vocab)
    Path(str(args.out) + ".log.json").write_text(json.dumps(history, indent=1),
                                                 encoding="utf-8")
    last = history[-1] if history else {}
    print(f"trained\tepochs={len(history)}\tval_loss={last.get('val_loss', float('nan')):.4f}"
          f"\tartifact={args.out}")
    return 0


def cmd_train_generator(args) -> int:
    splits, vocab = _load_corpus_dir(args.corpus)
    provider = _fit_provider(splits["train"], args.dim)
    model_cfg = GeneratorConfig(
        hidden=args.hidden, intermediate=args.intermediate,
        encoder_layers=args.layers, decoder_layers=args.layers, heads=args.heads,
        mixtures=args.mixtures, max_elements=args.max_elements, dropout=args.dropout,
        provider_dim=args.dim, n_classes=len(vocab),
    )
    cfg = GeneratorTrainConfig(model=model_cfg, batch_size=args.batch_size,
                               max_epochs=args.epochs, patience=args.patience,
                               seed=args.seed)
    model, history = train_generator(splits["train"], splits["validation"], provider,
                                     vocab, cfg)
    cal = calibrate([extract_leaf_view(s) for s in splits["validation"].screens])
    artifacts.save_generator(args.out, model, provider, cal)
    Path(str(args.out) + ".log.json").write_text(json.dumps(history, indent=1),
                                                 encoding="utf-8")
    last = history[-1] if history else {}
    print(f"trained\tepochs={len(history)}\tval_nll={last.get('val_nll', float('nan')):.4f}"
          f"\tartifact={args.out}")
    return 0


def cmd_build_index(args) -> int:
    splits, vocab = _load_corpus_dir(args.corpus)
    split = splits[args.split]
    if not split.screens:
        raise DataError(f"split {args.split!r} is empty")
    if args.what == "text":
        provider = _fit_provider(split, args.dim)
        index = text_index_build(split, provider)
        artifacts.save_text_index(args.out, index, provider, vocab)
    else:
        enc, provider = artifacts.load_dual_encoder(args.dual_encoder)
        index = ui_index_build(split, enc, provider)
        index.save(args.out)
    print(f"indexed\twhat={args.what}\trows={len(index)}\tout={args.out}")
    return 0


def cmd_calibrate(args) -> int:
    splits, _vocab = _load_corpus_dir(args.corpus)
    split = splits[args.split]
    if not split.screens:
        raise DataError(f"split {args.split!r} is empty")
    cal = calibrate([extract_leaf_view(s) for s in split.screens])
    Path(args.out).write_text(cal.to_json(), encoding="utf-8")
    means = "\t".join(f"{k}={v:.4f}" for k, v in cal.means.items())
    print(f"calibrated\tscreens={len(split.screens)}\t{means}")
    return 0


def cmd_retrieve(args) -> int:
    splits, vocab = _load_corpus_dir(args.corpus)
    screens = _screens_by_id(splits)
    if args.mode == "text-only":
        index, provider = artifacts.load_text_index(args.text_index)
        candidates = retrieve_text_only(args.prompt, index, provider, screens, args.k)
    else:
        enc, provider = artifacts.load_dual_encoder(args.dual_encoder)
        index = VectorIndex.load(args.ui_index)
        candidates = retrieve_multimodal(args.prompt, enc, index, provider, screens, args.k)
    for i, cand in enumerate(candidates):
        print(f"{i + 1}\t{cand.source_screen_id}\t{cand.similarity:.6f}")
    if args.out:
        _dump_candidates(args.out, candidates, vocab, args.prompt)
    return 0


def cmd_generate(args) -> int:
    model, provider, cal = artifacts.load_generator(args.generator)
    if args.calibration:
        cal = MetricCalibration.from_json(Path(args.calibration).read_text(encoding="utf-8"))
    candidates = []
    for i in range(args.n):
        sampler = SamplerConfig(temperature=args.temperature, seed=args.seed + i,
                                max_elements=model.cfg.max_elements)
        candidates.append(sample_ui(model, args.prompt, sampler, provider))
    fallback = False
    if args.postprocess:
        if cal is None:
            raise DataError("postprocessing needs a calibration (artifact or --calibration)")
        candidates, fallback = postprocess(candidates, cal)
    for i, cand in enumerate(candidates):
        s = cand.scores
        extra = (f"\toverlap={s.overlap:.4f}\tiou={s.iou:.4f}\talignment={s.alignment:.4f}"
                 f"\tscore={s.rerank_score:.4f}" if s else "")
        print(f"{i + 1}\telements={len(cand.elements)}\tseed={cand.seed}{extra}")
    if fallback:
        print("note\tfilter removed every candidate; reranked the unfiltered pool")
    if args.out:
        _dump_candidates(args.out, candidates, model.vocab, args.prompt)
    return 0


def _dump_candidates(out_dir, candidates, vocab: ClassVocabulary, prompt: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"prompt": prompt,
               "candidates": [_candidate_json(c, vocab, f"c{i:03d}")
                              for i, c in enumerate(candidates)]}
    (out / "candidates.json").write_text(json.dumps(payload, indent=1), encoding="utf-8")
    (out / "vocab.json").write_text(vocab.to_json(), encoding="utf-8")
    for i, cand in enumerate(candidates):
        (out / f"candidate_{i:03d}.svg").write_text(
            render_svg(cand, vocab).svg, encoding="utf-8")


def cmd_evaluate(args) -> int:
    splits, vocab = _load_corpus_dir(args.corpus)
    if args.what == "retrieval":
        enc, provider = artifacts.load_dual_encoder(args.dual_encoder)
        ks = tuple(int(k) for k in args.ks.split(","))
        rows = []
        if args.subset_size:
            res = eval_topk(enc, splits[args.split], provider, ks,
                            subset_size=args.subset_size, trials=args.trials,
                            seed=args.seed)
            rows.append((f"Multi-modal Retriever ({res['trials']} subsets avg.)", res))
        else:
            res = eval_topk(enc, splits[args.split], provider, ks, seed=args.seed)
            rows.append(("Multi-modal Retriever (entire test set)", res))
        table = topk_table_tsv(rows, ks)
    else:
        table = _evaluate_metrics(args, splits, vocab)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def _evaluate_metrics(args, splits, vocab) -> str:
    """Per-method well-formedness/diversity/relevance table over test prompts."""
    test = splits[args.split]
    if not test.screens:
        raise DataError(f"split {args.split!r} is empty")
    limit = args.limit or len(test.screens)
    screens = test.screens[:limit]
    screens_by_id = _screens_by_id(splits)

    methods: dict[str, object] = {}
    if args.generator:
        methods["UI Generator"] = artifacts.load_generator(args.generator)
    if args.text_index:
        methods["Text-only Retriever"] = artifacts.load_text_index(args.text_index)
    if args.dual_encoder and args.ui_index:
        methods["Multi-modal Retriever"] = (
            artifacts.load_dual_encoder(args.dual_encoder),
            VectorIndex.load(args.ui_index),
        )

    rows = []
    for label, handle in methods.items():
        agg = {"overlap": [], "iou": [], "alignment": [], "diversity": [], "relevance": []}
        for si, screen in enumerate(screens):
            prompt = screen.captions[0] if screen.captions else ""
            gt = extract_leaf_view(screen)
            if label == "UI Generator":
                model, provider, cal = handle
                cands = []
                for i in range(args.n):
                    sampler = SamplerConfig(temperature=args.temperature,
                                            seed=args.seed + si * 1000 + i,
                                            max_elements=model.cfg.max_elements)
                    cands.append(sample_ui(model, prompt, sampler, provider))
                if cal is not None:
                    cands, _ = postprocess(cands, cal)
            elif label == "Text-only Retriever":
                index, provider = handle
                cands = retrieve_text_only(prompt, index, provider, screens_by_id, args.n)
            else:
                (enc, provider), index = handle
                cands = retrieve_multimodal(prompt, enc, index, provider, screens_by_id, args.n)
            if not cands:
                continue
            for cand in cands:
                s = score_elements(cand.elements)
                agg["overlap"].append(s.overlap)
                agg["iou"].append(s.iou)
                agg["alignment"].append(s.alignment)
            if len(cands) >= 2:
                agg["diversity"].append(diversity(cands))
            agg["relevance"].append(relevance(cands, gt))
        rows.append((label, {k: float(np.mean(v)) if v else None for k, v in agg.items()}))

    data_stats = {"overlap": [], "iou": [], "alignment": []}
    for screen in screens:
        s = score_elements(extract_leaf_view(screen))
        data_stats["overlap"].append(s.overlap)
        data_stats["iou"].append(s.iou)
        data_stats["alignment"].append(s.alignment)
    rows.append(("Data (test set)", {k: float(np.mean(v)) for k, v in data_stats.items()}))
    return metrics_table_tsv(rows)


def cmd_render(args) -> int:
    payload = json.loads(Path(args.candidates).read_text(encoding="utf-8"))
    vocab_path = args.vocab or (Path(args.candidates).parent / "vocab.json")
    vocab = ClassVocabulary.from_file(vocab_path)
    from .core import ElementBox, MockupCandidate

    candidates = []
    for c in payload["candidates"]:
        elements = tuple(
            ElementBox(x=e["x"], y=e["y"], w=e["w"], h=e["h"],
                       class_id=vocab.id_of(e["class"]), text=e.get("text"))
            for e in c["elements"]
        )
        candidates.append(MockupCandidate(
            elements=elements, prompt=payload.get("prompt", ""),
            method=c.get("method", "generator"),
            source_screen_id=c.get("source_screen_id"), seed=c.get("seed")))
    theme = Theme(annotate=args.annotate)
    if args.gallery:
        by_method: dict[str, list] = {}
        for cand in candidates:
            by_method.setdefault(cand.method, []).append(cand)
        html = render_gallery(by_method, payload.get("prompt", ""), vocab,
                              theme=theme, scramble_seed=args.scramble_seed)
        Path(args.out).write_text(html, encoding="utf-8")
        print(f"rendered\tgallery={args.out}\tcells={len(candidates)}")
    else:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for i, cand in enumerate(candidates):
            (out / f"mockup_{i:03d}.svg").write_text(
                render_svg(cand, vocab, theme=theme).svg, encoding="utf-8")
        print(f"rendered\tcount={len(candidates)}\tdir={args.out}")
    return 0


def cmd_serve(args) -> int:
    config = _load_config_file(args.config)
    host = _resolve(args.host, "HOST", config, "host", "127.0.0.1")
    port = _resolve(args.port, "PORT", config, "port", 8787, int)

    vocab = None
    state_kwargs: dict = {}
    if args.generator:
        model, provider, cal = artifacts.load_generator(args.generator)
        state_kwargs.update(generator=model, generator_provider=provider, calibration=cal)
        vocab = model.vocab
    if args.calibration:
        state_kwargs["calibration"] = MetricCalibration.from_json(
            Path(args.calibration).read_text(encoding="utf-8"))
    if args.text_index:
        index, provider = artifacts.load_text_index(args.text_index)
        state_kwargs.update(text_index=index, text_provider=provider)
    if args.dual_encoder and args.ui_index:
        enc, provider = artifacts.load_dual_encoder(args.dual_encoder)
        state_kwargs.update(dual_encoder=enc, retrieval_provider=provider,
                            ui_index=VectorIndex.load(args.ui_index))
    screens = {}
    if args.corpus:
        splits, corpus_vocab = _load_corpus_dir(args.corpus)
        screens = _screens_by_id(splits)
        vocab = vocab or corpus_vocab
    if vocab is None and args.vocab:
        vocab = ClassVocabulary.from_file(args.vocab)
    if vocab is None:
        vocab = ClassVocabulary.default()

    state = ServiceState(vocab=vocab, screens_by_id=screens, **state_kwargs)
    serve_forever(state, host, port)
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="mockforge",
                description="Low-fidelity UI mock-ups from text descriptions")
    p.add_argument("--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="parse raw screens into a canonical corpus")
    sp.add_argument("--hierarchies", required=True)
    sp.add_argument("--captions", required=True)
    sp.add_argument("--annotations")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--classes", help="vocabulary config JSON")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("train-retriever", help="train the dual encoder")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--dim", type=int, default=64)
    sp.add_argument("--hidden", type=int, default=64)
    sp.add_argument("--intermediate", type=int, default=256)
    sp.add_argument("--layers", type=int, default=4)
    sp.add_argument("--heads", type=int, default=4)
    sp.add_argument("--dropout", type=float, default=0.0)
    sp.add_argument("--batch-size", type=int, default=64)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--epochs", type=int, default=60)
    sp.add_argument("--patience", type=int, default=5)
    sp.add_argument("--literal-loss", action="store_true",
                    help="exclude the positive pair from the softmax denominator")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_train_retriever)

    sp = sub.add_parser("train-generator", help="train the UI generator")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--dim", type=int, default=64)
    sp.add_argument("--hidden", type=int, default=64)
    sp.add_argument("--intermediate", type=int, default=256)
    sp.add_argument("--layers", type=int, default=6)
    sp.add_argument("--heads", type=int, default=4)
    sp.add_argument("--mixtures", type=int, default=5)
    sp.add_argument("--max-elements", type=int, default=128)
    sp.add_argument("--dropout", type=float, default=0.0)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--epochs", type=int, default=120)
    sp.add_argument("--patience", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_train_generator)

    sp = sub.add_parser("build-index", help="build a retrieval index")
    sp.add_argument("--what", choices=("text", "ui"), required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--split", default="train")
    sp.add_argument("--dim", type=int, default=64)
    sp.add_argument("--dual-encoder", help="artifact (ui index only)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_build_index)

    sp = sub.add_parser("calibrate", help="metric statistics from a validation split")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--split", default="validation")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("retrieve", help="retrieve mock-ups for a description")
    sp.add_argument("--mode", choices=("text-only", "multi-modal"), default="text-only")
    sp.add_argument("--prompt", required=True)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--text-index")
    sp.add_argument("--dual-encoder")
    sp.add_argument("--ui-index")
    sp.add_argument("--out", help="directory for SVG + JSON dumps")
    sp.set_defaults(func=cmd_retrieve)

    sp = sub.add_parser("generate", help="generate mock-ups for a description")
    sp.add_argument("--generator", required=True)
    sp.add_argument("--prompt", required=True)
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--temperature", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--calibration", help="calibration JSON overriding the artifact")
    sp.add_argument("--postprocess", dest="postprocess", action="store_true", default=True)
    sp.add_argument("--no-postprocess", dest="postprocess", action="store_false")
    sp.add_argument("--out", help="directory for SVG + JSON dumps")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("evaluate", help="accuracy / metric report tables")
    sp.add_argument("--what", choices=("retrieval", "metrics"), required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--dual-encoder")
    sp.add_argument("--ui-index")
    sp.add_argument("--generator")
    sp.add_argument("--text-index")
    sp.add_argument("--ks", default="1,10")
    sp.add_argument("--subset-size", type=int)
    sp.add_argument("--trials", type=int, default=5)
    sp.add_argument("--limit", type=int)
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--temperature", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("render", help="render dumped candidates")
    sp.add_argument("--candidates", required=True, help="candidates.json from generate/retrieve")
    sp.add_argument("--vocab")
    sp.add_argument("--gallery", action="store_true")
    sp.add_argument("--scramble-seed", type=int)
    sp.add_argument("--annotate", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("serve", help="HTTP service over trained artifacts")
    sp.add_argument("--host")
    sp.add_argument("--port", type=int)
    sp.add_argument("--config", help="JSON config file (flag > env > file)")
    sp.add_argument("--generator")
    sp.add_argument("--text-index")
    sp.add_argument("--dual-encoder")
    sp.add_argument("--ui-index")
    sp.add_argument("--corpus", help="corpus dir whose screens back retrieval")
    sp.add_argument("--vocab")
    sp.add_argument("--calibration")
    sp.set_defaults(func=cmd_serve)

    return p


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(f"error\t{kind}\t{message}\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), 1)
    except (IngestError, DataError, artifacts.ArtifactError, FileNotFoundError) as exc:
        return _fail("data", str(exc), 2)
    except (NanGradientError, FloatingPointError) as exc:
        return _fail("numeric", str(exc), 3)
    except ValueError as exc:
        return _fail("data", str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
