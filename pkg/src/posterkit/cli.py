"""Command-line entry point: ingest, stats, split, prompt, generate, eval,
render, constraints-synth, constraints-check.

Settings resolve with precedence flags > environment (POSTERKIT_*) > config
file (simple "key = value" lines). Every run writes its resolved settings to
<run-dir>/config.json so mock-backend workflows can be reproduced exactly.

Exit codes: 0 success, 1 configuration/input error, 2 partial generation
failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import io
import json
import os
import sys
import tempfile
import zlib
from dataclasses import replace
from pathlib import Path

from PIL import Image

from . import codec, constraints as cons, data, gateway
from .core import CategoryVocabulary, validate
from .metrics import (
    METRIC_COLUMNS,
    BackgroundImage,
    DimensionMismatchError,
    MetricReport,
    SaliencyMask,
    docsim,
    geometry_report,
    matched_iou,
    occlusion,
    readability,
    utility,
)
from .renderer import (
    AssetStore,
    MissingAssetError,
    RenderSpec,
    patch_transplant,
    render_png_bytes,
)

ENV_PREFIX = "POSTERKIT_"

# keys that participate in flags > env > file resolution
CONFIG_DEFAULTS = {
    "backend": "mock",
    "endpoint": "",
    "model": "",
    "max_tokens": 4096,
    "temperature": 0.0,
    "timeout": 120.0,
    "retries": 2,
    "auth_env": "POSTERKIT_API_TOKEN",
    "decimals": 3,
    "threshold": 0.5,
    "seed": 0,
    "jobs": 1,
    "policy": "lenient",
}


def _write_text_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_bytes_atomic(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config_file(path: str | Path) -> dict:
    """Parse "key = value" lines ('#' starts a comment).

    A previously written run config.json also loads, so a run can be
    reproduced by pointing --config at it.
    """
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return {k: v for k, v in doc.items() if k in CONFIG_DEFAULTS}
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (need key = value): {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge flag/env/file settings over defaults, flags winning."""
    from_file: dict = {}
    if getattr(args, "config", None):
        from_file = load_config_file(args.config)
    settings = {}
    for key, default in CONFIG_DEFAULTS.items():
        value = getattr(args, key, None)
        if value is None:
            env = os.environ.get(ENV_PREFIX + key.upper())
            raw = env if env is not None else from_file.get(key, default)
            value = type(default)(raw) if not isinstance(raw, type(default)) else raw
        settings[key] = value
    return settings


def _backend_config(settings: dict) -> gateway.BackendConfig:
    return gateway.BackendConfig(
        kind=settings["backend"],
        endpoint=settings["endpoint"],
        model=settings["model"],
        max_tokens=settings["max_tokens"],
        temperature=settings["temperature"],
        timeout_s=settings["timeout"],
        retry_limit=settings["retries"],
        auth_env=settings["auth_env"],
    )


def _derive_vocabulary(args: argparse.Namespace, manifest_path: Path) -> CategoryVocabulary:
    """Vocabulary from --vocab/--underlays flags, else from labels in the file."""
    underlays = [s.strip() for s in (args.underlays or "").split(",") if s.strip()]
    if args.vocab:
        labels = tuple(s.strip() for s in args.vocab.split(",") if s.strip())
    else:
        labels_seen: list[str] = []
        with open(manifest_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError:
                    continue  # bad rows get reported by the ingest pass
                for elem in row.get("elements", []) if isinstance(row, dict) else []:
                    label = elem.get("label")
                    if isinstance(label, str) and label not in labels_seen:
                        labels_seen.append(label)
        labels = tuple(labels_seen)
        if not underlays:
            underlays = [l for l in labels if l in ("underlay", "text background")]
    return CategoryVocabulary(
        name=args.dataset_name or "dataset",
        labels=labels,
        underlay_labels=frozenset(u for u in underlays if u in labels),
    )


def _load_manifest(args: argparse.Namespace) -> data.Manifest:
    path = Path(args.manifest)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    vocabulary = _derive_vocabulary(args, path)
    adapter = data.generic_adapter(vocabulary, domain_tag=args.domain or "poster")
    manifest, report = data.ingest(path, adapter)
    for issue in report.issues:
        print(f"manifest line {issue.line_no}: {issue.message}", file=sys.stderr)
    return manifest


def _select_entries(manifest: data.Manifest, split: str | None) -> tuple[data.ManifestEntry, ...]:
    if split and split != "all":
        return manifest.by_split(split)
    if split == "all":
        return manifest.entries
    # default: the test split when one exists, otherwise everything
    test = manifest.by_split("test")
    return test if test else manifest.entries


def _resolve_ref(ref: str | None, base: Path) -> Path | None:
    if not ref:
        return None
    path = Path(ref)
    return path if path.is_absolute() else base / path


def _write_run_config(run_dir: Path, command: str, settings: dict, extra: dict) -> None:
    payload = {"command": command, **extra, **settings}
    _write_text_atomic(run_dir / "config.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- subcommands


def cmd_ingest(args: argparse.Namespace) -> int:
    factory = data.ADAPTER_FACTORIES.get(args.adapter)
    if factory is None:
        print(f"unknown adapter {args.adapter!r}; choices: {sorted(data.ADAPTER_FACTORIES)}", file=sys.stderr)
        return 1
    if not Path(args.input).is_file():
        print(f"ingest failed: cannot read {args.input}", file=sys.stderr)
        return 1
    if args.adapter == "generic-jsonl":
        vocabulary = _derive_vocabulary(args, Path(args.input))
        adapter = factory(vocabulary, domain_tag=args.domain or "poster")
    elif args.adapter == "banner-style":
        if not args.vocab:
            print("banner-style needs --vocab (its category names are not standardized)", file=sys.stderr)
            return 1
        underlays = frozenset(s.strip() for s in (args.underlays or "").split(",") if s.strip())
        vocabulary = CategoryVocabulary(
            name=args.dataset_name or "banner",
            labels=tuple(s.strip() for s in args.vocab.split(",")),
            underlay_labels=underlays,
        )
        adapter = factory(vocabulary, strict_labels=args.strict_labels)
    else:
        adapter = factory(strict_labels=args.strict_labels)
    try:
        manifest, report = data.ingest(args.input, adapter, strict=args.strict)
    except (data.IngestError, OSError) as exc:
        print(f"ingest failed: {exc}", file=sys.stderr)
        return 1
    for issue in report.issues:
        print(f"line {issue.line_no}: {issue.message}", file=sys.stderr)
    data.export_jsonl(manifest, args.output)
    print(f"wrote {len(manifest)} records to {args.output} "
          f"({report.rows_read - report.rows_kept} rows skipped)")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        manifest = _load_manifest(args)
        corpus = data.stats(manifest)
    except (FileNotFoundError, data.IngestError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(corpus.table())
    if args.json:
        _write_text_atomic(Path(args.json), corpus.to_json() + "\n")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    try:
        manifest = _load_manifest(args)
        result = data.split(manifest, args.ratio, args.seed if args.seed is not None else 0)
    except (FileNotFoundError, data.IngestError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    data.export_jsonl(result, args.output)
    train = len(result.by_split("train"))
    print(f"wrote {args.output}: {train} train / {len(result) - train} test")
    return 0


def _constraints_text_for(entry: data.ManifestEntry, constraints_dir: str | None) -> str | None:
    if not constraints_dir:
        return None
    path = Path(constraints_dir) / f"{entry.record.id}.txt"
    if not path.is_file():
        return None
    lines = [
        l.strip()
        for l in path.read_text(encoding="utf-8").splitlines()
        if l.strip() and not l.strip().startswith("#")
    ]
    return "; ".join(lines) if lines else None


def cmd_prompt(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    try:
        manifest = _load_manifest(args)
    except (FileNotFoundError, data.IngestError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    run_dir = Path(args.run_dir)
    _write_run_config(run_dir, "prompt", settings, {"manifest": str(args.manifest)})
    entries = _select_entries(manifest, args.split)
    for entry in entries:
        bundle = codec.build_prompt(
            entry.record,
            _constraints_text_for(entry, args.constraints_dir),
            decimals=settings["decimals"],
        )
        _write_text_atomic(run_dir / "prompts" / f"{entry.record.id}.txt", bundle.user_text + "\n")
        meta = {
            "expected_n": bundle.expected_n,
            "expected_labels": list(bundle.expected_labels),
            "image_ref": bundle.image_ref,
        }
        _write_text_atomic(
            run_dir / "prompts" / f"{entry.record.id}.bundle.json",
            json.dumps(meta, indent=2) + "\n",
        )
    print(f"wrote {len(entries)} prompt(s) under {run_dir / 'prompts'}")
    return 0


def _generate_one(
    entry: data.ManifestEntry,
    settings: dict,
    config: gateway.BackendConfig,
    constraints_dir: str | None,
    base: Path,
) -> tuple[str, gateway.GenerationResult | Exception]:
    record = entry.record
    bundle = codec.build_prompt(
        record, _constraints_text_for(entry, constraints_dir), decimals=settings["decimals"]
    )
    saliency = None
    saliency_path = _resolve_ref(entry.saliency, base)
    if saliency_path and saliency_path.is_file():
        saliency = SaliencyMask.load(saliency_path)
    image = None
    if config.kind == "remote":
        image_path = _resolve_ref(entry.background, base)
        if bundle.image_ref and (image_path is None or not image_path.is_file()):
            return record.id, FileNotFoundError(f"background not readable: {entry.background}")
        image = image_path
    try:
        result = gateway.generate(
            bundle, config, image=image, saliency=saliency, policy=settings["policy"]
        )
        return record.id, result
    except (gateway.GenerationError, gateway.TransportError) as exc:
        return record.id, exc


def cmd_generate(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    try:
        manifest = _load_manifest(args)
        config = _backend_config(settings)
    except (FileNotFoundError, data.IngestError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    run_dir = Path(args.run_dir)
    _write_run_config(
        run_dir, "generate", settings,
        {"manifest": str(args.manifest), "constraints_dir": args.constraints_dir},
    )
    entries = _select_entries(manifest, args.split)
    base = Path(args.manifest).parent
    jobs = max(1, settings["jobs"])

    results: list[tuple[str, gateway.GenerationResult | Exception]] = []
    if jobs == 1:
        for entry in entries:
            results.append(_generate_one(entry, settings, config, args.constraints_dir, base))
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_generate_one, entry, settings, config, args.constraints_dir, base)
                for entry in entries
            ]
            results = [f.result() for f in futures]

    entry_by_id = {e.record.id: e for e in entries}
    failures: list[str] = []
    attempts_total = 0
    for record_id, outcome in results:
        if isinstance(outcome, Exception):
            failures.append(record_id)
            detail = {
                "error": str(outcome),
                "raw_text": getattr(outcome, "raw_text", ""),
                "attempts": getattr(outcome, "attempts", 0),
            }
            _write_text_atomic(
                run_dir / "predictions" / f"{record_id}.error.json",
                json.dumps(detail, indent=2) + "\n",
            )
            continue
        attempts_total += outcome.attempts
        pred = replace(entry_by_id[record_id].record, elements=outcome.elements)
        _write_text_atomic(
            run_dir / "predictions" / f"{record_id}.json",
            codec.serialize(pred, settings["decimals"]) + "\n",
        )
        _write_text_atomic(
            run_dir / "predictions" / f"{record_id}.repair.json",
            outcome.repair_log.to_json() + "\n",
        )
    succeeded = len(results) - len(failures)
    summary = {
        "records": len(results),
        "succeeded": succeeded,
        "success_rate": succeeded / len(results) if results else 0.0,
        "mean_attempts": attempts_total / succeeded if succeeded else 0.0,
        "failures": sorted(failures),
    }
    _write_text_atomic(run_dir / "summary.json", json.dumps(summary, indent=2) + "\n")
    print(
        f"generated {succeeded}/{len(results)} layouts "
        f"(success rate {summary['success_rate']:.2f}, mean attempts {summary['mean_attempts']:.2f})"
    )
    return 2 if failures else 0


def _metric_means(reports: list[MetricReport]) -> dict[str, float]:
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for report in reports:
        for name, value in report.scores.items():
            sums[name] = sums.get(name, 0.0) + value
            counts[name] = counts.get(name, 0) + 1
    return {name: sums[name] / counts[name] for name in sums}


def format_metric_table(means: dict[str, float]) -> str:
    columns = [c for c in METRIC_COLUMNS if c in means]
    header = "  ".join(f"{c:>8}" for c in columns)
    row = "  ".join(f"{means[c]:>8.4f}" for c in columns)
    return header + "\n" + row


def cmd_eval(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    try:
        manifest = _load_manifest(args)
    except (FileNotFoundError, data.IngestError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    predictions_dir = Path(args.predictions)
    if not predictions_dir.is_dir():
        print(f"predictions directory not found: {predictions_dir}", file=sys.stderr)
        return 1
    run_dir = Path(args.run_dir)
    _write_run_config(
        run_dir, "eval", settings,
        {"manifest": str(args.manifest), "predictions": str(predictions_dir)},
    )
    wanted = set((args.metrics or "geometry,content,similarity,vio").split(","))
    vocabulary = manifest.vocabulary
    text_labels = (
        {s.strip() for s in args.text_labels.split(",") if s.strip()}
        if args.text_labels
        else {
            l
            for l in vocabulary.labels
            if ("text" in l or "title" in l) and not vocabulary.is_underlay(l)
        }
    )
    base = Path(args.manifest).parent
    reports: list[MetricReport] = []
    skipped: dict[str, int] = {}
    lines: list[str] = []
    for entry in _select_entries(manifest, args.split):
        record_id = entry.record.id
        pred_path = predictions_dir / f"{record_id}.json"
        if not pred_path.is_file():
            skipped["missing-prediction"] = skipped.get("missing-prediction", 0) + 1
            continue
        try:
            elements = codec.parse(pred_path.read_text(encoding="utf-8"))
        except (codec.LayoutParseError, codec.LayoutSchemaError) as exc:
            skipped["unparseable-prediction"] = skipped.get("unparseable-prediction", 0) + 1
            print(f"{record_id}: {exc}", file=sys.stderr)
            continue
        pred = replace(entry.record, elements=tuple(elements))
        pred, _ = validate(pred, "clamp")
        report = MetricReport()
        if "geometry" in wanted:
            geo = geometry_report(pred, vocabulary)
            report.scores.update(geo.scores())
            report.diagnostics.update(geo.diagnostics)
        if "content" in wanted:
            try:
                saliency_path = _resolve_ref(entry.saliency, base)
                if saliency_path and saliency_path.is_file():
                    mask_raster = SaliencyMask.load(saliency_path)
                    report.scores["Occ"] = occlusion(pred, mask_raster, settings["threshold"])
                    report.scores["Uti"] = utility(pred, mask_raster, settings["threshold"])
                background_path = _resolve_ref(entry.background, base)
                if background_path and background_path.is_file() and text_labels:
                    background = BackgroundImage.load(background_path)
                    report.scores["Rea"] = readability(pred, background, text_labels)
            except DimensionMismatchError as exc:
                report.diagnostics["content_metrics_skipped"] = str(exc)
                print(f"{record_id}: {exc}", file=sys.stderr)
        if "similarity" in wanted and entry.record.elements:
            report.scores["IoU"] = matched_iou(pred, entry.record)
            report.scores["DocSim"] = docsim(pred, entry.record)
        if "vio" in wanted and args.constraints_dir:
            cpath = Path(args.constraints_dir) / f"{record_id}.txt"
            if cpath.is_file():
                cset = cons.load_constraints(cpath)
                report.scores["Vio"] = cons.check(pred, cset).vio
        reports.append(report)
        lines.append(json.dumps({"id": record_id, **report.scores}))
    if not reports:
        print("no predictions evaluated", file=sys.stderr)
        return 1
    _write_text_atomic(run_dir / "reports" / "metrics.jsonl", "\n".join(lines) + "\n")
    means = _metric_means(reports)
    _write_text_atomic(
        run_dir / "reports" / "summary.json",
        json.dumps({"records": len(reports), "means": means, "skipped": skipped}, indent=2) + "\n",
    )
    print(format_metric_table(means))
    absent = [c for c in METRIC_COLUMNS if c not in means]
    if absent:
        print(f"omitted (inputs unavailable): {', '.join(absent)}")
    if skipped:
        print(f"records skipped: {skipped}", file=sys.stderr)
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    try:
        manifest = _load_manifest(args)
    except (FileNotFoundError, data.IngestError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    run_dir = Path(args.run_dir)
    _write_run_config(run_dir, "render", settings, {"manifest": str(args.manifest)})
    spec = (
        RenderSpec.from_json(args.style)
        if args.style
        else RenderSpec.for_vocabulary(manifest.vocabulary)
    )
    store = AssetStore(args.assets_dir or Path(args.manifest).parent)
    predictions_dir = Path(args.predictions) if args.predictions else None
    rendered = 0
    for entry in _select_entries(manifest, args.split):
        record = entry.record
        if predictions_dir is not None:
            pred_path = predictions_dir / f"{record.id}.json"
            if not pred_path.is_file():
                continue
            elements = codec.parse(pred_path.read_text(encoding="utf-8"))
            record = replace(record, elements=tuple(elements))
            record, _ = validate(record, "clamp")
        try:
            if args.transplant:
                poster_path = _resolve_ref(entry.background, Path(args.manifest).parent)
                if poster_path is None or not poster_path.is_file():
                    raise MissingAssetError(entry.background or "<no background>")
                with Image.open(poster_path) as poster:
                    out = patch_transplant(poster.convert("RGBA"), entry.record, record)
                buffer = io.BytesIO()
                out.save(buffer, format="PNG", optimize=False, compress_level=6)
                payload = buffer.getvalue()
            else:
                payload = render_png_bytes(record, store, spec)
        except MissingAssetError as exc:
            if args.skip_missing:
                print(f"{record.id}: {exc} (skipped)", file=sys.stderr)
                continue
            print(f"{record.id}: {exc}", file=sys.stderr)
            return 1
        _write_bytes_atomic(run_dir / "renders" / f"{record.id}.png", payload)
        rendered += 1
    print(f"rendered {rendered} image(s) under {run_dir / 'renders'}")
    return 0


def cmd_constraints_synth(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    try:
        manifest = _load_manifest(args)
    except (FileNotFoundError, data.IngestError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    out_dir = Path(args.output_dir)
    written = 0
    for entry in manifest.entries:
        record = entry.record
        if not record.elements:
            continue
        record_seed = settings["seed"] ^ zlib.crc32(record.id.encode("utf-8"))
        cset = cons.synthesize(record, record_seed, k=args.k)
        if cset.shortfall:
            print(f"{record.id}: only {len(cset)} of {args.k} constraints", file=sys.stderr)
        _write_text_atomic(out_dir / f"{record.id}.txt", "\n".join(cset.surface_lines()) + "\n")
        written += 1
    print(f"wrote constraint files for {written} record(s) under {out_dir}")
    return 0


def cmd_constraints_check(args: argparse.Namespace) -> int:
    try:
        manifest = _load_manifest(args)
    except (FileNotFoundError, data.IngestError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    constraints_dir = Path(args.constraints_dir)
    predictions_dir = Path(args.predictions) if args.predictions else None
    per_record: dict[str, float] = {}
    for entry in manifest.entries:
        record = entry.record
        cpath = constraints_dir / f"{record.id}.txt"
        if not cpath.is_file():
            continue
        if predictions_dir is not None:
            pred_path = predictions_dir / f"{record.id}.json"
            if not pred_path.is_file():
                continue
            elements = codec.parse(pred_path.read_text(encoding="utf-8"))
            record = replace(record, elements=tuple(elements))
            record, _ = validate(record, "clamp")
        cset = cons.load_constraints(cpath)
        per_record[record.id] = cons.check(record, cset).vio
    if not per_record:
        print("no (constraints, layout) pairs found", file=sys.stderr)
        return 1
    mean_vio = sum(per_record.values()) / len(per_record)
    print(f"Vio {mean_vio:.4f} over {len(per_record)} record(s)")
    if args.json:
        _write_text_atomic(
            Path(args.json),
            json.dumps({"mean_vio": mean_vio, "per_record": per_record}, indent=2) + "\n",
        )
    return 0


# ------------------------------------------------------------------- parser


def _add_manifest_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="generic-jsonl manifest path")
    p.add_argument("--vocab", help="comma-separated labels (default: derived from the file)")
    p.add_argument("--underlays", help="comma-separated underlay labels")
    p.add_argument("--dataset-name", help="vocabulary name")
    p.add_argument("--domain", help="domain tag for prompts (e.g. 'commercial poster')")
    p.add_argument("--split", help="record subset: train | test | all (default: test if tagged)")


def _add_settings_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--backend", choices=("mock", "remote"))
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--max-tokens", type=int, dest="max_tokens")
    p.add_argument("--temperature", type=float)
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.add_argument("--auth-env", dest="auth_env")
    p.add_argument("--decimals", type=int, help="coordinate decimal places (K)")
    p.add_argument("--threshold", type=float, help="saliency threshold")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--policy", choices=("lenient", "strict"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posterkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert raw annotations to the generic manifest")
    p.add_argument("--input", required=True)
    p.add_argument("--adapter", required=True, choices=sorted(data.ADAPTER_FACTORIES))
    p.add_argument("--output", required=True)
    p.add_argument("--vocab")
    p.add_argument("--underlays")
    p.add_argument("--dataset-name")
    p.add_argument("--domain")
    p.add_argument("--strict", action="store_true", help="fail on the first bad row")
    p.add_argument("--strict-labels", action="store_true", help="skip rows with unknown labels")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="corpus statistics table")
    _add_manifest_options(p)
    p.add_argument("--json", help="also write stats as JSON here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="assign train/test tags")
    _add_manifest_options(p)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("prompt", help="write instruction prompts without calling a model")
    _add_manifest_options(p)
    _add_settings_options(p)
    p.add_argument("--run-dir", required=True, dest="run_dir")
    p.add_argument("--constraints-dir", dest="constraints_dir")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("generate", help="generate layouts through the configured backend")
    _add_manifest_options(p)
    _add_settings_options(p)
    p.add_argument("--run-dir", required=True, dest="run_dir")
    p.add_argument("--constraints-dir", dest="constraints_dir")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="score predictions against the manifest")
    _add_manifest_options(p)
    _add_settings_options(p)
    p.add_argument("--run-dir", required=True, dest="run_dir")
    p.add_argument("--predictions", required=True)
    p.add_argument("--metrics", help="comma subset of geometry,content,similarity,vio")
    p.add_argument("--constraints-dir", dest="constraints_dir")
    p.add_argument("--text-labels", dest="text_labels", help="labels scored by readability")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="rasterize layouts (or transplant patches)")
    _add_manifest_options(p)
    _add_settings_options(p)
    p.add_argument("--run-dir", required=True, dest="run_dir")
    p.add_argument("--predictions")
    p.add_argument("--assets-dir", dest="assets_dir")
    p.add_argument("--style", help="RenderSpec JSON file")
    p.add_argument("--transplant", action="store_true")
    p.add_argument("--skip-missing", action="store_true", dest="skip_missing")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("constraints-synth", help="derive constraints from ground truth")
    _add_manifest_options(p)
    _add_settings_options(p)
    p.add_argument("--output-dir", required=True, dest="output_dir")
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(func=cmd_constraints_synth)

    p = sub.add_parser("constraints-check", help="violation ratio of layouts vs constraints")
    _add_manifest_options(p)
    p.add_argument("--constraints-dir", required=True, dest="constraints_dir")
    p.add_argument("--predictions")
    p.add_argument("--json", help="write per-record vio as JSON here")
    p.set_defaults(func=cmd_constraints_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
