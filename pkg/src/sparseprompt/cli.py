"""Command-line interface.

Exit codes: 0 success, 1 one or more episodes failed, 2 bad inputs
(manifest/config/flags/files), 3 backend unreachable or persistently
failing. Data outputs (masks, traces, CSV) carry no timestamps and are
byte-identical across repeated runs; wall-clock metadata goes to a
separate run.log.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .backend import (
    BackendError,
    OracleSegmenter,
    OracleSpec,
    PatchIntensityEncoder,
    TransportError,
)
from .density import DensityCandidates
from .eval import (
    EpisodeRow,
    PipelineConfig,
    SparsifyMode,
    density_sensitivity_study,
    run_episode,
    summarize_rows,
    write_class_summary_csv,
    write_results_csv,
    write_study_csv,
)
from .manifest import EpisodeRecord, ManifestError, load_manifest
from .matching import MatchConfig
from .pngio import atomic_write_bytes, load_image, load_mask, save_mask
from .refine import StructuringElement, refine_mask
from .remote import RemoteEncoder, RemoteSegmenter, check_health

EXIT_OK = 0
EXIT_EPISODE_FAILURES = 1
EXIT_INPUT_ERROR = 2
EXIT_BACKEND_ERROR = 3

DEFAULT_ENCODER_GRID = (16, 16)


class InputError(ValueError):
    """Anything wrong with flags, config files, manifests, or file inputs."""


@dataclass(frozen=True)
class BackendChoice:
    kind: str  # oracle | remote
    oracle_spec: OracleSpec = OracleSpec()
    base_url: Optional[str] = None
    encoder_grid: tuple[int, int] = DEFAULT_ENCODER_GRID


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except OSError as e:
        raise InputError(f"cannot read config {p}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"config {p} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise InputError(f"config {p} must be a JSON object")
    return raw


def _resolve_backend(args: argparse.Namespace, file_cfg: dict) -> BackendChoice:
    section = file_cfg.get("backend", {})
    if not isinstance(section, dict):
        raise InputError("config key 'backend' must be an object")
    kind = args.backend or section.get("kind") or "oracle"
    if kind not in ("oracle", "remote"):
        raise InputError(f"backend must be 'oracle' or 'remote', got {kind!r}")
    grid = section.get("encoder_grid", DEFAULT_ENCODER_GRID)
    try:
        grid = (int(grid[0]), int(grid[1]))
    except (TypeError, ValueError, IndexError):
        raise InputError(f"backend.encoder_grid must be [h, w], got {grid!r}") from None
    if kind == "remote":
        base_url = args.base_url or section.get("base_url")
        if not base_url:
            raise InputError("remote backend needs --base-url or config backend.base_url")
        return BackendChoice(kind="remote", base_url=base_url, encoder_grid=grid)
    spec = OracleSpec()
    spec_path = section.get("spec")
    if spec_path is not None:
        p = Path(spec_path)
        if not p.is_absolute() and args.config:
            p = Path(args.config).parent / p
        try:
            spec = OracleSpec.from_dict(json.loads(p.read_text()))
        except OSError as e:
            raise InputError(f"cannot read oracle spec {p}: {e}") from e
        except (json.JSONDecodeError, ValueError, TypeError) as e:
            raise InputError(f"bad oracle spec {p}: {e}") from e
    return BackendChoice(kind="oracle", oracle_spec=spec, encoder_grid=grid)


def _resolve_pipeline(args: argparse.Namespace, file_cfg: dict) -> PipelineConfig:
    section = file_cfg.get("pipeline", {})
    if not isinstance(section, dict):
        raise InputError("config key 'pipeline' must be an object")
    try:
        match = MatchConfig(
            tau=float(section.get("tau", MatchConfig.tau)),
            max_points=int(section.get("max_points", MatchConfig.max_points)),
            use_background_negatives=bool(
                section.get("use_background_negatives", MatchConfig.use_background_negatives)
            ),
        )
        candidates = DensityCandidates(tuple(section["densities"])) if "densities" in section else DensityCandidates()
        kernel_cfg = section.get("kernel", {})
        kernel = StructuringElement(
            shape=str(kernel_cfg.get("shape", "square")),
            radius=int(kernel_cfg.get("radius", 2)),
        )
        cfg = PipelineConfig(
            match=match,
            candidates=candidates,
            kernel=kernel,
            pruning=bool(section.get("prune", True)),
            sparsification=SparsifyMode.parse(str(section.get("sparsify", "adaptive"))),
            refinement=bool(section.get("refine", True)),
            min_keep=int(section.get("min_keep", 1)),
        )
    except (ValueError, TypeError) as e:
        raise InputError(f"bad pipeline config: {e}") from e

    # flags override file values
    try:
        if args.densities is not None:
            cfg = replace(cfg, candidates=DensityCandidates.parse(args.densities))
        if args.kernel_radius is not None:
            cfg = replace(cfg, kernel=StructuringElement(cfg.kernel.shape, args.kernel_radius))
        if args.no_prune:
            cfg = replace(cfg, pruning=False)
        if args.sparsify is not None:
            cfg = replace(cfg, sparsification=SparsifyMode.parse(args.sparsify))
        if args.no_refine:
            cfg = replace(cfg, refinement=False)
    except ValueError as e:
        raise InputError(str(e)) from e
    return cfg


def _make_backends(choice: BackendChoice, records: Sequence[EpisodeRecord]):
    if choice.kind == "remote":
        check_health(choice.base_url)
        return RemoteEncoder(choice.base_url), RemoteSegmenter(choice.base_url)
    encoder = PatchIntensityEncoder(grid=choice.encoder_grid)
    segmenter = OracleSegmenter.for_episodes(choice.oracle_spec, (r.episode for r in records))
    return encoder, segmenter


def _is_transport_failure(err: BaseException) -> bool:
    seen = set()
    cur: Optional[BaseException] = err
    while cur is not None and id(cur) not in seen:
        if isinstance(cur, TransportError):
            return True
        seen.add(id(cur))
        cur = cur.__cause__ or cur.__context__
    return False


def _run_records(records, cfg, encoder, segmenter, jobs: int):
    """Run all episodes, preserving record order; returns (results, errors)."""
    results: dict[int, object] = {}
    errors: dict[int, Exception] = {}

    def one(i: int):
        return i, run_episode(records[i].episode, cfg, encoder, segmenter)

    if jobs <= 1:
        for i in range(len(records)):
            try:
                results[i] = one(i)[1]
            except Exception as e:
                errors[i] = e
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futs = {pool.submit(one, i): i for i in range(len(records))}
            for fut in concurrent.futures.as_completed(futs):
                i = futs[fut]
                try:
                    results[i] = fut.result()[1]
                except Exception as e:
                    errors[i] = e
    return results, errors


def _report_failures(records, errors, out) -> int:
    transport = False
    for i in sorted(errors):
        err = errors[i]
        print(f"episode {records[i].episode_id} failed: {err}", file=out)
        if _is_transport_failure(err):
            transport = True
    return EXIT_BACKEND_ERROR if transport else EXIT_EPISODE_FAILURES


def cmd_run(args: argparse.Namespace) -> int:
    started = time.monotonic()
    file_cfg = _load_config_file(args.config)
    cfg = _resolve_pipeline(args, file_cfg)
    choice = _resolve_backend(args, file_cfg)
    try:
        records = load_manifest(args.manifest)
    except ManifestError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        encoder, segmenter = _make_backends(choice, records)
    except TransportError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BACKEND_ERROR

    out_dir = Path(args.out)
    masks_dir = out_dir / "masks"
    traces_dir = out_dir / "traces"
    masks_dir.mkdir(parents=True, exist_ok=True)
    traces_dir.mkdir(parents=True, exist_ok=True)

    results, errors = _run_records(records, cfg, encoder, segmenter, args.jobs)

    rows = []
    for i, rec in enumerate(records):
        if i not in results:
            continue
        result = results[i]
        save_mask(result.mask, masks_dir / f"{rec.episode_id}.png")
        trace_payload = {"episode_id": rec.episode_id, **result.trace.to_dict(), "iou": result.iou_vs_gt}
        atomic_write_bytes(
            (json.dumps(trace_payload, indent=2, sort_keys=True) + "\n").encode("ascii"),
            traces_dir / f"{rec.episode_id}.json",
        )
        rows.append(EpisodeRow.from_result(rec, result))
    write_results_csv(rows, out_dir / "results.csv")

    elapsed = time.monotonic() - started
    atomic_write_bytes(
        f"episodes={len(records)} succeeded={len(results)} failed={len(errors)} "
        f"elapsed_s={elapsed:.3f}\n".encode("ascii"),
        out_dir / "run.log",
    )
    print(f"{len(results)}/{len(records)} episodes -> {out_dir}")
    if errors:
        return _report_failures(records, errors, sys.stderr)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _resolve_pipeline(args, file_cfg)
    choice = _resolve_backend(args, file_cfg)
    try:
        records = load_manifest(args.manifest)
    except ManifestError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    missing = [r.episode_id for r in records if r.episode.target_gt is None]
    if missing:
        print(f"error: evaluation requires ground truth; missing for: {missing}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        encoder, segmenter = _make_backends(choice, records)
    except TransportError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BACKEND_ERROR

    results, errors = _run_records(records, cfg, encoder, segmenter, args.jobs)
    if errors:
        return _report_failures(records, errors, sys.stderr)

    rows = [EpisodeRow.from_result(rec, results[i]) for i, rec in enumerate(records)]
    summary = summarize_rows(rows)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(rows, out_dir / "results.csv")
    write_class_summary_csv(summary, out_dir / "per_class.csv")
    for name, count, mean in summary.per_class:
        print(f"{name}: n={count} mIoU={100.0 * mean:.1f}%")
    print(f"overall: n={len(rows)} mIoU={summary.miou_percent:.1f}%")
    return EXIT_OK


def cmd_density_study(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    choice = _resolve_backend(args, file_cfg)
    try:
        densities = (
            DensityCandidates.parse(args.densities) if args.densities else DensityCandidates()
        )
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        image = load_image(args.image)
        gt = load_mask(args.mask)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    if choice.kind == "remote":
        try:
            check_health(choice.base_url)
            seg = RemoteSegmenter(choice.base_url)
        except TransportError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_BACKEND_ERROR
    else:
        seg = OracleSegmenter(choice.oracle_spec)
        seg.register(image, gt)

    try:
        rows = density_sensitivity_study(image, gt, densities, seg)
    except BackendError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BACKEND_ERROR
    write_study_csv(rows, args.out)
    for r in rows:
        print(f"density={r.density} points={r.n_points} iou={r.iou:.4f}")
    return EXIT_OK


def cmd_refine(args: argparse.Namespace) -> int:
    try:
        kernel = StructuringElement(shape=args.kernel_shape, radius=args.kernel_radius or 2)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        mask = load_mask(args.mask_in)
    except (OSError, ValueError) as e:
        print(f"error: cannot read mask {args.mask_in}: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    save_mask(refine_mask(mask, kernel), args.mask_out)
    return EXIT_OK


def cmd_health(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    choice = _resolve_backend(args, file_cfg)
    if choice.kind == "oracle":
        print(f"oracle backend ready (mode={choice.oracle_spec.mode})")
        return EXIT_OK
    try:
        body = check_health(choice.base_url)
    except TransportError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BACKEND_ERROR
    print(
        f"status={body.get('status')} encoder={body.get('encoder')} "
        f"segmenter={body.get('segmenter')}"
    )
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, with_pipeline: bool = True) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--backend", choices=["oracle", "remote"], help="backend kind")
    p.add_argument("--base-url", help="remote backend base URL")
    if with_pipeline:
        p.add_argument("--densities", help="comma-separated candidate densities, e.g. 2,4,8")
        p.add_argument("--kernel-radius", type=int, help="refinement kernel radius")
        p.add_argument("--no-prune", action="store_true", help="disable boundary pruning")
        p.add_argument("--sparsify", help="off | adaptive | fixed:<D>")
        p.add_argument("--no-refine", action="store_true", help="disable mask refinement")
        p.add_argument("--jobs", type=int, default=1, help="episode-level parallelism")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparseprompt",
        description="Point-prompted few-shot segmentation with reference-conditioned sparsification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="segment every episode in a manifest")
    p_run.add_argument("--manifest", required=True)
    p_run.add_argument("--out", required=True, help="output directory")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="run and score a manifest with ground truth")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True, help="output directory")
    _add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_study = sub.add_parser("density-study", help="IoU vs prompt-grid density on one image")
    p_study.add_argument("--image", required=True)
    p_study.add_argument("--mask", required=True)
    p_study.add_argument("--densities", help="comma-separated densities, e.g. 2,4,8")
    p_study.add_argument("--out", required=True, help="output CSV path")
    p_study.add_argument("--config", help="JSON config file")
    p_study.add_argument("--backend", choices=["oracle", "remote"])
    p_study.add_argument("--base-url")
    p_study.set_defaults(func=cmd_density_study)

    p_refine = sub.add_parser("refine", help="open-then-close cleanup of a mask PNG")
    p_refine.add_argument("mask_in")
    p_refine.add_argument("mask_out")
    p_refine.add_argument("--kernel-radius", type=int, default=2)
    p_refine.add_argument("--kernel-shape", choices=["square", "disk"], default="square")
    p_refine.set_defaults(func=cmd_refine)

    p_health = sub.add_parser("health", help="check that the backend answers")
    p_health.add_argument("--config", help="JSON config file")
    p_health.add_argument("--backend", choices=["oracle", "remote"])
    p_health.add_argument("--base-url")
    p_health.set_defaults(func=cmd_health)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except ManifestError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except TransportError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BACKEND_ERROR


if __name__ == "__main__":
    sys.exit(main())
