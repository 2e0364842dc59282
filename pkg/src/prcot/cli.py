"""Command-line entry point: ``prcot run | eval | ablate | incremental``.

Exit codes: 0 success, 1 one or more tasks failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any

import httpx
import yaml

from .backend import Backend, build_backend
from .core import (
    ALL_BUILTIN,
    BackendSpec,
    Method,
    PerspectiveId,
    PipelineConfig,
    RunTranscript,
    SamplingParams,
    dumps_record,
)
from .efficiency import UsageLedger, compare_methods, render_comparison
from .errors import EmptySummaryError, PRCoTError, ValidationError
from .evaluation import (
    ConfigResult,
    Judge,
    groups_by_label,
    load_dataset,
    render_experiment,
    render_multitask,
    run_ablation,
    run_incremental,
    score_group,
)
from .pipeline import Pipeline, make_config
from .prompts import PromptLibrary
from . import reference

log = logging.getLogger("prcot")

TOKEN_NOTE = (
    "Token totals count every prompt and completion token of every pipeline call "
    "(prompt tokens re-fed across stages included); latency is the sum of call latencies."
)

_CONFIG_KEYS = {
    "prompts_dir", "answer_marker", "perspectives", "mcot_perspective", "parallel",
    "reflection_workers", "sampling", "backend", "judge",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment config file."""

    base: PipelineConfig
    mcot_perspective: PerspectiveId
    prompts_dir: Path | None
    parallel: int
    judge_model: str | None
    base_dir: Path

    def pipeline_config(self, method: Method) -> PipelineConfig:
        if method is Method.COT:
            return make_config(self.base, [], Method.COT)
        if method is Method.MCOT:
            return make_config(self.base, [self.mcot_perspective], Method.MCOT)
        return self.base

    def prompts(self) -> PromptLibrary:
        return PromptLibrary.load(self.prompts_dir)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: invalid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a mapping")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"{path}: unknown config key(s): {', '.join(sorted(unknown))}")
    base_dir = path.parent

    def section(name: str) -> dict[str, Any]:
        value = data.get(name) or {}
        if not isinstance(value, dict):
            raise ValidationError(f"{path}: '{name}' must be a mapping")
        return value

    try:
        backend = BackendSpec.from_dict(section("backend"))
        sampling = SamplingParams.from_dict(section("sampling"))
        perspectives = [PerspectiveId.parse(p) for p in data.get("perspectives", [p.tag for p in ALL_BUILTIN])]
        base = PipelineConfig(
            method=Method.PRCOT,
            active_perspectives=tuple(perspectives),
            backend=backend,
            sampling=sampling,
            answer_marker=data.get("answer_marker", PipelineConfig.answer_marker),
            reflection_workers=int(data.get("reflection_workers", 4)),
        )
        mcot = PerspectiveId.parse(data.get("mcot_perspective", "v1"))
        parallel = int(data.get("parallel", 1))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if parallel < 1:
        raise ValidationError(f"{path}: 'parallel' must be >= 1")
    prompts_dir = data.get("prompts_dir")
    judge = section("judge")
    return ExperimentConfig(
        base=base,
        mcot_perspective=mcot,
        prompts_dir=(base_dir / prompts_dir) if prompts_dir else None,
        parallel=parallel,
        judge_model=judge.get("model"),
        base_dir=base_dir,
    )


def write_transcripts(path: str | Path, transcripts: Sequence[RunTranscript]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for t in transcripts:
            fh.write(dumps_record(t.to_dict()) + "\n")


def read_transcripts(path: str | Path) -> list[RunTranscript]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(RunTranscript.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: malformed transcript record ({exc})") from None
    if not out:
        raise ValidationError(f"{path}: transcript file is empty")
    return out


def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _backend(cfg: ExperimentConfig, args: argparse.Namespace, transport: httpx.BaseTransport | None) -> tuple[ExperimentConfig, Backend]:
    if getattr(args, "backend", None):
        base = replace(cfg.base, backend=replace(cfg.base.backend, kind=args.backend))
        cfg = replace(cfg, base=base)
    return cfg, build_backend(cfg.base.backend, base_dir=cfg.base_dir, transport=transport)


def _judge(cfg: ExperimentConfig, backend: Backend, prompts: PromptLibrary) -> Judge:
    return Judge(backend, cfg.judge_model or cfg.base.backend.model, prompts, cfg.base.sampling)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace, transport: httpx.BaseTransport | None = None) -> int:
    cfg = load_config(args.config)
    tasks = load_dataset(args.dataset)
    cfg, backend = _backend(cfg, args, transport)
    config = cfg.pipeline_config(Method(args.method))
    parallel = args.parallel or cfg.parallel
    pipeline = Pipeline(backend, config, cfg.prompts())
    transcripts = pipeline.run_many(
        tasks, parallel, progress=lambda t: _progress(f"{t.task_id}: {'ok' if t.ok else 'FAILED ' + t.failure.stage}")
    )
    out = Path(args.out)
    write_transcripts(out, transcripts)
    manifest = out.with_name(out.name + ".failures.json")
    failures = [{"task_id": t.task_id, **t.failure.to_dict()} for t in transcripts if t.failure]
    if failures:
        _write_json(manifest, failures)
        _progress(f"{len(failures)} of {len(transcripts)} tasks failed; see {manifest}")
        return 1
    if manifest.exists():
        manifest.unlink()
    return 0


def cmd_eval(args: argparse.Namespace, transport: httpx.BaseTransport | None = None) -> int:
    tasks = {t.id: t for t in load_dataset(args.dataset)}
    transcripts = read_transcripts(args.transcripts)
    judge = None
    if args.judge:
        if not args.config:
            raise ValidationError("--judge needs --config to configure the judge backend")
        cfg = load_config(args.config)
        cfg, backend = _backend(cfg, args, transport)
        judge = _judge(cfg, backend, cfg.prompts())
    ledger = UsageLedger()
    for t in transcripts:
        ledger.add_transcript(t)
    rows = []
    for label, group in groups_by_label(transcripts).items():
        metrics = score_group(group, tasks, judge, label, ledger)
        rows.append(metrics.overall)
        rows.extend(metrics.by_kind)
    ledger.close()
    report: dict[str, Any] = {
        "rows": [r.to_dict() for r in rows],
        "reference": {
            k.value: v for k, v in reference.MULTI_TASK.items() if any(r.kind == k.value for r in rows)
        },
        "token_note": TOKEN_NOTE,
        "judge_cost_included": bool(args.include_judge_cost),
    }
    text = [render_multitask(rows), ""]
    try:
        comparison = compare_methods(ledger, include_judge=args.include_judge_cost)
        report["efficiency"] = [
            {**asdict(c.summary), "token_ratio": c.token_ratio, "latency_ratio": c.latency_ratio} for c in comparison
        ]
        text += [render_comparison(comparison), ""]
    except EmptySummaryError:
        report["efficiency"] = []
    text.append(TOKEN_NOTE)
    out = Path(args.out)
    _write_json(out / "report.json", report)
    (out / "report.txt").write_text("\n".join(text) + "\n", encoding="utf-8")
    print("\n".join(text))
    return 0


def _experiment(args: argparse.Namespace, transport: httpx.BaseTransport | None, runner) -> int:
    cfg = load_config(args.config)
    tasks = load_dataset(args.dataset)
    cfg, backend = _backend(cfg, args, transport)
    prompts = cfg.prompts()
    judge = _judge(cfg, backend, prompts) if args.judge else None
    kwargs: dict[str, Any] = {"judge": judge, "parallel": args.parallel or cfg.parallel, "progress": _progress}
    if runner is run_ablation:
        kwargs["mcot_perspective"] = cfg.mcot_perspective
    results: list[ConfigResult] = runner(tasks, cfg.base, backend, prompts, **kwargs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, r in enumerate(results):
        write_transcripts(out / f"transcripts_{i}.jsonl", r.transcripts)
    _write_json(
        out / "report.json",
        {"configurations": [r.to_dict() for r in results], "token_note": TOKEN_NOTE},
    )
    text = render_experiment(results)
    (out / "report.txt").write_text(text + "\n" + TOKEN_NOTE + "\n", encoding="utf-8")
    print(text)
    return 1 if any(r.n_failed for r in results) else 0


def cmd_ablate(args: argparse.Namespace, transport: httpx.BaseTransport | None = None) -> int:
    return _experiment(args, transport, run_ablation)


def cmd_incremental(args: argparse.Namespace, transport: httpx.BaseTransport | None = None) -> int:
    return _experiment(args, transport, run_incremental)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prcot", description="Poly-reflective chain-of-thought runner")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
        p.add_argument("--config", required=config_required, help="experiment YAML file")
        p.add_argument("--dataset", required=True, help="JSONL dataset")
        p.add_argument("--out", required=True)
        p.add_argument("--backend", choices=("remote", "mock", "replay"), help="override backend.kind")
        p.add_argument("--parallel", type=int, default=None, help="task-level parallelism")
        p.add_argument("--include-judge-cost", action="store_true")

    p = sub.add_parser("run", help="run one method over a dataset")
    common(p)
    p.add_argument("--method", choices=[m.value for m in Method], default="prcot")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a transcript archive")
    common(p, config_required=False)
    p.add_argument("--transcripts", required=True)
    p.add_argument("--judge", action="store_true", help="run the consistency judge")
    p.set_defaults(func=cmd_eval)

    for name, func, help_ in (
        ("ablate", cmd_ablate, "leave-one-out perspective ablation"),
        ("incremental", cmd_incremental, "perspective-count sweep"),
    ):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.add_argument("--judge", action="store_true", help="run the consistency judge")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None, *, transport: httpx.BaseTransport | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s"
    )
    if args.parallel is not None and args.parallel < 1:
        print("error: --parallel must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args, transport)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PRCoTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
