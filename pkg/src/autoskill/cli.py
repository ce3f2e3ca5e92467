"""Operator command line: bootstrap, search, render, stats, import/export, serve."""

from __future__ import annotations

import json
import logging
import shutil
import sys
from pathlib import Path

import click

from .bank import COMMON, SkillBank, user_scope
from .config import AppConfig, load_config
from .errors import AutoSkillError, InvariantViolation
from .gateway import (
    ChatBackend,
    EmbeddingBackend,
    MockLLM,
    MockScenario,
    OpenAIChatBackend,
    OpenAIEmbeddingBackend,
)
from .index import BankIndex
from .lifecycle import evolve_turn
from .report import DEFAULT_KEYWORDS, compute_stats, write_report
from .retrieval import hybrid_rank, select_topk_threshold
from .serving import AutoSkillRuntime, render_context
from .skill import parse_skill_md, validate_skill

log = logging.getLogger(__name__)


def _build_backends(config: AppConfig, mock: bool, seed: int = 0) -> tuple[ChatBackend, EmbeddingBackend]:
    if mock:
        llm = MockLLM(MockScenario(seed=seed))
        return llm, llm
    key = config.upstream_key()
    chat = OpenAIChatBackend(config.upstream_base_url, key, config.chat_model)
    embed = OpenAIEmbeddingBackend(config.upstream_base_url, key, config.embedding_model)
    return chat, embed


@click.group()
@click.option("--bank", "bank_root", type=click.Path(), default=None, help="SkillBank root directory.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="TOML config file.")
@click.option("--user", "user_id", default=None, help="User scope to operate on.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def main(ctx: click.Context, bank_root, config_path, user_id, as_json):
    """AutoSkill: lifelong skill memory for LLM assistants."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(config_path)
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"bad config: {exc}")
    if bank_root:
        cfg.bank_root = Path(bank_root)
    if user_id:
        cfg.default_user = user_id
    ctx.obj = {"config": cfg, "json": as_json}


def _require_bank(cfg: AppConfig) -> SkillBank:
    if not cfg.bank_root.exists():
        raise click.ClickException(f"bank root does not exist: {cfg.bank_root}")
    return SkillBank(cfg.bank_root)


@main.command()
@click.argument("path", type=click.Path(exists=True))
@click.option("--min-turns", default=0, show_default=True,
              help="Skip conversations with fewer messages than this.")
@click.option("--format", "fmt", default="openai-jsonl", show_default=True,
              type=click.Choice(["openai-jsonl"]))
@click.option("--mock-llm", is_flag=True, help="Use the deterministic mock backend.")
@click.option("--seed", default=0, show_default=True, help="Mock backend seed.")
@click.pass_obj
def ingest(obj, path, min_turns, fmt, mock_llm, seed):
    """Replay conversation logs through the skill lifecycle (offline bootstrap)."""
    cfg: AppConfig = obj["config"]
    bank = SkillBank(cfg.bank_root)
    chat, embedder = _build_backends(cfg, mock_llm, seed)
    index = BankIndex(bank, embedder,
                      include_common=cfg.include_common_skills,
                      include_prompt_in_doc_text=cfg.include_prompt_in_doc_text)

    source = Path(path)
    files = sorted(source.glob("*.jsonl")) if source.is_dir() else [source]
    counts = {"conversations": 0, "messages": 0, "candidates": 0,
              "adds": 0, "merges": 0, "discards": 0, "filtered": 0, "skipped": 0}
    for file in files:
        with open(file, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    messages = record["messages"]
                    if not isinstance(messages, list) or not any(
                        m.get("role") == "user" for m in messages
                    ):
                        raise ValueError("no user messages")
                except (ValueError, KeyError, TypeError) as exc:
                    counts["skipped"] += 1
                    log.warning("skipping malformed record in %s: %s", file, exc)
                    continue
                if min_turns and len(messages) < min_turns:
                    counts["filtered"] += 1
                    continue
                counts["conversations"] += 1
                counts["messages"] += len(messages)
                for i, message in enumerate(messages):
                    if message.get("role") != "user":
                        continue
                    report = evolve_turn(cfg.default_user, messages[: i + 1], bank, index, cfg, chat)
                    counts["candidates"] += len(report.entries)
                    for entry in report.entries:
                        counts[entry.action + "s"] += 1
    if obj["json"]:
        click.echo(json.dumps(counts))
    else:
        for key, value in counts.items():
            click.echo(f"{key}: {value}")


@main.command()
@click.argument("query")
@click.option("--lambda", "lam", type=float, default=None, help="Dense/lexical fusion weight override.")
@click.option("--k", type=int, default=None, help="Top-K override.")
@click.option("--eta", type=float, default=None, help="Threshold override.")
@click.option("--mock-llm", is_flag=True, help="Use the deterministic mock embedder.")
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def search(obj, query, lam, k, eta, mock_llm, seed):
    """Rank skills for a query and print fused scores."""
    cfg: AppConfig = obj["config"]
    if lam is not None:
        cfg.weights.lam = lam
    if k is not None:
        cfg.weights.k = k
    if eta is not None:
        cfg.weights.eta = eta
    bank = _require_bank(cfg)
    _, embedder = _build_backends(cfg, mock_llm, seed)
    index = BankIndex(bank, embedder,
                      include_common=cfg.include_common_skills,
                      include_prompt_in_doc_text=cfg.include_prompt_in_doc_text)
    rows = index.snapshot(cfg.default_user)
    ranked = []
    if rows:
        ranked = hybrid_rank(query, index.embed_text(query), rows,
                             lam=cfg.weights.lam, bm25_params=cfg.bm25,
                             include_prompt=cfg.include_prompt_in_doc_text)
    if obj["json"]:
        click.echo(json.dumps([{
            "id": s.skill.id, "name": s.skill.name,
            "dense_norm": s.dense_norm, "lexical_norm": s.lexical_norm, "rel": s.rel,
        } for s in ranked]))
    else:
        for s in ranked:
            click.echo(f"{s.skill.id}  {s.skill.name}  d^={s.dense_norm:.4f}  "
                       f"b^={s.lexical_norm:.4f}  rel={s.rel:.4f}")


@main.command("render-context")
@click.argument("query")
@click.option("--mock-llm", is_flag=True, help="Use the deterministic mock embedder.")
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def render_context_cmd(obj, query, mock_llm, seed):
    """Print the context block that would be injected for a query."""
    cfg: AppConfig = obj["config"]
    bank = _require_bank(cfg)
    _, embedder = _build_backends(cfg, mock_llm, seed)
    index = BankIndex(bank, embedder,
                      include_common=cfg.include_common_skills,
                      include_prompt_in_doc_text=cfg.include_prompt_in_doc_text)
    rows = index.snapshot(cfg.default_user)
    hits = []
    if rows:
        ranked = hybrid_rank(query, index.embed_text(query), rows,
                             lam=cfg.weights.lam, bm25_params=cfg.bm25,
                             include_prompt=cfg.include_prompt_in_doc_text)
        hits = select_topk_threshold(ranked, cfg.weights.k, cfg.weights.eta)
    context = render_context(query, hits)
    if context.text:
        click.echo(context.text)


@main.command()
@click.option("--all-users", is_flag=True, help="Aggregate over every user scope.")
@click.option("--keywords", "keywords_file", type=click.Path(exists=True), default=None,
              help="Keyword list (one per line) for mention counting.")
@click.option("--categories", "categories_file", type=click.Path(exists=True), default=None,
              help="JSON keyword-to-category mapping for category rollups.")
@click.option("--report", "report_dir", type=click.Path(), default=None,
              help="Write CSV tables and PNG charts into this directory.")
@click.pass_obj
def stats(obj, all_users, keywords_file, categories_file, report_dir):
    """Bank statistics: scope counts, normalized tags, versions, keyword mentions."""
    cfg: AppConfig = obj["config"]
    bank = _require_bank(cfg)
    scoped = {}
    users_dir = cfg.bank_root / "Users"
    if all_users and users_dir.is_dir():
        for d in sorted(users_dir.iterdir()):
            if d.is_dir():
                scoped[f"Users/{d.name}"] = bank.list_skills(user_scope(d.name))
    else:
        scoped[f"Users/{cfg.default_user}"] = bank.list_skills(user_scope(cfg.default_user))
    scoped["Common"] = bank.list_skills(COMMON)

    keywords = None
    if keywords_file:
        keywords = [line.strip() for line in open(keywords_file, encoding="utf-8") if line.strip()]
    categories = None
    if categories_file:
        categories = json.load(open(categories_file, encoding="utf-8"))

    result = compute_stats(scoped, keywords, categories)
    if report_dir:
        written = write_report(result, report_dir)
        for p in written:
            log.info("wrote %s", p)
    if obj["json"]:
        click.echo(json.dumps(result.as_dict(), ensure_ascii=False))
    else:
        click.echo(f"skills per scope: {result.scope_counts}")
        click.echo("top tags:")
        for tag, count in list(result.tag_counts.items())[:15]:
            click.echo(f"  {tag}: {count}")
        click.echo(f"version histogram (patch depth): {result.version_histogram}")
        click.echo(f"keyword mentions: {result.keyword_mentions}")
        if result.category_counts:
            click.echo(f"categories: {result.category_counts}")


@main.command()
@click.argument("out_path", type=click.Path())
@click.pass_obj
def export(obj, out_path):
    """Copy the user's skill subtree verbatim to OUT_PATH."""
    cfg: AppConfig = obj["config"]
    _require_bank(cfg)
    src = cfg.bank_root / "Users" / cfg.default_user
    if not src.is_dir():
        raise click.ClickException(f"no skills for user {cfg.default_user!r}")
    shutil.copytree(src, out_path, dirs_exist_ok=True)
    click.echo(f"exported {src} -> {out_path}")


@main.command("import")
@click.argument("archive", type=click.Path(exists=True))
@click.pass_obj
def import_cmd(obj, archive):
    """Validate and import a directory tree of skill artifacts."""
    cfg: AppConfig = obj["config"]
    bank = SkillBank(cfg.bank_root)
    scope = user_scope(cfg.default_user)
    existing_ids = {s.id for s in bank.list_skills(scope)}
    imported, rejected = 0, []
    for path in sorted(Path(archive).rglob("SKILL.md")):
        try:
            skill = parse_skill_md(path.read_text(encoding="utf-8"))
            validate_skill(skill)
        except (AutoSkillError, OSError) as exc:
            rejected.append((path, str(exc)))
            continue
        if skill.id in existing_ids:
            skill.id = cfg.id_factory()
        existing_ids.add(skill.id)
        bank.put_skill(scope, skill)
        imported += 1
    report = {"imported": imported, "rejected": [{"path": str(p), "reason": r} for p, r in rejected]}
    if obj["json"]:
        click.echo(json.dumps(report))
    else:
        click.echo(f"imported: {imported}")
        for p, reason in rejected:
            click.echo(f"rejected {p}: {reason}")


@main.command()
@click.option("--mock-upstream", is_flag=True, help="Serve against a built-in mock upstream.")
@click.option("--mock-llm", is_flag=True, help="Use the deterministic mock for internal LLM calls.")
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def serve(obj, mock_upstream, mock_llm, seed):
    """Run the OpenAI-compatible proxy with the admin API (and /ui if built)."""
    import uvicorn

    from .proxy import create_app

    cfg: AppConfig = obj["config"]
    host, _, port = cfg.listen.rpartition(":")
    if not host or not port.isdigit():
        raise click.ClickException(f"bad listen address (config key 'listen'): {cfg.listen!r}")
    if not mock_upstream and not cfg.upstream_base_url:
        raise click.ClickException("bad config: upstream_base_url is empty")
    chat, embedder = _build_backends(cfg, mock_llm or mock_upstream, seed)
    runtime = AutoSkillRuntime(SkillBank(cfg.bank_root), cfg, chat, embedder)
    upstream = None
    if mock_upstream:
        from .mockserver import MockUpstream
        upstream = MockUpstream().client()
        cfg.upstream_base_url = "http://mock-upstream/v1"
    app = create_app(runtime, upstream)
    try:
        uvicorn.run(app, host=host, port=int(port), log_level="info")
    finally:
        runtime.close(flush=True)


if __name__ == "__main__":
    main()
