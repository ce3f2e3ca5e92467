"""Bank statistics and the stats report path (CSV tables + PNG figures)."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .skill import Skill

# Platform keywords counted in skill name/description/tags/triggers.
DEFAULT_KEYWORDS = [
    "twitter", "instagram", "youtube", "tiktok", "douyin",
    "wechat", "linkedin", "xiaohongshu", "weibo",
]


@dataclass
class BankStats:
    scope_counts: dict[str, int] = field(default_factory=dict)
    tag_counts: dict[str, int] = field(default_factory=dict)
    version_histogram: dict[str, int] = field(default_factory=dict)  # patch depth -> skills
    keyword_mentions: dict[str, int] = field(default_factory=dict)
    category_counts: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "scopes": self.scope_counts,
            "tags": self.tag_counts,
            "version_histogram": self.version_histogram,
            "keyword_mentions": self.keyword_mentions,
            "categories": self.category_counts,
        }


def skill_mention_text(skill: Skill) -> str:
    """The searchable metadata: name, description, tags, and triggers."""
    return "\n".join([skill.name, skill.description, *skill.tags, *skill.triggers]).lower()


def compute_stats(
    scoped_skills: dict[str, list[Skill]],
    keywords: list[str] | None = None,
    categories: dict[str, str] | None = None,
) -> BankStats:
    """Aggregate counts over skills grouped by scope label.

    Tags are counted case-insensitively (Latin tags fold together);
    keyword mentions count one per skill whose metadata contains the
    keyword; the version histogram buckets skills by patch depth.
    """
    keywords = DEFAULT_KEYWORDS if keywords is None else keywords
    stats = BankStats()
    tag_counter: Counter[str] = Counter()
    version_counter: Counter[str] = Counter()
    keyword_counter: Counter[str] = Counter({k.lower(): 0 for k in keywords})
    category_counter: Counter[str] = Counter()

    for scope_label, skills in scoped_skills.items():
        stats.scope_counts[scope_label] = len(skills)
        for skill in skills:
            tag_counter.update(tag.lower() for tag in skill.tags)
            version_counter[str(skill.version.patch)] += 1
            text = skill_mention_text(skill)
            matched_categories: set[str] = set()
            for keyword in keywords:
                if keyword.lower() in text:
                    keyword_counter[keyword.lower()] += 1
            if categories:
                for keyword, category in categories.items():
                    if keyword.lower() in text:
                        matched_categories.add(category)
                for category in matched_categories or {"General / Mixed"}:
                    category_counter[category] += 1

    stats.tag_counts = dict(sorted(tag_counter.items(), key=lambda kv: (-kv[1], kv[0])))
    stats.version_histogram = dict(sorted(version_counter.items(), key=lambda kv: int(kv[0])))
    stats.keyword_mentions = dict(sorted(keyword_counter.items(), key=lambda kv: (-kv[1], kv[0])))
    stats.category_counts = dict(sorted(category_counter.items(), key=lambda kv: (-kv[1], kv[0])))
    return stats


def _write_csv(path: Path, header: tuple[str, str], rows: dict[str, int]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for key, value in rows.items():
            writer.writerow([key, value])


def _bar_chart(path: Path, title: str, rows: dict[str, int], top: int = 15) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    items = list(rows.items())[:top]
    if not items:
        return
    labels = [k for k, _ in items]
    values = [v for _, v in items]
    fig, ax = plt.subplots(figsize=(8, max(2.5, 0.4 * len(items))))
    ax.barh(range(len(items)), values, color="#3b6ea5")
    ax.set_yticks(range(len(items)))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlabel("count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(stats: BankStats, out_dir: str | Path) -> list[Path]:
    """Write CSV tables and matching PNG bar charts; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    tables: list[tuple[str, tuple[str, str], dict[str, int]]] = [
        ("scopes", ("scope", "skills"), stats.scope_counts),
        ("tags", ("tag", "count"), stats.tag_counts),
        ("versions", ("patch_depth", "skills"), stats.version_histogram),
        ("keywords", ("keyword", "mentions"), stats.keyword_mentions),
    ]
    if stats.category_counts:
        tables.append(("categories", ("category", "skills"), stats.category_counts))
    for name, header, rows in tables:
        csv_path = out / f"{name}.csv"
        _write_csv(csv_path, header, rows)
        written.append(csv_path)
        if rows and name != "scopes":
            png_path = out / f"{name}.png"
            _bar_chart(png_path, name, rows)
            if png_path.exists():
                written.append(png_path)
    return written
