from __future__ import annotations

import random

from autoskill.bank import COMMON, user_scope
from autoskill.gateway import MockLLM, MockScenario
from autoskill.index import BankIndex, cache_name_for
from autoskill.skill import bump_patch

from .conftest import make_skill


class CountingMock(MockLLM):
    def __init__(self, scenario=None):
        super().__init__(scenario)
        self.embed_calls = 0

    def embed(self, texts):
        self.embed_calls += len(texts)
        return super().embed(texts)


class TestCacheName:
    def test_encodes_scope_and_model(self):
        name = cache_name_for(user_scope("alice"), "mock:seed=0:d=32")
        assert name == "users--alice--mock-seed-0-d-32"
        assert cache_name_for(COMMON, "m").startswith("common--")

    def test_distinct_models_get_distinct_caches(self):
        a = cache_name_for(user_scope("u"), "model-a")
        b = cache_name_for(user_scope("u"), "model-b")
        assert a != b


class TestSnapshot:
    def test_cache_hit_avoids_reembedding(self, bank):
        mock = CountingMock()
        bank.put_skill(user_scope("u"), make_skill(random.Random(1)))
        index = BankIndex(bank, mock)
        index.snapshot("u")
        first = mock.embed_calls
        assert first == 1
        index.snapshot("u")
        assert mock.embed_calls == first

    def test_cache_survives_new_index_instance(self, bank):
        mock = CountingMock()
        bank.put_skill(user_scope("u"), make_skill(random.Random(2)))
        BankIndex(bank, mock).snapshot("u")
        fresh = CountingMock()
        BankIndex(bank, fresh).snapshot("u")
        assert fresh.embed_calls == 0

    def test_version_bump_triggers_reembed(self, bank):
        mock = CountingMock()
        skill = make_skill(random.Random(3))
        bank.put_skill(user_scope("u"), skill)
        index = BankIndex(bank, mock)
        index.snapshot("u")
        edited = skill.copy()
        edited.description = "changed"
        edited.version = bump_patch(skill.version)
        bank.put_skill(user_scope("u"), edited)
        before = mock.embed_calls
        rows = index.snapshot("u")
        assert mock.embed_calls == before + 1
        assert rows[0][0].version == edited.version

    def test_common_rows_included_when_enabled(self, bank):
        mock = CountingMock()
        mine = make_skill(random.Random(4))
        shared = make_skill(random.Random(5))
        bank.put_skill(user_scope("u"), mine)
        bank.put_skill(COMMON, shared)
        with_common = BankIndex(bank, mock, include_common=True).snapshot("u")
        assert {s.id for s, _ in with_common} == {mine.id, shared.id}
        without = BankIndex(bank, mock, include_common=False).snapshot("u")
        assert {s.id for s, _ in without} == {mine.id}

    def test_user_snapshot_excludes_common(self, bank):
        mock = CountingMock()
        bank.put_skill(user_scope("u"), make_skill(random.Random(6)))
        bank.put_skill(COMMON, make_skill(random.Random(7)))
        index = BankIndex(bank, mock, include_common=True)
        assert len(index.user_snapshot("u")) == 1

    def test_corrupt_cache_discarded_and_rebuilt(self, bank, caplog):
        mock = CountingMock()
        bank.put_skill(user_scope("u"), make_skill(random.Random(8)))
        index = BankIndex(bank, mock)
        index.snapshot("u")
        name = cache_name_for(user_scope("u"), mock.identifier)
        vec_path = bank.root / "vectors" / f"{name}.vecs.f32"
        vec_path.write_bytes(vec_path.read_bytes()[:-2])
        with caplog.at_level("WARNING"):
            rows = BankIndex(bank, CountingMock()).snapshot("u")
        assert len(rows) == 1
        assert any("inconsistent" in r.message for r in caplog.records)
