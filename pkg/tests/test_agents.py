import json

import pytest

from heurevo import agents
from heurevo.archive import Archive, ExemplarSet, Exemplar, build_centroids, retrieve_exemplars
from heurevo.core import Population
from heurevo.tasks.base import CONTRACTS
from heurevo.workflow import BudgetLedger

from conftest import make_candidate

TSP = CONTRACTS["tsp_construct"]
BPP = CONTRACTS["bpp_online"]


def _population():
    return Population([
        make_candidate("seed-00", 0.21, generation=0, strategy="greedy nearest choice"),
        make_candidate("g01-c0", 0.18, generation=1, strategy="regret-based lookahead"),
    ], capacity=10)


def _exemplars():
    return ExemplarSet([
        Exemplar(make_candidate("g01-c1", 0.3, behavior_norm=[0.9] + [0.5] * 10,
                                strategy="closure bonus"), 4, "closure bonus"),
        Exemplar(make_candidate("g01-c2", 0.4, behavior_norm=[0.1] + [0.5] * 10,
                                strategy="spread items"), 7, "spread items"),
    ])


class TestProposerPrompt:
    def test_cold_start_block(self):
        p = agents.build_proposer_prompt(Population([], 10), ExemplarSet(), TSP)
        assert "No archive exemplars yet." in p.user_text
        assert "(no parents yet)" in p.user_text
        assert p.role_tag == "proposer"
        assert p.expected_format == "json_strategies"

    def test_counts_candidate_blocks(self):
        p = agents.build_proposer_prompt(_population(), _exemplars(), BPP)
        assert p.user_text.count("- parent id=") == 2
        assert p.user_text.count("- exemplar cell=") == 2
        for cid in ("seed-00", "g01-c0"):
            assert cid in p.user_text

    def test_contains_contract_and_instructions(self):
        p = agents.build_proposer_prompt(_population(), _exemplars(), BPP)
        assert BPP.signature in p.user_text
        assert "change one concrete algorithmic idea at a time" in p.user_text
        assert '{"strategies": [{"idea": "...", "target_behavior": "..."}]}' in p.user_text

    def test_byte_identical_across_calls(self, fixtures_dir):
        a = agents.build_proposer_prompt(_population(), _exemplars(), BPP)
        b = agents.build_proposer_prompt(_population(), _exemplars(), BPP)
        assert (a.system_text, a.user_text) == (b.system_text, b.user_text)
        golden = fixtures_dir / "prompt_proposer_bpp.golden.txt"
        if not golden.exists():  # freeze on first run, compare forever after
            golden.write_text(a.system_text + "\n====\n" + a.user_text)
        assert golden.read_text() == a.system_text + "\n====\n" + a.user_text

    def test_overflow_truncates_oldest_parents_first(self):
        pop = Population([
            make_candidate("old-a", 0.5, generation=0, strategy="oldest idea"),
            make_candidate("new-b", 0.4, generation=3, strategy="newest idea"),
        ], capacity=10)
        full = agents.build_proposer_prompt(pop, ExemplarSet(), BPP)
        tight = agents.build_proposer_prompt(pop, ExemplarSet(), BPP,
                                             char_budget=len(full.user_text) - 1)
        assert tight.truncated_blocks >= 1
        assert "new-b" in tight.user_text
        assert "old-a" not in tight.user_text


class TestGeneratorPrompt:
    def test_contains_tsp_signature(self):
        draft = agents.StrategyDraft(idea="prefer boundary nodes")
        p = agents.build_generator_prompt(draft, TSP)
        assert "select_next_node(current_node, destination_node, "
        assert TSP.signature in p.user_text
        assert "keep execution deterministic" in p.user_text
        assert p.expected_format == "code_only"

    def test_contains_bpp_signature(self):
        p = agents.build_generator_prompt(agents.StrategyDraft(idea="x"), BPP)
        assert BPP.signature in p.user_text

    def test_strategy_embedded_verbatim(self):
        idea = "score bins by residual**2 minus item size"
        p = agents.build_generator_prompt(agents.StrategyDraft(idea=idea), BPP)
        assert idea in p.user_text

    def test_byte_identical(self, fixtures_dir):
        draft = agents.StrategyDraft(idea="prefer tight fits", target_behavior="closure")
        a = agents.build_generator_prompt(draft, BPP)
        golden = fixtures_dir / "prompt_generator_bpp.golden.txt"
        if not golden.exists():
            golden.write_text(a.system_text + "\n====\n" + a.user_text)
        assert golden.read_text() == a.system_text + "\n====\n" + a.user_text


class TestParseStrategies:
    def test_clean_object(self):
        drafts = agents.parse_strategies(
            '{"strategies":[{"idea":"use regret insertion","target_behavior":"lookahead"}]}', 4)
        assert len(drafts) == 1
        assert drafts[0].idea == "use regret insertion"
        assert drafts[0].target_behavior == "lookahead"

    def test_fence_tolerance(self):
        wrapped = ('Some prose.\n```json\n'
                   '{"strategies":[{"idea":"use regret insertion","target_behavior":"lookahead"}]}'
                   "\n```\nMore prose.")
        drafts = agents.parse_strategies(wrapped, 4)
        assert len(drafts) == 1 and drafts[0].idea == "use regret insertion"

    def test_truncates_to_k(self):
        text = json.dumps({"strategies": [{"idea": f"i{n}"} for n in range(9)]})
        assert len(agents.parse_strategies(text, 4)) == 4

    def test_never_returns_empty_idea(self):
        text = '{"strategies": [{"idea": ""}, {"idea": "ok"}]}'
        drafts = agents.parse_strategies(text, 4)
        assert [d.idea for d in drafts] == ["ok"]

    def test_unparsable_raises(self):
        with pytest.raises(agents.ProposalParseError):
            agents.parse_strategies("no json here", 4)

    def test_fixture_corpus(self, fixtures_dir):
        corpus = json.loads((fixtures_dir / "proposer_completions.json").read_text())
        assert len(corpus) == 20
        for row in corpus:
            if row["expected"] == 0:
                with pytest.raises(agents.ProposalParseError):
                    agents.parse_strategies(row["text"], 4)
            else:
                drafts = agents.parse_strategies(row["text"], 4)
                assert len(drafts) == row["expected"], row["name"]


class TestExtractCode:
    def test_fenced_block(self):
        text = "Here you go:\n```python\ndef score_bins(item, residuals):\n    return residuals\n```"
        src = agents.extract_code(text, BPP)
        assert src.startswith("def score_bins")

    def test_bare_code(self):
        text = "def score_bins(item, residuals):\n    return residuals\n"
        assert agents.extract_code(text, BPP) == text

    def test_first_of_two_blocks(self):
        text = ("```python\ndef score_bins(item, residuals):\n    return [1]\n```\n"
                "and alternatively\n"
                "```python\ndef score_bins(item, residuals):\n    return [2]\n```")
        assert "return [1]" in agents.extract_code(text, BPP)

    def test_missing_entry_point(self):
        with pytest.raises(agents.GenerationContractError):
            agents.extract_code("```python\ndef other():\n    pass\n```", BPP)


class TestScriptedReplayBackend:
    def _fixtures(self, n):
        return [{"role_tag": "seed", "text": f"def f():\n    return {i}\n",
                 "tokens_in": 10 + i, "tokens_out": 5 + i} for i in range(n)]

    def test_replay_semantics_and_exhaustion(self):
        backend = agents.ScriptedReplayBackend(self._fixtures(5))
        ledger = BudgetLedger()
        prompt = agents.Prompt("seed", "s", "u", "code_only")
        texts = [agents.complete(backend, prompt, ledger).text for _ in range(5)]
        assert texts[4] == "def f():\n    return 4\n"
        with pytest.raises(agents.FixtureExhaustedError):
            agents.complete(backend, prompt, ledger)

    def test_ledger_accounting_exact(self):
        backend = agents.ScriptedReplayBackend(self._fixtures(3))
        ledger = BudgetLedger()
        prompt = agents.Prompt("seed", "s", "u", "code_only")
        total = 0
        for _ in range(3):
            c = agents.complete(backend, prompt, ledger)
            total += c.tokens_in + c.tokens_out
        assert ledger.tokens_in_total + ledger.tokens_out_total == total
        assert ledger.api_queries == 3

    def test_role_matching(self):
        fixtures = [{"role_tag": "proposer", "text": "{}"},
                    {"role_tag": "generator", "text": "code"}]
        backend = agents.ScriptedReplayBackend(fixtures)
        ledger = BudgetLedger()
        gen = agents.complete(backend, agents.Prompt("generator", "s", "u", "code_only"), ledger)
        assert gen.text == "code"
        prop = agents.complete(backend, agents.Prompt("proposer", "s", "u", "json_strategies"), ledger)
        assert prop.text == "{}"

    def test_state_round_trip(self):
        backend = agents.ScriptedReplayBackend(self._fixtures(4))
        ledger = BudgetLedger()
        prompt = agents.Prompt("seed", "s", "u", "code_only")
        agents.complete(backend, prompt, ledger)
        agents.complete(backend, prompt, ledger)
        clone = agents.ScriptedReplayBackend(self._fixtures(4))
        clone.set_state(backend.get_state())
        assert clone.complete(prompt).text == "def f():\n    return 2\n"

    def test_budget_error_before_call(self):
        backend = agents.ScriptedReplayBackend(self._fixtures(2))
        ledger = BudgetLedger(token_budget=1, tokens_in_total=5)
        from heurevo.workflow import BudgetExhaustedError

        with pytest.raises(BudgetExhaustedError):
            agents.complete(backend, agents.Prompt("seed", "s", "u", "code_only"), ledger)


class TestHttpBackend:
    class _FakeResponse:
        def __init__(self, doc, status=200):
            self.doc = doc
            self.status_code = status

        def raise_for_status(self):
            if self.status_code >= 400:
                raise RuntimeError(f"http {self.status_code}")

        def json(self):
            return self.doc

    class _FakeSession:
        def __init__(self, responses):
            self.responses = list(responses)
            self.requests = []

        def post(self, url, json=None, headers=None, timeout=None):
            self.requests.append({"url": url, "json": json, "headers": headers})
            result = self.responses.pop(0)
            if isinstance(result, Exception):
                raise result
            return result

    def test_wire_format_and_usage(self, monkeypatch):
        monkeypatch.setenv("HEUREVO_API_KEY", "sk-test")
        doc = {"choices": [{"message": {"content": "hello"}}],
               "usage": {"prompt_tokens": 12, "completion_tokens": 3}}
        session = self._FakeSession([self._FakeResponse(doc)])
        backend = agents.HttpChatBackend("http://api.test/v1", "test-model",
                                         temperature=0.7, session=session)
        completion = backend.complete(agents.Prompt("proposer", "sys", "user", "json_strategies"))
        assert completion.text == "hello"
        assert completion.tokens_in == 12 and completion.tokens_out == 3
        req = session.requests[0]
        assert req["url"] == "http://api.test/v1/chat/completions"
        assert req["json"]["model"] == "test-model"
        assert req["json"]["temperature"] == 0.7
        assert req["json"]["messages"][0] == {"role": "system", "content": "sys"}
        assert req["headers"]["Authorization"] == "Bearer sk-test"

    def test_retries_then_succeeds(self, monkeypatch):
        monkeypatch.setattr("time.sleep", lambda s: None)
        doc = {"choices": [{"message": {"content": "ok"}}]}
        session = self._FakeSession([RuntimeError("boom"), self._FakeResponse(doc)])
        backend = agents.HttpChatBackend("http://api.test", "m", session=session)
        completion = backend.complete(agents.Prompt("seed", "s", "u", "code_only"))
        assert completion.text == "ok"
        assert completion.tokens_out == agents.estimate_tokens("ok")

    def test_retries_exhausted(self, monkeypatch):
        monkeypatch.setattr("time.sleep", lambda s: None)
        session = self._FakeSession([RuntimeError("a"), RuntimeError("b"), RuntimeError("c")])
        backend = agents.HttpChatBackend("http://api.test", "m", session=session)
        with pytest.raises(agents.BackendError):
            backend.complete(agents.Prompt("seed", "s", "u", "code_only"))


class TestPromptAgainstRetrieval:
    def test_prompt_uses_retrieved_exemplars(self):
        cs = build_centroids(11, 8, 0)
        archive = Archive(cs)
        for i, cell in enumerate((1, 5)):
            cand = make_candidate(f"e{i}", 0.2 + i / 10,
                                  behavior_norm=list(cs.centroids[cell]),
                                  strategy=f"strategy {i}")
            archive.cells[cell] = cand
        exemplars = retrieve_exemplars(archive, Population([], 10), 2)
        prompt = agents.build_proposer_prompt(_population(), exemplars, BPP)
        assert "strategy 0" in prompt.user_text and "strategy 1" in prompt.user_text
