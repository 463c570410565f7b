import math

import numpy as np
import pytest

from heurevo import archive as arch
from heurevo import behavior, screen
from heurevo.behavior import NormalizationBounds
from heurevo.core import Heuristic
from heurevo.tasks.base import CONTRACTS

from conftest import make_candidate

BPP = CONTRACTS["bpp_online"]

VALID = "def score_bins(item, residuals):\n    return [item - r for r in residuals]\n"


def _bounds11():
    return NormalizationBounds(mins=np.zeros(11), maxs=np.ones(11) * 4)


class TestValidateContract:
    def test_valid_fixture(self):
        assert screen.validate_contract(VALID, BPP) == []

    def test_wrong_arity(self):
        src = "def score_bins(item):\n    return [item]\n"
        errs = screen.validate_contract(src, BPP)
        assert any("positional" in e for e in errs)

    def test_missing_entry(self):
        errs = screen.validate_contract("def other(a, b):\n    return a\n", BPP)
        assert any("missing entry point" in e for e in errs)

    def test_syntax_error(self):
        errs = screen.validate_contract("def score_bins(item,:\n", BPP)
        assert any("syntax error" in e for e in errs)

    @pytest.mark.parametrize("stmt", [
        "import os",
        "import socket",
        "from subprocess import run",
        "import urllib.request",
        "import random",
        "import time",
    ])
    def test_denied_imports(self, stmt):
        src = f"{stmt}\ndef score_bins(item, residuals):\n    return residuals\n"
        errs = screen.validate_contract(src, BPP)
        assert any("denied import" in e for e in errs)

    @pytest.mark.parametrize("expr", ["open('x')", "eval('1')", "exec('1')",
                                      "__import__('os')", "input()"])
    def test_denied_calls(self, expr):
        src = f"def score_bins(item, residuals):\n    {expr}\n    return residuals\n"
        errs = screen.validate_contract(src, BPP)
        assert any("denied name" in e for e in errs)

    def test_denied_dunder_attribute(self):
        src = ("def score_bins(item, residuals):\n"
               "    f = (lambda: 0).__globals__\n"
               "    return residuals\n")
        errs = screen.validate_contract(src, BPP)
        assert any("denied attribute" in e for e in errs)

    def test_allowed_imports_pass(self):
        src = ("import math\nimport numpy as np\n"
               "def score_bins(item, residuals):\n"
               "    return [math.sqrt(item) - r for r in residuals]\n")
        assert screen.validate_contract(src, BPP) == []

    def test_never_raises(self):
        screen.validate_contract("", BPP)
        screen.validate_contract("\x00", BPP)


class TestFingerprint:
    def test_formatting_invariant(self):
        a = "def f(x):\n    return x + 1\n"
        b = "def f(x):\n\n    # a comment\n    return x + 1  # trailing\n"
        assert screen.fingerprint(a) == screen.fingerprint(b)

    def test_indent_width_invariant(self):
        a = "def f(x):\n  return x + 1\n"
        b = "def f(x):\n        return x + 1\n"
        assert screen.fingerprint(a) == screen.fingerprint(b)

    def test_literal_change_separates(self):
        a = "def f(x):\n    return x + 1\n"
        b = "def f(x):\n    return x + 2\n"
        assert screen.fingerprint(a) != screen.fingerprint(b)

    def test_rename_separates(self):
        a = "def f(x):\n    return x + 1\n"
        b = "def f(y):\n    return y + 1\n"
        assert screen.fingerprint(a) != screen.fingerprint(b)

    def test_mutated_corpus_matches_token_stream_oracle(self):
        import io
        import tokenize as tk

        def token_stream(src):
            out = []
            for tok in tk.generate_tokens(io.StringIO(src).readline):
                if tok.type in (tk.COMMENT, tk.NL, tk.ENCODING, tk.ENDMARKER):
                    continue
                if tok.type in (tk.NEWLINE, tk.INDENT, tk.DEDENT):
                    out.append(tk.tok_name[tok.type])
                else:
                    out.append((tk.tok_name[tok.type], tok.string))
            return tuple(out)

        base = "def f(a, b):\n    c = a * b\n    return c - 1\n"
        variants = [base]
        for i in range(25):
            variants.append(base.replace("    ", " " * (2 + i % 5)))          # reindent
            variants.append(base.replace("c = a * b", f"c = a * b  # v{i}"))  # comment
        for i in range(10):
            variants.append(base.replace("- 1", f"- {i}"))                    # literal
        fingerprints = [screen.fingerprint(v) for v in variants]
        streams = [token_stream(v) for v in variants]
        for i in range(len(variants)):
            for j in range(len(variants)):
                assert (fingerprints[i] == fingerprints[j]) == (streams[i] == streams[j])


def _heuristic(cid, source):
    return Heuristic(id=cid, source=source, generation=1)


class TestScreenBatch:
    def test_empty_archive_keeps_by_index(self):
        batch = [
            _heuristic("a", VALID),
            _heuristic("b", "def score_bins(item, residuals):\n    return [r for r in residuals]\n"),
            _heuristic("c", "def score_bins(item, residuals):\n    return [r * 2 for r in residuals]\n"),
            _heuristic("d", "def score_bins(item, residuals):\n    return [-r for r in residuals]\n"),
        ]
        a = arch.Archive(arch.build_centroids(11, 8, 0))
        kept, decisions = screen.screen_batch(batch, BPP, a, set(), 0.5, _bounds11())
        assert [h.id for h in kept] == ["a", "b"]
        verdicts = {d.heuristic_id: d.verdict for d in decisions}
        assert verdicts == {"a": "kept", "b": "kept",
                           "c": "rejected_rank", "d": "rejected_rank"}

    def test_duplicate_pair_rejected(self):
        batch = [_heuristic("a", VALID),
                 _heuristic("b", VALID.replace("item - r", "item  -  r"))]
        a = arch.Archive(arch.build_centroids(11, 8, 0))
        kept, decisions = screen.screen_batch(batch, BPP, a, set(), 1.0, _bounds11())
        assert [h.id for h in kept] == ["a"]
        assert decisions[1].verdict == "rejected_duplicate"

    def test_known_fingerprints_rejected(self):
        a = arch.Archive(arch.build_centroids(11, 8, 0))
        known = {screen.fingerprint(VALID)}
        kept, decisions = screen.screen_batch([_heuristic("a", VALID)], BPP, a,
                                              known, 1.0, _bounds11())
        assert kept == []
        assert decisions[0].verdict == "rejected_duplicate"

    def test_malformed_dropped_before_ranking(self):
        batch = [_heuristic("bad", "def nope(x):\n    return x\n"),
                 _heuristic("good", VALID)]
        a = arch.Archive(arch.build_centroids(11, 8, 0))
        kept, decisions = screen.screen_batch(batch, BPP, a, set(), 0.5, _bounds11())
        assert [h.id for h in kept] == ["good"]
        assert decisions[0].verdict == "rejected_malformed"

    def test_novelty_ranking_matches_brute_force(self):
        bounds = _bounds11()
        cs = arch.build_centroids(11, 8, 0)
        a = arch.Archive(cs)
        rng = np.random.default_rng(1)
        for i in range(4):
            a.cells[i] = make_candidate(f"inc{i}", 0.5, behavior_norm=list(rng.random(11)))
        sources = [
            VALID,
            "def score_bins(item, residuals):\n    return [1.0 for r in residuals]\n",
            ("def score_bins(item, residuals):\n"
             "    out = []\n    for r in residuals:\n"
             "        if r > item:\n            out.append(r - item)\n"
             "        else:\n            out.append(0)\n    return out\n"),
            ("import numpy as np\n"
             "def score_bins(item, residuals):\n"
             "    return list(np.asarray(residuals) * -1.0)\n"),
        ]
        batch = [_heuristic(f"h{i}", s) for i, s in enumerate(sources)]
        kept, decisions = screen.screen_batch(batch, BPP, a, set(), 0.5, bounds)

        def novelty(src):
            raw = behavior.static_features(src).as_vector()
            vec = np.array([min(1.0, max(0.0, (x - lo) / (hi - lo))) if hi > lo else 0.5
                            for x, lo, hi in zip(raw, bounds.mins[5:], bounds.maxs[5:])])
            return min(float(np.linalg.norm(vec - np.asarray(c.behavior_norm[5:])))
                       for c in a.cells.values())

        expected = sorted(range(4), key=lambda i: (-novelty(sources[i]), i))[:2]
        assert [h.id for h in kept] == [f"h{i}" for i in sorted(expected)]

    def test_partition_and_kept_bound(self):
        rng = np.random.default_rng(3)
        a = arch.Archive(arch.build_centroids(11, 8, 0))
        batch = [_heuristic(f"h{i}", VALID.replace("item - r", f"item - r - {i}"))
                 for i in range(7)]
        batch.append(_heuristic("broken", "not python ("))
        kept, decisions = screen.screen_batch(batch, BPP, a, set(), 0.5, _bounds11())
        assert len(decisions) == len(batch)
        assert len(kept) == math.ceil(0.5 * 7)
        assert all(screen.validate_contract(h.source, BPP) == [] for h in kept)

    def test_replay_identical(self):
        a = arch.Archive(arch.build_centroids(11, 8, 0))
        batch = [_heuristic(f"h{i}", VALID.replace("item - r", f"item - r * {i + 1}"))
                 for i in range(5)]
        first = screen.screen_batch(batch, BPP, a, set(), 0.4, _bounds11())
        second = screen.screen_batch(batch, BPP, a, set(), 0.4, _bounds11())
        assert [h.id for h in first[0]] == [h.id for h in second[0]]
        assert [(d.verdict, d.novelty) for d in first[1]] == \
               [(d.verdict, d.novelty) for d in second[1]]
