"""Snabba grindar ur acceptance_eval körs direkt; de tunga är markerade slow."""
import json

import pytest

from evaluation import acceptance_eval


class TestGateSelection:
    def test_default_is_all_gates(self):
        assert acceptance_eval._parse_only(None) == list(range(1, 13))

    def test_only_list(self):
        assert acceptance_eval._parse_only("8, 3,8") == [3, 8]

    def test_unknown_gate(self):
        with pytest.raises(SystemExit):
            acceptance_eval._parse_only("13")


class TestCheapGates:
    def test_summary_is_written(self, tmp_path, capsys):
        out = tmp_path / "acceptance.json"
        code = acceptance_eval.main(["--only", "3,8,12", "--out", str(out)])
        summary = json.loads(out.read_text(encoding="utf-8"))
        assert code == 0
        assert summary["passed"] is True
        assert [g["gate"] for g in summary["gates"]] == [3, 8, 12]
        assert capsys.readouterr().out.count("[PASS]") == 3

    def test_lab_error_becomes_failure(self, monkeypatch):
        from filaments.error_handling import ResolutionError

        def broken(threads):
            raise ResolutionError("grid too fine")

        monkeypatch.setitem(acceptance_eval.GATES, 3, ("W spot value", broken))
        res = acceptance_eval.run_gate(3, 1)
        assert not res.passed
        assert res.error.startswith("RESOLUTION_ERROR")


@pytest.mark.slow
class TestAllGates:
    def test_every_gate_passes(self, tmp_path):
        assert acceptance_eval.main(["--out", str(tmp_path / "acceptance.json"), "--threads", "2"]) == 0
