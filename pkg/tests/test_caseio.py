import json
from pathlib import Path

import numpy as np
import pytest

from gridfence.caseio import (
    LodfRecord,
    load_case,
    load_config,
    parse_matpower,
    read_results,
    to_dc_network,
    write_ccdf,
    write_results,
)
from gridfence.errors import ConfigError, NetworkError, ParseError

DATA = Path(__file__).parent.parent / "src" / "gridfence" / "data"

MINI_CASE = """\
function mpc = mini
% two buses, one line
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0   0  0  0  1  1.0  0  138  1  1.06  0.94;
    2  1  50  10 0  0  1  1.0  0  138  1  1.06  0.94;
];
mpc.gen = [
    1  60  0  100  -100  1.0  100  1  200  0;
];
mpc.branch = [
    1  2  0.01  0.25  0.02  0  0  0  0  0  1  -360  360;
];
"""


@pytest.fixture(scope="module")
def case118():
    return load_case(DATA / "case118.m")


@pytest.fixture(scope="module")
def config118(case118):
    return load_config((DATA / "case118_experiment.json").read_text(), case118)


class TestParse:
    def test_minimal_case(self):
        raw = parse_matpower(MINI_CASE)
        assert raw.base_mva == 100
        assert raw.n_buses == 2
        assert raw.n_branches == 1
        assert raw.n_generators == 1

    def test_case118_counts(self, case118):
        assert case118.n_buses == 118
        assert case118.n_branches == 186
        assert case118.n_generators == 54
        assert case118.skipped_sections == ("gencost",)

    def test_comments_and_whitespace_tolerated(self):
        noisy = MINI_CASE.replace(
            "mpc.bus = [", "mpc.bus = [\n  % leading comment line\n"
        ).replace(
            "2  1  50  10 0  0  1  1.0  0  138  1  1.06  0.94;",
            "  2  1  50  10 0  0  1  1.0  0  138  1  1.06  0.94;  % end note",
        )
        raw = parse_matpower(noisy)
        assert raw.bus[1, 2] == 50

    def test_truncated_file_names_missing_section(self):
        truncated = MINI_CASE.split("mpc.branch")[0]
        with pytest.raises(ParseError, match="mpc.branch"):
            parse_matpower(truncated)

    def test_malformed_row_carries_line_number(self):
        broken = MINI_CASE.replace("1  2  0.01", "1  oops  0.01")
        with pytest.raises(ParseError, match="line"):
            parse_matpower(broken)

    def test_zero_reactance_rejected(self):
        broken = MINI_CASE.replace("0.01  0.25", "0.01  0.0")
        with pytest.raises(ParseError, match="zero reactance"):
            parse_matpower(broken)

    def test_dangling_bus_reference_rejected(self):
        broken = MINI_CASE.replace("1  2  0.01", "1  7  0.01")
        with pytest.raises(ParseError, match="unknown buses"):
            parse_matpower(broken)

    def test_missing_base_mva(self):
        with pytest.raises(ParseError, match="baseMVA"):
            parse_matpower(MINI_CASE.replace("mpc.baseMVA = 100;", ""))


class TestToDcNetwork:
    def test_reactance_inverts_to_susceptance(self):
        net = to_dc_network(parse_matpower(MINI_CASE))
        assert net.line(0).susceptance == pytest.approx(4.0)

    def test_out_of_service_branch_excluded(self):
        out = MINI_CASE.replace(
            "mpc.branch = [\n    1  2  0.01  0.25  0.02  0  0  0  0  0  1  -360  360;",
            "mpc.branch = [\n"
            "    1  2  0.01  0.25  0.02  0  0  0  0  0  1  -360  360;\n"
            "    1  2  0.01  0.50  0.02  0  0  0  0  0  0  -360  360;",
        )
        net = to_dc_network(parse_matpower(out))
        assert net.n_lines == 1
        assert net.line_ids == (0,)

    def test_negative_reactance_needs_override(self):
        neg = MINI_CASE.replace("0.01  0.25", "0.01  -0.25")
        raw = parse_matpower(neg)
        with pytest.raises(NetworkError, match="negative reactance"):
            to_dc_network(raw)
        net = to_dc_network(raw, absolute_susceptance=True)
        assert net.line(0).susceptance == pytest.approx(4.0)

    def test_case118_connected(self, case118):
        net = to_dc_network(case118)
        assert net.n_buses == 118
        assert net.n_lines == 186
        assert len(net.connected_components()) == 1

    def test_case118_bridge_census_matches_brute_force(self, case118):
        from oracles import is_bridge_brute

        net = to_dc_network(case118)
        brute = {lid for lid in net.line_ids if is_bridge_brute(net, lid)}
        assert net.bridges == brute

    def test_roundtrip_reemitted_case_keeps_laplacian(self, case118, tmp_path):
        # Re-emit the branch/bus tables as a fresh case text and reparse.
        net = to_dc_network(case118)
        rows = []
        for k in range(case118.n_branches):
            r = case118.branch[k]
            rows.append(
                "  " + "\t".join(repr(float(x)) for x in r) + ";"
            )
        bus_rows = [
            "  " + "\t".join(repr(float(x)) for x in case118.bus[k]) + ";"
            for k in range(case118.n_buses)
        ]
        gen_rows = [
            "  " + "\t".join(repr(float(x)) for x in case118.gen[k]) + ";"
            for k in range(case118.n_generators)
        ]
        text = (
            "mpc.baseMVA = 100;\n"
            "mpc.bus = [\n" + "\n".join(bus_rows) + "\n];\n"
            "mpc.gen = [\n" + "\n".join(gen_rows) + "\n];\n"
            "mpc.branch = [\n" + "\n".join(rows) + "\n];\n"
        )
        net2 = to_dc_network(parse_matpower(text))
        assert np.array_equal(net2.laplacian, net.laplacian)


class TestConfig:
    def test_bundled_config_accepted(self, config118):
        assert config118.tie_line_ids == (29, 43, 44, 53)
        assert len(config118.scenarios) == 5
        assert config118.scenarios[0].name == "original"

    def test_tie_mismatch_lists_both_sets(self, case118):
        doc = json.loads((DATA / "case118_experiment.json").read_text())
        doc["tie_lines"] = [29, 43, 44]
        with pytest.raises(ConfigError) as err:
            load_config(doc, case118)
        assert "[29, 43, 44]" in str(err.value)
        assert "[29, 43, 44, 53]" in str(err.value)

    def test_partition_must_cover(self, case118):
        doc = json.loads((DATA / "case118_experiment.json").read_text())
        doc["partition"]["g2"] = [b for b in doc["partition"]["g2"] if b != 99]
        with pytest.raises(ConfigError, match="missing \\[99\\]"):
            load_config(doc, case118)

    def test_empty_side_rejected(self, case118):
        doc = json.loads((DATA / "case118_experiment.json").read_text())
        doc["partition"]["g2"] = doc["partition"]["g1"] + doc["partition"]["g2"]
        doc["partition"]["g1"] = []
        doc["tie_lines"] = []
        with pytest.raises(ConfigError, match="non-empty"):
            load_config(doc, case118)

    def test_unknown_removed_branch_rejected(self, case118):
        doc = json.loads((DATA / "case118_experiment.json").read_text())
        doc["scenarios"][1]["remove"] = [999]
        with pytest.raises(ConfigError, match="999"):
            load_config(doc, case118)

    def test_not_json(self, case118):
        with pytest.raises(ConfigError, match="JSON"):
            load_config("{not json", case118)


class TestResultsIo:
    def test_empty_records_header_only(self, tmp_path):
        path = tmp_path / "out.csv"
        write_results([], path)
        assert path.read_text() == "scenario,tripped,monitored,model,lodf,status\n"

    def test_roundtrip_single_record(self, tmp_path):
        path = tmp_path / "out.csv"
        rec = LodfRecord("s", 3, 5, "dc", 0.12345678901234, "ok")
        write_results([rec], path)
        assert read_results(path) == [rec]

    def test_status_rows_roundtrip_without_value(self, tmp_path):
        path = tmp_path / "out.csv"
        rec = LodfRecord("s", 3, 5, "ac", None, "censored")
        write_results([rec], path)
        assert read_results(path) == [rec]

    def test_deterministic_order(self, tmp_path):
        recs = [
            LodfRecord("b", 2, 1, "dc", 0.5, "ok"),
            LodfRecord("a", 9, 1, "dc", 0.25, "ok"),
            LodfRecord("a", 2, 7, "dc", -0.5, "ok"),
            LodfRecord("a", 2, 3, "dc", 0.1, "ok"),
        ]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_results(recs, p1)
        write_results(list(reversed(recs)), p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert [r.scenario for r in read_results(p1)] == ["a", "a", "a", "b"]

    def test_ccdf_file_shape(self, tmp_path):
        path = tmp_path / "c.csv"
        write_ccdf([0.1, 0.2], [1.0, 0.5], path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "threshold,ccdf"
        assert len(lines) == 3
