"""CLI contract tests: schema stability, determinism, exit codes."""

import json

import pytest

from psumsim.cli import EXIT_INTERNAL, EXIT_OK, EXIT_USAGE, ROW_KEYS, main

EXPECTED_HEADER = ("workload,layer,dataflow,mode,gs,psum_bits,n_s,n_d,n_m,"
                   "ifmap_pj,weight_pj,psum_pj,ofmap_pj,mac_pj,total_pj,"
                   "ratio,mse,max_abs,sqnr_db")

TINY_WORKLOAD = """\
{
  "name": "tiny",
  "parallelism": {
    "po": 4,
    "pci": 4,
    "pco": 4,
    "pih": 2,
    "piw": 2
  },
  "buffers": {
    "bi_bytes": 262144,
    "bw_bytes": 131072,
    "bo_bytes": 262144
  },
  "layers": [
    {
      "label": "l0",
      "ci": 16,
      "co": 8,
      "ho": 2,
      "wo": 2,
      "k": 1,
      "stride": 1,
      "repeat": 1
    }
  ]
}
"""


@pytest.fixture
def tiny_workload(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(TINY_WORKLOAD)
    return str(path)


def run_cli(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEnergyCommand:
    def test_csv_schema(self, capsys, tiny_workload):
        code, out, _ = run_cli(capsys, "energy", "--workload", tiny_workload,
                               "--dataflow", "ws")
        assert code == EXIT_OK
        lines = out.strip().split("\n")
        assert lines[0] == EXPECTED_HEADER
        assert len(lines) == 3  # l0 + TOTAL
        assert lines[-1].split(",")[1] == "TOTAL"

    def test_json_schema(self, capsys, tiny_workload):
        code, out, _ = run_cli(capsys, "energy", "--workload", tiny_workload,
                               "--dataflow", "is", "--format", "json")
        assert code == EXIT_OK
        rows = json.loads(out)
        assert all(tuple(r.keys()) == ROW_KEYS for r in rows)

    def test_bert_int32_psum_share(self, capsys):
        code, out, _ = run_cli(capsys, "energy", "--workload", "bert-base-128",
                               "--dataflow", "ws", "--psum-bits", "32",
                               "--format", "json")
        assert code == EXIT_OK
        total = next(r for r in json.loads(out) if r["layer"] == "TOTAL")
        assert total["psum_pj"] / total["total_pj"] >= 0.60

    def test_bert_gs1_ratio_near_half(self, capsys):
        code, out, _ = run_cli(capsys, "energy", "--workload", "bert-base-128",
                               "--dataflow", "ws", "--gs", "1", "--format", "json")
        assert code == EXIT_OK
        total = next(r for r in json.loads(out) if r["layer"] == "TOTAL")
        assert 0.4 <= total["ratio"] <= 0.6

    def test_gs_and_psum_bits_conflict(self, tiny_workload):
        with pytest.raises(SystemExit) as exc:
            main(["energy", "--workload", tiny_workload, "--dataflow", "ws",
                  "--gs", "1", "--psum-bits", "32"])
        assert exc.value.code == EXIT_USAGE

    def test_unknown_workload_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "energy", "--workload", "nope",
                               "--dataflow", "ws")
        assert code == EXIT_USAGE
        assert "valid names" in err

    def test_invalid_workload_file(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        code, _, err = run_cli(capsys, "energy", "--workload", str(bad),
                               "--dataflow", "ws")
        assert code == EXIT_USAGE
        assert "missing" in err

    def test_energy_table_override(self, capsys, tiny_workload, tmp_path):
        table = tmp_path / "t.txt"
        table.write_text("e_sram_pj = 1.0\ne_dram_pj = 2.0\ne_mac_pj = 1.0\n")
        code, out, _ = run_cli(capsys, "energy", "--workload", tiny_workload,
                               "--dataflow", "ws", "--format", "json",
                               "--energy-table", str(table))
        assert code == EXIT_OK
        row = json.loads(out)[0]
        assert row["mac_pj"] == row["n_m"] * 1.0

    def test_output_file(self, capsys, tiny_workload, tmp_path):
        out_path = tmp_path / "report.csv"
        code, out, _ = run_cli(capsys, "energy", "--workload", tiny_workload,
                               "--dataflow", "ws", "--output", str(out_path))
        assert code == EXIT_OK and out == ""
        assert out_path.read_text().startswith(EXPECTED_HEADER)


class TestSweepCommand:
    def test_segformer_gs_ordering(self, capsys):
        code, out, _ = run_cli(capsys, "sweep", "--workload", "segformer-b0",
                               "--dataflow", "ws", "--gs", "1,2,3,4",
                               "--format", "json")
        assert code == EXIT_OK
        totals = {r["gs"]: r["ratio"] for r in json.loads(out)
                  if r["layer"] == "TOTAL" and r["mode"] == "apsq"}
        assert totals[1] == totals[2] < totals[3] == totals[4]

    def test_baseline_present_once_per_dataflow(self, capsys, tiny_workload):
        code, out, _ = run_cli(capsys, "sweep", "--workload", tiny_workload,
                               "--gs", "1", "--format", "json")
        rows = json.loads(out)
        base_totals = [r for r in rows
                       if r["mode"] == "baseline" and r["layer"] == "TOTAL"]
        assert code == EXIT_OK
        assert sorted(r["dataflow"] for r in base_totals) == ["is", "ws"]
        assert all(r["ratio"] == 1.0 for r in base_totals)

    def test_empty_sets_rejected(self, capsys, tiny_workload):
        code, _, err = run_cli(capsys, "sweep", "--workload", tiny_workload)
        assert code == EXIT_USAGE and "sweep" in err
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--workload", tiny_workload, "--gs", ""])
        assert exc.value.code == EXIT_USAGE

    def test_deterministic_output(self, capsys):
        args = ("sweep", "--workload", "bert-base-128", "--dataflow", "ws,is",
                "--gs", "1,2", "--psum-bits", "16,32", "--format", "json")
        _, out1, _ = run_cli(capsys, *args)
        _, out2, _ = run_cli(capsys, *args)
        assert out1 == out2


class TestSimulateCommand:
    def test_runs_and_reports_metrics(self, capsys, tiny_workload):
        code, out, _ = run_cli(capsys, "simulate", "--workload", tiny_workload,
                               "--gs", "2", "--k", "8", "--seed", "3",
                               "--format", "json")
        assert code == EXIT_OK
        row = json.loads(out)[0]
        assert row["mode"] == "apsq" and row["gs"] == 2 and row["psum_bits"] == 8
        assert row["mse"] is not None and row["sqnr_db"] is not None
        assert row["total_pj"] is None  # simulation reports no energy fields

    def test_wide_quantizer_is_lossless(self, capsys, tiny_workload):
        code, out, _ = run_cli(capsys, "simulate", "--workload", tiny_workload,
                               "--k", "32", "--format", "json")
        assert code == EXIT_OK
        row = json.loads(out)[0]
        assert row["sqnr_db"] == "inf" and row["mse"] == 0.0

    def test_inf_sentinel_in_csv(self, capsys, tiny_workload):
        code, out, _ = run_cli(capsys, "simulate", "--workload", tiny_workload,
                               "--k", "32")
        assert code == EXIT_OK
        assert out.strip().split("\n")[1].endswith(",inf")

    def test_byte_identical_reruns(self, capsys, tiny_workload):
        for fmt in ("csv", "json"):
            args = ("simulate", "--workload", tiny_workload, "--gs", "4",
                    "--seed", "9", "--format", fmt)
            _, out1, _ = run_cli(capsys, *args)
            _, out2, _ = run_cli(capsys, *args)
            assert out1 == out2

    def test_rae_check_passes(self, capsys, tiny_workload):
        code, _, err = run_cli(capsys, "simulate", "--workload", tiny_workload,
                               "--gs", "3", "--rae-check")
        assert code == EXIT_OK
        assert "mismatch" not in err

    def test_zero_calibration_samples_rejected(self, capsys, tiny_workload):
        code, _, err = run_cli(capsys, "simulate", "--workload", tiny_workload,
                               "--calib-samples", "0")
        assert code == EXIT_USAGE
        assert "calib-samples" in err


class TestTraceCommand:
    def test_trace_csv(self, capsys):
        code, out, _ = run_cli(capsys, "trace", "--gs", "4", "--n-tiles", "8",
                               "--seed", "1")
        assert code == EXIT_OK
        lines = out.strip().split("\n")
        assert lines[0] == "step,s2,banks_read,bank_written,shift_q,shift_dq"
        assert len(lines) == 9
        assert [ln.split(",")[1] for ln in lines[1:]] == \
               ["0", "0", "0", "1", "0", "0", "0", "1"]

    def test_bad_gs(self, capsys):
        code, _, err = run_cli(capsys, "trace", "--gs", "9")
        assert code == EXIT_USAGE


class TestExitCodes:
    def test_constants(self):
        assert (EXIT_OK, EXIT_INTERNAL, EXIT_USAGE) == (0, 1, 2)

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == EXIT_USAGE
