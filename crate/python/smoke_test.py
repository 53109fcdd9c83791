"""Smoke test for the ris_freqsel extension module."""

import cmath
import csv
import io
import math

import ris_freqsel as rf


def main():
    cfg = rf.ScenarioConfig(K=32, n_row=4, n_col=4, seed=3)
    assert cfg.num_subcarriers == 32 and cfg.num_reflectors == 16
    assert rf.ScenarioConfig.from_text(cfg.to_text()) == cfg

    sel = rf.select("random", 4, 32, seed=5)
    assert len(sel) == 4 and all(b - a >= 2 for a, b in zip(sel, sel[1:]))

    w = rf.synthesize_weights([1, 5], 8)
    ref = [cmath.exp(-2j * math.pi * k / 8) + cmath.exp(-2j * math.pi * 5 * k / 8) for k in range(8)]
    assert max(abs(a - b) for a, b in zip(w, ref)) < 1e-12

    prog = rf.reflection_program([1, 5], 8, 8)
    assert prog["passivity_margin"] <= 1.0 + 1e-12

    full = rf.run_realization(cfg.with_value("n_col", "8"), "adjacent", 3, 0)
    assert math.isinf(full["s_over_i"])
    m = rf.run_realization(cfg, "adjacent", 3, 0)
    assert 0.0 < m["rel_rate_pct"] <= 100.0

    rec = rf.simulate(cfg, "fixed-adjacent", 3, realizations=20)
    assert rec["realizations"] == 20 and rec["method"] == "fixed_adjacent"

    table = rf.sweep_selection_size(cfg, [1, 3], ["adjacent", "random"], realizations=10, threads=2)
    rows = list(csv.DictReader(io.StringIO(table)))
    assert table.splitlines()[0] == rf.CSV_HEADER and len(rows) == 4

    table = rf.sweep_ris_size(cfg, [4, 9, 16], [1], ["adjacent"], realizations=5)
    assert [r["N"] for r in csv.DictReader(io.StringIO(table))] == ["4", "9", "16"]

    try:
        rf.ScenarioConfig(K=1)
    except ValueError as e:
        assert "K" in str(e)
    else:
        raise AssertionError("K=1 accepted")

    ok, report = rf.selftest()
    assert ok, report
    print("smoke test passed")


if __name__ == "__main__":
    main()
