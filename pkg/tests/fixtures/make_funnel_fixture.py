"""Regenerate the 726-record funnel fixture.

242 tested days x 3 pattern framings. Marginals:
  Mechanical detections per pattern 168 / 163 / 188 (519 in total)
  strict-materialized per pattern   155 / 147 / 170 (472 in total)
  tested days per quarter           53 / 61 / 64 / 64
  Mechanical tests per quarter      108 / 129 / 140 / 142
  materialized per quarter          99 / 118 / 127 / 128

Usage: python3 tests/fixtures/make_funnel_fixture.py
"""
from __future__ import annotations

import csv
import hashlib
from datetime import date, timedelta
from pathlib import Path

from gexprobe.llm_harness.parsing import DetectionResult, write_detections
from gexprobe.outcome_engine import OutcomeRecord, write_outcomes_csv
from gexprobe.pattern_rules import PatternKind

HERE = Path(__file__).parent
QUARTER_DAYS = (53, 61, 64, 64)
PATTERN_DET = (168, 163, 188)
PATTERN_MAT = (155, 147, 170)
QUARTER_DET = (108, 129, 140, 142)
QUARTER_MAT = (99, 118, 127, 128)


def spread(pool: list, k: int) -> list:
    """k items from pool, evenly spaced."""
    if k > len(pool):
        raise ValueError("cell over capacity")
    return [pool[(i * len(pool)) // k] for i in range(k)]


def table(row_tot, col_tot, cap):
    """Integer matrix with the given margins, each cell at most cap[r]."""
    total = sum(row_tot)
    assert total == sum(col_tot)
    m = [[row_tot[r] * col_tot[c] // total for c in range(len(col_tot))] for r in range(len(row_tot))]
    # hand out the rounding remainder cell by cell until both margins match
    changed = True
    while changed:
        changed = False
        for r in range(len(row_tot)):
            for c in range(len(col_tot)):
                if sum(m[r]) < row_tot[r] and sum(x[c] for x in m) < col_tot[c] and m[r][c] < cap[r]:
                    m[r][c] += 1
                    changed = True
    assert [sum(x) for x in m] == list(row_tot) and [sum(x[c] for x in m) for c in range(len(col_tot))] == list(col_tot)
    return m


def quarter_days(year: int, q: int, k: int) -> list[date]:
    d = date(year, 3 * q - 2, 1)
    end = date(year + (q == 4), (3 * q) % 12 + 1, 1)
    pool = []
    while d < end:
        if d.weekday() < 5:
            pool.append(d)
        d += timedelta(days=1)
    return spread(pool, k)


def main():
    days_by_q = [quarter_days(2024, q + 1, n) for q, n in enumerate(QUARTER_DAYS)]
    det = table(QUARTER_DET, PATTERN_DET, QUARTER_DAYS)
    mat = table(QUARTER_MAT, PATTERN_MAT, QUARTER_DAYS)
    detections, outcomes, dates = [], [], []
    conf_cycle = (82, 60, 85, 80, 91, 83, 78, 84, 95, 81)
    low_cycle = (0, 45, 59, 0, 30)
    serial = 0
    for q, days in enumerate(days_by_q):
        for d in days:
            cid = hashlib.sha256(d.isoformat().encode()).hexdigest()[:16]
            dates.append((cid, d))
        for p, kind in enumerate(PatternKind):
            ids = [hashlib.sha256(d.isoformat().encode()).hexdigest()[:16] for d in days]
            mech = set(spread(ids, det[q][p]))
            mat_ids = set(spread([i for i in ids if i in mech], mat[q][p]))
            for cid in ids:
                serial += 1
                if cid in mech:
                    r = DetectionResult(cid, True, kind, "dealers hedging short gamma", "directional traders",
                                        "forced hedging flows", conf_cycle[serial % len(conf_cycle)], "T+1", kind)
                else:
                    c = low_cycle[serial % len(low_cycle)]
                    if c == 0:
                        r = DetectionResult(cid, False, None, "", "", "", 0, None, kind)
                    else:
                        r = DetectionResult(cid, True, kind, "dealers", "traders", "weak hedging pressure", c,
                                            "T+2", kind)
                detections.append(r)
                hit = cid in mat_ids
                t1 = (0.0041 if serial % 2 else -0.0052) if hit else 0.0011
                rng = 0.0123 if hit and serial % 3 == 0 else 0.0066
                outcomes.append(OutcomeRecord(
                    case_id=cid, framing=kind, pattern=r.pattern, complete=True, t1_return=t1, t3_return=t1 * 1.5,
                    t1_intraday_range=rng, realized_vol_5d=0.14, max_gain_3d=max(0.0, t1), max_drawdown_3d=min(0.0, t1),
                    c1_vol_amplification=abs(t1) > 0.003, c2_direction=serial % 2 == 0, c3_strike_convergence=False,
                    c4_range_expansion=rng > 0.01, materialized_strict=abs(t1) > 0.003 or rng > 0.01,
                    materialized_broad=abs(t1) > 0.003 or rng > 0.01))
    write_detections(HERE / "funnel_detections.jsonl", detections)
    write_outcomes_csv(HERE / "funnel_outcomes.csv", outcomes)
    with (HERE / "funnel_dates.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "date"])
        for cid, d in dates:
            w.writerow([cid, d.isoformat()])


if __name__ == "__main__":
    main()
